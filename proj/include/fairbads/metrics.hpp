#pragma once
// Classification accuracy and fairness metrics (DP on hard predictions,
// DDP on soft scores, EO on true-positive rates), posterior-averaged
// prediction, and the Wasserstein distance between group weight clouds.

#include "fairbads/central.hpp"
#include "fairbads/common.hpp"
#include "fairbads/data.hpp"
#include "fairbads/model.hpp"
#include "fairbads/particles.hpp"

#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace fairbads {

struct FairnessReport {
    int epoch = 0;
    double acc = 0.0;
    double dp = 0.0;
    double ddp = 0.0;
    double eo = 0.0;
    double w2_weights = 0.0;
    Vec group_pos_rates;
    Vec group_tprs;  // -1 marks a group with no positives (excluded from EO)
};

using Predictor = std::function<double(const Vec&)>;

inline FairnessReport evaluate_predictor(const Predictor& predict, const Dataset& data,
                                         double threshold = 0.5) {
    const int S = data.group_count();
    if (S < 2) throw std::invalid_argument("fairness metrics need at least two groups");
    for (int s = 0; s < S; ++s) {
        if (data.group_sizes[static_cast<std::size_t>(s)] == 0) {
            throw std::invalid_argument("group " + std::to_string(s) + " absent from data");
        }
    }

    const int n = data.size();
    std::vector<double> scores(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n),
                 [&](std::size_t i) { scores[i] = predict(data.examples[i].x); });

    FairnessReport rep;
    rep.group_pos_rates = Vec::Zero(S);
    rep.group_tprs = Vec::Zero(S);
    Vec soft_means = Vec::Zero(S);
    std::vector<int> pos_label_counts(static_cast<std::size_t>(S), 0);
    std::vector<int> tp_counts(static_cast<std::size_t>(S), 0);
    double soft_total = 0.0;
    int correct = 0;
    for (int i = 0; i < n; ++i) {
        const auto& e = data.examples[static_cast<std::size_t>(i)];
        const double p = scores[static_cast<std::size_t>(i)];
        const int yhat = p >= threshold ? 1 : 0;
        if (yhat == e.y) ++correct;
        rep.group_pos_rates[e.s] += yhat;
        soft_means[e.s] += p;
        soft_total += p;
        if (e.y == 1) {
            ++pos_label_counts[static_cast<std::size_t>(e.s)];
            if (yhat == 1) ++tp_counts[static_cast<std::size_t>(e.s)];
        }
    }
    rep.acc = static_cast<double>(correct) / n;
    soft_total /= n;

    double max_rate = -1.0, min_rate = 2.0;
    double max_tpr = -1.0, min_tpr = 2.0;
    bool any_tpr = false;
    for (int s = 0; s < S; ++s) {
        const int ns = data.group_sizes[static_cast<std::size_t>(s)];
        rep.group_pos_rates[s] /= ns;
        soft_means[s] /= ns;
        max_rate = std::max(max_rate, rep.group_pos_rates[s]);
        min_rate = std::min(min_rate, rep.group_pos_rates[s]);
        rep.ddp = std::max(rep.ddp, std::abs(soft_means[s] - soft_total));
        if (pos_label_counts[static_cast<std::size_t>(s)] > 0) {
            rep.group_tprs[s] = static_cast<double>(tp_counts[static_cast<std::size_t>(s)]) /
                                pos_label_counts[static_cast<std::size_t>(s)];
            max_tpr = std::max(max_tpr, rep.group_tprs[s]);
            min_tpr = std::min(min_tpr, rep.group_tprs[s]);
            any_tpr = true;
        } else {
            rep.group_tprs[s] = -1.0;
        }
    }
    rep.dp = max_rate - min_rate;
    rep.eo = any_tpr ? max_tpr - min_tpr : 0.0;
    return rep;
}

inline FairnessReport evaluate(const ModelParams& params, const Dataset& data,
                               double threshold = 0.5) {
    return evaluate_predictor([&](const Vec& x) { return predict_prob(params, x); }, data, threshold);
}

// Bayesian model average: mean predicted probability over the theta block
// of every particle.
inline double posterior_predict(const ParticleSet& particles, const Vec& x) {
    if (particles.size() == 0) throw std::invalid_argument("empty particle set");
    const int P = particles.theta_dim > 0 ? particles.theta_dim : static_cast<int>(particles.dim());
    if (P != x.size() + 1) throw std::invalid_argument("feature dimension does not match particles");
    double sum = 0.0;
    for (const auto& z : particles.zs) {
        sum += predict_prob(ModelParams{z.head(P)}, x);
    }
    return sum / particles.size();
}

// W2 between the clouds of effective weights sigma(w): the weight block of
// each particle mapped through sigma, matched by exact assignment.
inline double weight_distance(const ParticleSet& group_a, const ParticleSet& group_b) {
    if (group_a.size() != group_b.size()) throw std::invalid_argument("particle counts differ");
    const Eigen::Index wa = group_a.dim() - group_a.theta_dim;
    const Eigen::Index wb = group_b.dim() - group_b.theta_dim;
    if (wa != wb) throw std::invalid_argument("weight blocks differ in length");
    const int M = group_a.size();
    auto sigma_block = [](const ParticleSet& ps, int m, Eigen::Index len) {
        Vec v = ps.zs[static_cast<std::size_t>(m)].tail(len);
        for (Eigen::Index i = 0; i < len; ++i) v[i] = sigmoid(v[i]);
        return v;
    };
    Mat cost(M, M);
    std::vector<Vec> sa(static_cast<std::size_t>(M)), sb(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) {
        sa[static_cast<std::size_t>(m)] = sigma_block(group_a, m, wa);
        sb[static_cast<std::size_t>(m)] = sigma_block(group_b, m, wb);
    }
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j < M; ++j) {
            cost(i, j) = (sa[static_cast<std::size_t>(i)] - sb[static_cast<std::size_t>(j)]).squaredNorm();
        }
    }
    const AssignmentResult assign = solve_assignment(cost);
    return std::sqrt(assign.cost / M);
}

}  // namespace fairbads
