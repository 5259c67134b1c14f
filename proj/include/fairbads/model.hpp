#pragma once
// Logistic classifier f_theta, weighted/unweighted cross-entropy losses,
// and exact analytic gradients with respect to theta and sample weights.

#include "fairbads/common.hpp"
#include "fairbads/data.hpp"

#include <stdexcept>
#include <utility>

namespace fairbads {

struct ModelParams {
    Vec theta;  // length d+1: linear weights followed by the bias
};

struct SampleWeights {
    Vec w;  // raw weights; effective selection weight is sigmoid(w_i)
};

// Feature matrix and labels for one group (or the whole set).
struct DataSlice {
    Mat X;  // n x d
    Vec y;  // n

    int size() const { return static_cast<int>(X.rows()); }
};

inline DataSlice slice_group(const Dataset& ds, int group) {
    if (group < 0 || group >= ds.group_count()) throw std::invalid_argument("group out of range");
    const int n = ds.group_sizes[static_cast<std::size_t>(group)];
    DataSlice s;
    s.X.resize(n, ds.d);
    s.y.resize(n);
    int r = 0;
    for (const auto& e : ds.examples) {
        if (e.s != group) continue;
        s.X.row(r) = e.x.transpose();
        s.y[r] = e.y;
        ++r;
    }
    return s;
}

inline DataSlice slice_meta(const MetaSet& meta) {
    DataSlice s;
    const int n = meta.size();
    if (n == 0) return s;
    const auto d = meta.examples.front().x.size();
    s.X.resize(n, d);
    s.y.resize(n);
    for (int i = 0; i < n; ++i) {
        s.X.row(i) = meta.examples[static_cast<std::size_t>(i)].x.transpose();
        s.y[i] = meta.examples[static_cast<std::size_t>(i)].y;
    }
    return s;
}

inline double predict_prob(const ModelParams& params, const Vec& x) {
    if (params.theta.size() != x.size() + 1) {
        throw std::invalid_argument("feature dimension does not match parameters");
    }
    const auto d = x.size();
    const double logit_v = params.theta.head(d).dot(x) + params.theta[d];
    return clamp_prob(sigmoid(logit_v));
}

// Clamped probabilities for every row of X.
inline Vec batch_probs(const Vec& theta, const Mat& X) {
    if (theta.size() != X.cols() + 1) {
        throw std::invalid_argument("feature dimension does not match parameters");
    }
    Vec logits = X * theta.head(X.cols());
    logits.array() += theta[X.cols()];
    Vec p(logits.size());
    for (Eigen::Index i = 0; i < logits.size(); ++i) p[i] = clamp_prob(sigmoid(logits[i]));
    return p;
}

// sum_i sigmoid(w_i) * CE(f_theta(x_i), y_i)
inline double weighted_loss(const ModelParams& params, const SampleWeights& weights,
                            const DataSlice& data) {
    if (weights.w.size() != data.size()) {
        throw std::invalid_argument("weight vector length does not match group size");
    }
    const Vec p = batch_probs(params.theta, data.X);
    double loss = 0.0;
    for (int i = 0; i < data.size(); ++i) {
        loss += sigmoid(weights.w[i]) * cross_entropy(p[i], data.y[i]);
    }
    return loss;
}

inline double meta_ce_loss(const ModelParams& params, const DataSlice& meta) {
    if (meta.size() == 0) return 0.0;
    const Vec p = batch_probs(params.theta, meta.X);
    double loss = 0.0;
    for (int i = 0; i < meta.size(); ++i) loss += cross_entropy(p[i], meta.y[i]);
    return loss;
}

// Accumulates the gradient of an (optionally weighted) cross-entropy sum
// into grad; sw empty means unit weights.
inline void accumulate_ce_grad_theta(const Vec& theta, const Mat& X, const Vec& y,
                                     const Vec& sw, Vec& grad) {
    if (X.rows() == 0) return;
    const Vec p = batch_probs(theta, X);
    Vec v = p - y;
    if (sw.size() > 0) v.array() *= sw.array();
    grad.head(X.cols()) += X.transpose() * v;
    grad[X.cols()] += v.sum();
}

// KL(Bernoulli(q1) || Bernoulli(p_theta)) summed over rows; q1 = P(y=1).
// Equals the soft-target cross entropy minus the (constant) pseudo-label
// entropy, so its theta-gradient is the soft-target CE gradient.
inline double bernoulli_kl_loss(const ModelParams& params, const Mat& X, const Vec& q1) {
    if (q1.size() != X.rows()) throw std::invalid_argument("soft labels do not match rows");
    const Vec p = batch_probs(params.theta, X);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double q = q1[i];
        if (q < 0.0 || q > 1.0) throw std::invalid_argument("soft label outside [0, 1]");
        double term = -(q * std::log(p[i]) + (1.0 - q) * std::log1p(-p[i]));
        if (q > 0.0) term += q * std::log(q);
        if (q < 1.0) term += (1.0 - q) * std::log1p(-q);
        loss += term;
    }
    return loss;
}

inline void accumulate_kl_grad_theta(const Vec& theta, const Mat& X, const Vec& q1, Vec& grad) {
    if (X.rows() == 0) return;
    const Vec p = batch_probs(theta, X);
    const Vec v = p - q1;
    grad.head(X.cols()) += X.transpose() * v;
    grad[X.cols()] += v.sum();
}

struct LogLikGrads {
    Vec grad_theta;  // d+1
    Vec grad_w;      // group size
};

// Gradients of the log-likelihood part of the posterior:
//   grad_theta = -d/dtheta [weighted training loss + meta CE loss]
//   grad_w     = -d/dw     [weighted training loss]
inline LogLikGrads grads_log_likelihood(const ModelParams& params, const SampleWeights& weights,
                                        const DataSlice& data, const MetaSet& meta) {
    if (weights.w.size() != data.size()) {
        throw std::invalid_argument("weight vector length does not match group size");
    }
    const auto P = params.theta.size();
    LogLikGrads g;
    g.grad_theta = Vec::Zero(P);
    g.grad_w = Vec::Zero(weights.w.size());

    Vec sw(weights.w.size());
    for (Eigen::Index i = 0; i < sw.size(); ++i) sw[i] = sigmoid(weights.w[i]);
    accumulate_ce_grad_theta(params.theta, data.X, data.y, sw, g.grad_theta);
    const DataSlice ms = slice_meta(meta);
    if (ms.size() > 0) accumulate_ce_grad_theta(params.theta, ms.X, ms.y, Vec(), g.grad_theta);
    g.grad_theta = -g.grad_theta;

    const Vec p = batch_probs(params.theta, data.X);
    for (int i = 0; i < data.size(); ++i) {
        g.grad_w[i] = -sigmoid_grad(weights.w[i]) * cross_entropy(p[i], data.y[i]);
    }
    return g;
}

}  // namespace fairbads
