#pragma once
// Group log-posterior over the joint particle z = (theta, padded w):
// weighted training loss + meta loss + soft weight prior, with the full
// analytic gradient in z-space.

#include "fairbads/common.hpp"
#include "fairbads/data.hpp"
#include "fairbads/model.hpp"

#include <optional>
#include <stdexcept>

namespace fairbads {

struct PriorConfig {
    double beta = 0.005;       // target mean selection level
    double prior_scale = 1.0;  // multiplier on the squared penalty

    // Ablation switches for the literal reading of the decomposition:
    // reward_sign flips the prior term to a reward inside the log-density;
    // sum_over_padded includes padded slots in the prior sum and target.
    bool reward_sign = false;
    bool sum_over_padded = false;
};

struct GroupPosterior {
    int group = 0;
    DataSlice data;   // this group's examples
    DataSlice meta;   // shared meta set (hard labels)
    std::optional<Vec> meta_soft;  // P(y=1) pseudo-labels; replaces meta CE when set
    PriorConfig prior;
    int theta_dim = 0;   // P = d+1
    int n_live = 0;      // N_s
    int n_padded = 0;    // N_bar

    int dim() const { return theta_dim + n_padded; }
};

inline GroupPosterior make_group_posterior(const Dataset& ds, const MetaSet& meta, int group,
                                           const PriorConfig& prior, bool use_surrogate_meta = false) {
    GroupPosterior gp;
    gp.group = group;
    gp.data = slice_group(ds, group);
    gp.meta = slice_meta(meta);
    gp.prior = prior;
    gp.theta_dim = ds.d + 1;
    gp.n_live = gp.data.size();
    gp.n_padded = ds.n_max;
    if (use_surrogate_meta) {
        if (!meta.soft_labels) throw std::invalid_argument("surrogate meta requires soft labels");
        gp.meta_soft = meta.soft_labels->col(1);
    }
    return gp;
}

namespace detail {

inline void check_particle_dim(const GroupPosterior& gp, const Vec& z) {
    if (z.size() != gp.dim()) {
        throw std::invalid_argument("particle dimension does not match posterior (expected " +
                                    std::to_string(gp.dim()) + ", got " + std::to_string(z.size()) + ")");
    }
}

inline int prior_range(const GroupPosterior& gp) {
    return gp.prior.sum_over_padded ? gp.n_padded : gp.n_live;
}

}  // namespace detail

// log p_s(z) up to the normalizing constant; larger is higher density.
inline double log_post(const GroupPosterior& gp, const Vec& z) {
    detail::check_particle_dim(gp, z);
    const ModelParams params{z.head(gp.theta_dim)};
    const SampleWeights weights{z.segment(gp.theta_dim, gp.n_live)};

    double value = -weighted_loss(params, weights, gp.data);
    if (gp.meta_soft) {
        value -= bernoulli_kl_loss(params, gp.meta.X, *gp.meta_soft);
    } else {
        value -= meta_ce_loss(params, gp.meta);
    }

    const int nr = detail::prior_range(gp);
    double sum_sigma = 0.0;
    for (int i = 0; i < nr; ++i) sum_sigma += sigmoid(z[gp.theta_dim + i]);
    const double dev = sum_sigma - gp.prior.beta * nr;
    const double prior_term = gp.prior.prior_scale * dev * dev;
    value += gp.prior.reward_sign ? prior_term : -prior_term;
    return value;
}

// Gradient of log_post; padded weight slots receive exactly 0.
inline Vec grad_log_post(const GroupPosterior& gp, const Vec& z) {
    detail::check_particle_dim(gp, z);
    const int P = gp.theta_dim;
    const Vec theta = z.head(P);
    Vec grad = Vec::Zero(gp.dim());

    Vec sw(gp.n_live);
    for (int i = 0; i < gp.n_live; ++i) sw[i] = sigmoid(z[P + i]);

    // theta block: -(weighted CE grad + meta grad)
    Vec gtheta = Vec::Zero(P);
    accumulate_ce_grad_theta(theta, gp.data.X, gp.data.y, sw, gtheta);
    if (gp.meta_soft) {
        accumulate_kl_grad_theta(theta, gp.meta.X, *gp.meta_soft, gtheta);
    } else if (gp.meta.size() > 0) {
        accumulate_ce_grad_theta(theta, gp.meta.X, gp.meta.y, Vec(), gtheta);
    }
    grad.head(P) = -gtheta;

    // weight block: likelihood path through sigma(w_i) plus the prior pull
    const int nr = detail::prior_range(gp);
    double sum_sigma = 0.0;
    for (int i = 0; i < nr; ++i) sum_sigma += sigmoid(z[P + i]);
    const double dev = sum_sigma - gp.prior.beta * nr;
    const double prior_sign = gp.prior.reward_sign ? 1.0 : -1.0;

    const Vec p = batch_probs(theta, gp.data.X);
    for (int i = 0; i < nr; ++i) {
        const double sg = sigmoid_grad(z[P + i]);
        double g = prior_sign * 2.0 * gp.prior.prior_scale * dev * sg;
        if (i < gp.n_live) g -= sg * cross_entropy(p[i], gp.data.y[i]);
        grad[P + i] = g;
    }
    return grad;
}

}  // namespace fairbads
