#pragma once
// Kernelized particle updates: plain SVGD and the fairness-aware score
// that adds the central-distribution pull.

#include "fairbads/central.hpp"
#include "fairbads/common.hpp"
#include "fairbads/particles.hpp"
#include "fairbads/posterior.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <vector>

namespace fairbads {

enum class BandwidthRule { median, fixed };

struct SvgdConfig {
    double step_size = 0.1;
    BandwidthRule bandwidth = BandwidthRule::median;
    double fixed_h = 1.0;
    double lambda_fair = 1.0;  // multiplier on the central score
};

struct KernelEval {
    double value;
    Vec grad_a;  // gradient with respect to the first argument
};

inline KernelEval rbf_kernel(const Vec& a, const Vec& b, double h) {
    if (a.size() != b.size()) throw std::invalid_argument("kernel arguments differ in dimension");
    if (h <= 0.0) throw std::invalid_argument("bandwidth must be positive");
    const Vec diff = a - b;
    const double value = std::exp(-diff.squaredNorm() / (2.0 * h * h));
    return {value, -diff * (value / (h * h))};
}

// Median pairwise distance scaled by 1/sqrt(2 ln(M+1)); falls back to 1.0
// for a fully collapsed cloud.
inline double median_bandwidth(const ParticleSet& ps) {
    const int M = ps.size();
    if (M < 2) throw std::invalid_argument("median bandwidth needs at least two particles");
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(M) * (M - 1) / 2);
    for (int i = 0; i < M; ++i) {
        for (int j = i + 1; j < M; ++j) {
            dists.push_back((ps.zs[static_cast<std::size_t>(i)] - ps.zs[static_cast<std::size_t>(j)]).norm());
        }
    }
    std::sort(dists.begin(), dists.end());
    const std::size_t n = dists.size();
    const double median = (n % 2 == 1) ? dists[n / 2] : 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
    if (median == 0.0) return 1.0;
    return median / std::sqrt(2.0 * std::log(static_cast<double>(M) + 1.0));
}

using ScoreFn = std::function<Vec(const Vec&)>;

// One synchronous SVGD step: every kernel value and score is taken from
// the pre-step set before any particle moves.
inline ParticleSet svgd_step(const ParticleSet& ps, const ScoreFn& score, const SvgdConfig& cfg) {
    const int M = ps.size();
    if (M == 0) throw std::invalid_argument("empty particle set");
    if (cfg.step_size <= 0.0) throw std::invalid_argument("step size must be positive");

    double h = cfg.fixed_h;
    if (cfg.bandwidth == BandwidthRule::median) h = (M >= 2) ? median_bandwidth(ps) : 1.0;
    const double h2 = h * h;

    std::vector<Vec> scores(static_cast<std::size_t>(M));
    parallel_for(static_cast<std::size_t>(M),
                 [&](std::size_t l) { scores[l] = score(ps.zs[l]); });
    for (int l = 0; l < M; ++l) {
        if (scores[static_cast<std::size_t>(l)].size() != ps.dim() ||
            !scores[static_cast<std::size_t>(l)].allFinite()) {
            throw std::runtime_error("non-finite or mis-sized score at particle " + std::to_string(l));
        }
    }

    ParticleSet out = ps;
    parallel_for(static_cast<std::size_t>(M), [&](std::size_t m) {
        Vec phi = Vec::Zero(ps.dim());
        for (int l = 0; l < M; ++l) {
            const Vec diff = ps.zs[static_cast<std::size_t>(l)] - ps.zs[m];
            const double k = std::exp(-diff.squaredNorm() / (2.0 * h2));
            // k(z_l, z_m) * score(z_l) + grad_{z_l} k(z_l, z_m)
            phi += k * scores[static_cast<std::size_t>(l)] - diff * (k / h2);
        }
        out.zs[m] += (cfg.step_size / M) * phi;
    });
    return out;
}

// score(z) = grad log p_s(z) + lambda * grad log (kde of central)(z)
inline ScoreFn fair_score(const GroupPosterior& gp, const ParticleSet& central,
                          const KdeConfig& kde_cfg, double lambda_fair) {
    if (lambda_fair != 0.0 && central.size() == 0) {
        throw std::invalid_argument("fair score needs a nonempty central set");
    }
    return [&gp, central, kde_cfg, lambda_fair](const Vec& z) {
        Vec g = grad_log_post(gp, z);
        if (lambda_fair != 0.0) g += lambda_fair * kde_score(central, z, kde_cfg);
        return g;
    };
}

}  // namespace fairbads
