#pragma once
// Central-distribution computation for the three divergences (Wasserstein,
// MMD, f-divergence), KDE density/score of a particle cloud, and the
// zero-padding embedding that makes groups of unequal size comparable.

#include "fairbads/assignment.hpp"
#include "fairbads/common.hpp"
#include "fairbads/particles.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairbads {

enum class Divergence { wasserstein, mmd, fdiv };

enum class FChoice { kl, reverse_kl, js };

inline std::string to_string(Divergence d) {
    switch (d) {
        case Divergence::wasserstein: return "w2";
        case Divergence::mmd: return "mmd";
        case Divergence::fdiv: return "fdiv";
    }
    return "?";
}

struct BarycenterConfig {
    Divergence divergence = Divergence::wasserstein;
    Vec group_weights;       // empty = uniform 1/S
    int inner_iters = 1;     // fixed-point sweeps or gradient steps per call
    double gd_step = 1.0;    // initial step for mmd/fdiv descent
    FChoice f_choice = FChoice::js;
};

struct KdeConfig {
    double bandwidth = 0.1;
    double stability = 1e-3;
};

struct TransportPlan {
    Mat T;           // M x M coupling, uniform marginals 1/M
    Mat cost;        // squared euclidean costs
    double objective = 0.0;  // <cost, T>_F = squared W2
};

namespace detail {

inline double sq_dist(const Vec& a, const Vec& b) { return (a - b).squaredNorm(); }

inline double gauss_kernel(double sq_dist, double h) {
    return std::exp(-sq_dist / (2.0 * h * h));
}

inline Vec resolve_weights(const BarycenterConfig& cfg, int S) {
    if (cfg.group_weights.size() == 0) return Vec::Constant(S, 1.0 / S);
    if (cfg.group_weights.size() != S) throw std::invalid_argument("group weight count mismatch");
    if (std::abs(cfg.group_weights.sum() - 1.0) > 1e-9) {
        throw std::invalid_argument("group weights must sum to 1");
    }
    for (int s = 0; s < S; ++s) {
        if (cfg.group_weights[s] <= 0.0 || cfg.group_weights[s] > 1.0) {
            throw std::invalid_argument("group weights must lie in (0, 1]");
        }
    }
    return cfg.group_weights;
}

inline void check_kde(const KdeConfig& kde) {
    if (kde.bandwidth <= 0.0) throw std::invalid_argument("bandwidth must be positive");
    if (kde.stability <= 0.0) throw std::invalid_argument("stability constant must be positive");
}

// The exact Gaussian-KDE ratio is strictly positive; a zero can only be
// floating-point underflow of the numerator, so the estimators floor the
// ratio at the smallest normal double instead of failing.
inline double floor_ratio(double t) {
    return t < std::numeric_limits<double>::min() ? std::numeric_limits<double>::min() : t;
}

inline double f_value(FChoice f, double t) {
    if (t <= 0.0) throw std::domain_error("density ratio must be positive");
    switch (f) {
        case FChoice::kl: return t * std::log(t);
        case FChoice::reverse_kl: return -std::log(t);
        case FChoice::js: return t * std::log(2.0 * t / (t + 1.0)) + std::log(2.0 / (t + 1.0));
    }
    return 0.0;
}

inline double f_deriv(FChoice f, double t) {
    if (t <= 0.0) throw std::domain_error("density ratio must be positive");
    switch (f) {
        case FChoice::kl: return std::log(t) + 1.0;
        case FChoice::reverse_kl: return -1.0 / t;
        case FChoice::js: return std::log(2.0 * t / (t + 1.0));
    }
    return 0.0;
}

}  // namespace detail

// Exact optimal transport between two equally weighted particle sets.
// With uniform marginals the optimum is a permutation scaled by 1/M.
inline TransportPlan solve_ot(const ParticleSet& source, const ParticleSet& target) {
    check_same_shape(source, target);
    const int M = source.size();
    if (M == 0) throw std::invalid_argument("empty particle set");

    TransportPlan plan;
    plan.cost.resize(M, M);
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j < M; ++j) {
            plan.cost(i, j) = detail::sq_dist(source.zs[static_cast<std::size_t>(i)],
                                              target.zs[static_cast<std::size_t>(j)]);
        }
    }
    const AssignmentResult assign = solve_assignment(plan.cost);
    plan.T = Mat::Zero(M, M);
    for (int i = 0; i < M; ++i) plan.T(i, assign.row_to_col[static_cast<std::size_t>(i)]) = 1.0 / M;
    plan.objective = assign.cost / M;
    return plan;
}

inline double wasserstein_sq(const ParticleSet& a, const ParticleSet& b) {
    return solve_ot(a, b).objective;
}

// One or more fixed-point sweeps: re-solve transport plans against the
// current central cloud, then place each central particle at the
// lambda-weighted mean of its matched group particles.
inline ParticleSet wasserstein_barycenter_update(const std::vector<ParticleSet>& groups,
                                                 const ParticleSet& current,
                                                 const BarycenterConfig& cfg) {
    const int S = static_cast<int>(groups.size());
    if (S == 0) throw std::invalid_argument("no groups");
    const Vec lambda = detail::resolve_weights(cfg, S);
    const int M = current.size();

    ParticleSet central = current;
    for (int iter = 0; iter < std::max(1, cfg.inner_iters); ++iter) {
        std::vector<Vec> next(static_cast<std::size_t>(M),
                              Vec::Zero(current.dim()));
        for (int s = 0; s < S; ++s) {
            const TransportPlan plan = solve_ot(groups[static_cast<std::size_t>(s)], central);
            for (int i = 0; i < M; ++i) {
                for (int j = 0; j < M; ++j) {
                    if (plan.T(i, j) > 0.0) {
                        next[static_cast<std::size_t>(j)] +=
                            lambda[s] * groups[static_cast<std::size_t>(s)].zs[static_cast<std::size_t>(i)];
                    }
                }
            }
        }
        central.zs = std::move(next);
    }
    return central;
}

// Squared maximum mean discrepancy with the (unnormalized) Gaussian kernel.
inline double mmd_sq(const ParticleSet& a, const ParticleSet& b, const KdeConfig& kde) {
    if (a.dim() != b.dim()) throw std::invalid_argument("particle sets differ in dimension");
    detail::check_kde(kde);
    const double h = kde.bandwidth;
    const int Ma = a.size();
    const int Mb = b.size();
    double kaa = 0.0, kbb = 0.0, kab = 0.0;
    for (int i = 0; i < Ma; ++i) {
        for (int j = 0; j < Ma; ++j) {
            kaa += detail::gauss_kernel(detail::sq_dist(a.zs[static_cast<std::size_t>(i)],
                                                        a.zs[static_cast<std::size_t>(j)]), h);
        }
    }
    for (int i = 0; i < Mb; ++i) {
        for (int j = 0; j < Mb; ++j) {
            kbb += detail::gauss_kernel(detail::sq_dist(b.zs[static_cast<std::size_t>(i)],
                                                        b.zs[static_cast<std::size_t>(j)]), h);
        }
    }
    for (int i = 0; i < Ma; ++i) {
        for (int j = 0; j < Mb; ++j) {
            kab += detail::gauss_kernel(detail::sq_dist(a.zs[static_cast<std::size_t>(i)],
                                                        b.zs[static_cast<std::size_t>(j)]), h);
        }
    }
    const double value = kaa / (static_cast<double>(Ma) * Ma) + kbb / (static_cast<double>(Mb) * Mb) -
                         2.0 * kab / (static_cast<double>(Ma) * Mb);
    return value < 0.0 ? 0.0 : value;
}

// KDE with the unnormalized Gaussian kernel; the constant cancels in the
// density ratios this estimator feeds, so values are comparable only
// within one bandwidth.
inline double kde_density(const ParticleSet& ps, const Vec& z, const KdeConfig& kde) {
    detail::check_kde(kde);
    if (ps.size() == 0) throw std::invalid_argument("empty particle set");
    if (ps.dim() != z.size()) throw std::invalid_argument("dimension mismatch");
    double sum = 0.0;
    for (const auto& zi : ps.zs) sum += detail::gauss_kernel(detail::sq_dist(z, zi), kde.bandwidth);
    return sum / ps.size();
}

// grad_z log(kde_density(z) + stability)
inline Vec kde_score(const ParticleSet& ps, const Vec& z, const KdeConfig& kde) {
    detail::check_kde(kde);
    if (ps.size() == 0) throw std::invalid_argument("empty particle set");
    if (ps.dim() != z.size()) throw std::invalid_argument("dimension mismatch");
    const double h2 = kde.bandwidth * kde.bandwidth;
    Vec num = Vec::Zero(z.size());
    double den = ps.size() * kde.stability;
    for (const auto& zi : ps.zs) {
        const double k = detail::gauss_kernel(detail::sq_dist(z, zi), kde.bandwidth);
        num += (zi - z) * (k / h2);
        den += k;
    }
    return num / den;
}

// KDE estimator of D_f(a || b): average of f(density ratio) at b's
// particles, with a's KDE in the numerator.
inline double f_divergence(const ParticleSet& a, const ParticleSet& b, const BarycenterConfig& cfg,
                           const KdeConfig& kde) {
    if (a.dim() != b.dim()) throw std::invalid_argument("particle sets differ in dimension");
    detail::check_kde(kde);
    double sum = 0.0;
    for (const auto& zj : b.zs) {
        const double pa = kde_density(a, zj, kde);
        const double pb = kde_density(b, zj, kde);
        sum += detail::f_value(cfg.f_choice, detail::floor_ratio(pa / (pb + kde.stability)));
    }
    return sum / b.size();
}

// lambda-weighted sum of divergences from the central cloud to each group.
inline double barycenter_objective(const std::vector<ParticleSet>& groups, const ParticleSet& central,
                                   const BarycenterConfig& cfg, const KdeConfig& kde) {
    const int S = static_cast<int>(groups.size());
    const Vec lambda = detail::resolve_weights(cfg, S);
    double obj = 0.0;
    for (int s = 0; s < S; ++s) {
        const auto& g = groups[static_cast<std::size_t>(s)];
        switch (cfg.divergence) {
            case Divergence::wasserstein: obj += lambda[s] * wasserstein_sq(g, central); break;
            case Divergence::mmd: obj += lambda[s] * mmd_sq(central, g, kde); break;
            case Divergence::fdiv: obj += lambda[s] * f_divergence(central, g, cfg, kde); break;
        }
    }
    return obj;
}

namespace detail {

// grad of sum_s lambda_s mmd_sq(central, group_s) w.r.t. central particles
inline std::vector<Vec> mmd_objective_grad(const std::vector<ParticleSet>& groups,
                                           const ParticleSet& central, const Vec& lambda,
                                           const KdeConfig& kde) {
    const int M = central.size();
    const double h2 = kde.bandwidth * kde.bandwidth;
    std::vector<Vec> grad(static_cast<std::size_t>(M), Vec::Zero(central.dim()));
    for (std::size_t s = 0; s < groups.size(); ++s) {
        const auto& g = groups[s];
        const double Mg = g.size();
        for (int m = 0; m < M; ++m) {
            Vec acc = Vec::Zero(central.dim());
            for (int j = 0; j < M; ++j) {
                const Vec diff = central.zs[static_cast<std::size_t>(m)] - central.zs[static_cast<std::size_t>(j)];
                acc += (2.0 / (static_cast<double>(M) * M)) *
                       (-diff / h2 * gauss_kernel(diff.squaredNorm(), kde.bandwidth));
            }
            for (int j = 0; j < g.size(); ++j) {
                const Vec diff = central.zs[static_cast<std::size_t>(m)] - g.zs[static_cast<std::size_t>(j)];
                acc -= (2.0 / (static_cast<double>(M) * Mg)) *
                       (-diff / h2 * gauss_kernel(diff.squaredNorm(), kde.bandwidth));
            }
            grad[static_cast<std::size_t>(m)] += lambda[static_cast<Eigen::Index>(s)] * acc;
        }
    }
    return grad;
}

// grad of sum_s lambda_s f_divergence(central, group_s) w.r.t. central particles
inline std::vector<Vec> fdiv_objective_grad(const std::vector<ParticleSet>& groups,
                                            const ParticleSet& central, const Vec& lambda,
                                            const BarycenterConfig& cfg, const KdeConfig& kde) {
    const int M = central.size();
    const double h2 = kde.bandwidth * kde.bandwidth;
    std::vector<Vec> grad(static_cast<std::size_t>(M), Vec::Zero(central.dim()));
    for (std::size_t s = 0; s < groups.size(); ++s) {
        const auto& g = groups[s];
        for (int j = 0; j < g.size(); ++j) {
            const Vec& xj = g.zs[static_cast<std::size_t>(j)];
            const double pa = kde_density(central, xj, kde);
            const double pb = kde_density(g, xj, kde) + kde.stability;
            const double fp = f_deriv(cfg.f_choice, floor_ratio(pa / pb));
            const double scale = lambda[static_cast<Eigen::Index>(s)] * fp /
                                 (static_cast<double>(g.size()) * pb * M);
            for (int i = 0; i < M; ++i) {
                const Vec diff = xj - central.zs[static_cast<std::size_t>(i)];
                grad[static_cast<std::size_t>(i)] +=
                    scale * (diff / h2 * gauss_kernel(diff.squaredNorm(), kde.bandwidth));
            }
        }
    }
    return grad;
}

// Gradient descent with backtracking halving (max 20) so the objective is
// nonincreasing across accepted steps.
template <typename GradFn>
ParticleSet descend_barycenter(const std::vector<ParticleSet>& groups, const ParticleSet& current,
                               const BarycenterConfig& cfg, const KdeConfig& kde, GradFn grad_fn) {
    ParticleSet central = current;
    double obj = barycenter_objective(groups, central, cfg, kde);
    for (int iter = 0; iter < std::max(1, cfg.inner_iters); ++iter) {
        const std::vector<Vec> grad = grad_fn(central);
        for (const auto& gvec : grad) {
            if (!gvec.allFinite()) throw std::runtime_error("non-finite barycenter gradient");
        }
        double step = cfg.gd_step;
        bool accepted = false;
        for (int halving = 0; halving <= 20; ++halving) {
            ParticleSet candidate = central;
            for (int m = 0; m < central.size(); ++m) {
                candidate.zs[static_cast<std::size_t>(m)] -= step * grad[static_cast<std::size_t>(m)];
            }
            const double cand_obj = barycenter_objective(groups, candidate, cfg, kde);
            if (cand_obj <= obj) {
                central = std::move(candidate);
                obj = cand_obj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // stationary at this resolution
    }
    return central;
}

}  // namespace detail

inline ParticleSet mmd_barycenter_update(const std::vector<ParticleSet>& groups,
                                         const ParticleSet& current, const BarycenterConfig& cfg,
                                         const KdeConfig& kde) {
    if (groups.empty()) throw std::invalid_argument("no groups");
    const Vec lambda = detail::resolve_weights(cfg, static_cast<int>(groups.size()));
    return detail::descend_barycenter(groups, current, cfg, kde, [&](const ParticleSet& c) {
        return detail::mmd_objective_grad(groups, c, lambda, kde);
    });
}

inline ParticleSet fdiv_barycenter_update(const std::vector<ParticleSet>& groups,
                                          const ParticleSet& current, const BarycenterConfig& cfg,
                                          const KdeConfig& kde) {
    if (groups.empty()) throw std::invalid_argument("no groups");
    const Vec lambda = detail::resolve_weights(cfg, static_cast<int>(groups.size()));
    return detail::descend_barycenter(groups, current, cfg, kde, [&](const ParticleSet& c) {
        return detail::fdiv_objective_grad(groups, c, lambda, cfg, kde);
    });
}

// Zero-extends the weight block of every particle to length n_max.
inline ParticleSet pad_particles(const ParticleSet& raw, int n_max) {
    const int weight_len = static_cast<int>(raw.dim()) - raw.theta_dim;
    if (weight_len > n_max) throw std::invalid_argument("weight block longer than padding target");
    ParticleSet out = raw;
    if (weight_len == n_max) return out;
    const Eigen::Index new_dim = raw.theta_dim + n_max;
    for (auto& z : out.zs) {
        Vec padded = Vec::Zero(new_dim);
        padded.head(z.size()) = z;
        z = std::move(padded);
    }
    return out;
}

}  // namespace fairbads
