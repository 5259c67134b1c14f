#pragma once
// Executable checkers for the discrepancy transfer bound, the group
// disparity bound, and the padding-invariance proposition, plus the
// randomized suites behind the `check` command.

#include "fairbads/central.hpp"
#include "fairbads/common.hpp"
#include "fairbads/particles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairbads {

enum class BoundStatus { pass, fail, not_checkable };

inline std::string to_string(BoundStatus s) {
    switch (s) {
        case BoundStatus::pass: return "pass";
        case BoundStatus::fail: return "fail";
        case BoundStatus::not_checkable: return "not_checkable";
    }
    return "?";
}

struct BoundReport {
    std::string name;        // transfer | disparity
    std::string divergence;  // w2 | mmd | fdiv_kl | fdiv_js
    BoundStatus status = BoundStatus::not_checkable;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    std::vector<double> constants;  // per-group C_s
    double c_f = 0.0;
    double k_eff = 0.0;
    std::string detail;
};

// Loss expressed as a finite kernel expansion; the only form whose RKHS
// norm is computable, so the only form the MMD bound accepts.
struct KernelExpansion {
    std::vector<Vec> centers;
    Vec coeffs;
    double bandwidth = 1.0;

    double eval(const Vec& z) const {
        double v = 0.0;
        for (std::size_t i = 0; i < centers.size(); ++i) {
            v += coeffs[static_cast<Eigen::Index>(i)] *
                 detail::gauss_kernel((z - centers[i]).squaredNorm(), bandwidth);
        }
        return v;
    }

    double rkhs_norm() const {
        const auto n = static_cast<Eigen::Index>(centers.size());
        double q = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                q += coeffs[i] * coeffs[j] *
                     detail::gauss_kernel((centers[static_cast<std::size_t>(i)] -
                                           centers[static_cast<std::size_t>(j)]).squaredNorm(),
                                          bandwidth);
            }
        }
        return std::sqrt(std::max(q, 0.0));
    }
};

struct GroupLoss {
    std::function<double(const Vec&)> fn;
    std::optional<KernelExpansion> expansion;
};

inline double expectation(const std::function<double(const Vec&)>& fn, const ParticleSet& ps) {
    if (ps.size() == 0) throw std::invalid_argument("empty particle set");
    double sum = 0.0;
    for (const auto& z : ps.zs) sum += fn(z);
    return sum / ps.size();
}

// Max pairwise slope |L(z) - L(z')| / ||z - z'|| over every pair of support
// points; a lower bound on the true Lipschitz constant.
inline double empirical_lipschitz(const std::function<double(const Vec&)>& loss,
                                  const std::vector<ParticleSet>& supports) {
    std::vector<const Vec*> points;
    for (const auto& ps : supports) {
        for (const auto& z : ps.zs) points.push_back(&z);
    }
    if (points.size() < 2) throw std::invalid_argument("need at least two support points");
    std::vector<double> values(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) values[i] = loss(*points[i]);
    double best = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            const double dist = (*points[i] - *points[j]).norm();
            if (dist == 0.0) continue;
            best = std::max(best, std::abs(values[i] - values[j]) / dist);
        }
    }
    if (best < 0.0) throw std::invalid_argument("all support points identical");
    return best;
}

namespace detail {

struct BoundTerms {
    bool checkable = true;
    std::string why;
    std::vector<double> constants;  // C_s
    std::vector<double> dvals;      // the matching divergence factor per group
    double c_f = 0.0;
};

// C_s and the divergence factor so that C_s * dvals[s] bounds
// |E_{p_s} L_s - E_{central} L_s|.
inline BoundTerms bound_terms(const std::vector<ParticleSet>& groups, const ParticleSet& central,
                              const std::vector<GroupLoss>& losses, const BarycenterConfig& cfg,
                              const KdeConfig& kde) {
    const int S = static_cast<int>(groups.size());
    BoundTerms t;
    std::vector<ParticleSet> supports = groups;
    supports.push_back(central);
    switch (cfg.divergence) {
        case Divergence::wasserstein:
            for (int s = 0; s < S; ++s) {
                t.constants.push_back(empirical_lipschitz(losses[static_cast<std::size_t>(s)].fn, supports));
                t.dvals.push_back(std::sqrt(wasserstein_sq(groups[static_cast<std::size_t>(s)], central)));
            }
            break;
        case Divergence::mmd:
            for (int s = 0; s < S; ++s) {
                const auto& exp = losses[static_cast<std::size_t>(s)].expansion;
                if (!exp) {
                    t.checkable = false;
                    t.why = "mmd bound needs losses with a known RKHS norm";
                    return t;
                }
                const KdeConfig kexp{exp->bandwidth, kde.stability};
                t.constants.push_back(exp->rkhs_norm());
                t.dvals.push_back(std::sqrt(mmd_sq(groups[static_cast<std::size_t>(s)], central, kexp)));
            }
            break;
        case Divergence::fdiv: {
            if (cfg.f_choice == FChoice::kl) {
                t.c_f = 1.0;
            } else if (cfg.f_choice == FChoice::js) {
                t.c_f = 2.0;
            } else {
                t.checkable = false;
                t.why = "no Pinsker-type constant for this f";
                return t;
            }
            for (int s = 0; s < S; ++s) {
                double b = 0.0;
                for (const auto& ps : supports) {
                    for (const auto& z : ps.zs) {
                        b = std::max(b, std::abs(losses[static_cast<std::size_t>(s)].fn(z)));
                    }
                }
                const double df =
                    std::max(0.0, f_divergence(groups[static_cast<std::size_t>(s)], central, cfg, kde));
                t.constants.push_back(b);
                t.dvals.push_back(std::sqrt(2.0 * t.c_f * df));
            }
            break;
        }
    }
    return t;
}

inline std::string divergence_tag(const BarycenterConfig& cfg) {
    if (cfg.divergence != Divergence::fdiv) return to_string(cfg.divergence);
    switch (cfg.f_choice) {
        case FChoice::kl: return "fdiv_kl";
        case FChoice::js: return "fdiv_js";
        case FChoice::reverse_kl: return "fdiv_rkl";
    }
    return "fdiv";
}

}  // namespace detail

// |R(central) - weighted avg group risk| <= sum_s lambda_s C_s D_s
inline BoundReport check_transfer_bound(const std::vector<ParticleSet>& groups,
                                        const ParticleSet& central,
                                        const std::vector<GroupLoss>& losses,
                                        const BarycenterConfig& cfg, const KdeConfig& kde) {
    const int S = static_cast<int>(groups.size());
    if (static_cast<int>(losses.size()) != S) throw std::invalid_argument("one loss per group required");
    const Vec lambda = detail::resolve_weights(cfg, S);

    BoundReport rep;
    rep.name = "transfer";
    rep.divergence = detail::divergence_tag(cfg);

    const auto terms = detail::bound_terms(groups, central, losses, cfg, kde);
    if (!terms.checkable) {
        rep.status = BoundStatus::not_checkable;
        rep.detail = terms.why;
        return rep;
    }
    rep.constants = terms.constants;
    rep.c_f = terms.c_f;

    double lhs = 0.0;
    double rhs = 0.0;
    for (int s = 0; s < S; ++s) {
        const auto& L = losses[static_cast<std::size_t>(s)].fn;
        lhs += lambda[s] * (expectation(L, central) - expectation(L, groups[static_cast<std::size_t>(s)]));
        rhs += lambda[s] * terms.constants[static_cast<std::size_t>(s)] *
               terms.dvals[static_cast<std::size_t>(s)];
    }
    rep.lhs = std::abs(lhs);
    rep.rhs = rhs;
    rep.slack = rep.rhs - rep.lhs;
    rep.status = rep.slack >= -1e-9 ? BoundStatus::pass : BoundStatus::fail;
    return rep;
}

// max cross-group risk gap <= 2 C_max max_s D_s + K_eff
inline BoundReport check_disparity_bound(const std::vector<ParticleSet>& groups,
                                         const ParticleSet& central,
                                         const std::vector<GroupLoss>& losses,
                                         const BarycenterConfig& cfg, const KdeConfig& kde) {
    const int S = static_cast<int>(groups.size());
    if (S < 2) throw std::invalid_argument("disparity bound needs at least two groups");
    if (static_cast<int>(losses.size()) != S) throw std::invalid_argument("one loss per group required");

    BoundReport rep;
    rep.name = "disparity";
    rep.divergence = detail::divergence_tag(cfg);

    const auto terms = detail::bound_terms(groups, central, losses, cfg, kde);
    if (!terms.checkable) {
        rep.status = BoundStatus::not_checkable;
        rep.detail = terms.why;
        return rep;
    }
    rep.constants = terms.constants;
    rep.c_f = terms.c_f;

    std::vector<double> risks;
    for (int s = 0; s < S; ++s) {
        risks.push_back(expectation(losses[static_cast<std::size_t>(s)].fn,
                                    groups[static_cast<std::size_t>(s)]));
    }
    rep.lhs = *std::max_element(risks.begin(), risks.end()) -
              *std::min_element(risks.begin(), risks.end());

    double k_eff = 0.0;
    for (const auto& z : central.zs) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (int s = 0; s < S; ++s) {
            const double v = losses[static_cast<std::size_t>(s)].fn(z);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        k_eff = std::max(k_eff, hi - lo);
    }
    rep.k_eff = k_eff;

    const double c_max = *std::max_element(terms.constants.begin(), terms.constants.end());
    const double d_max = *std::max_element(terms.dvals.begin(), terms.dvals.end());
    rep.rhs = 2.0 * c_max * d_max + k_eff;
    rep.slack = rep.rhs - rep.lhs;
    rep.status = rep.slack >= -1e-9 ? BoundStatus::pass : BoundStatus::fail;
    return rep;
}

struct PaddingReport {
    double w2_delta = 0.0;
    double mmd_delta = 0.0;
    double fdiv_delta = 0.0;  // max over kl / reverse-kl / js
    bool pass = false;
};

// Padding both clouds with common zeros must leave every divergence
// unchanged (exactly for W2/MMD, to estimator precision for f-div).
inline PaddingReport check_padding_invariance(const ParticleSet& raw_a, const ParticleSet& raw_b,
                                              int n_max, const KdeConfig& kde) {
    const int wa = static_cast<int>(raw_a.dim()) - raw_a.theta_dim;
    const int wb = static_cast<int>(raw_b.dim()) - raw_b.theta_dim;
    const int base = std::max(wa, wb);
    if (n_max < base) throw std::invalid_argument("padding target below native weight lengths");

    const ParticleSet a1 = pad_particles(raw_a, base);
    const ParticleSet b1 = pad_particles(raw_b, base);
    const ParticleSet a2 = pad_particles(raw_a, n_max);
    const ParticleSet b2 = pad_particles(raw_b, n_max);

    PaddingReport rep;
    rep.w2_delta = std::abs(wasserstein_sq(a1, b1) - wasserstein_sq(a2, b2));
    rep.mmd_delta = std::abs(mmd_sq(a1, b1, kde) - mmd_sq(a2, b2, kde));
    for (const FChoice f : {FChoice::kl, FChoice::reverse_kl, FChoice::js}) {
        BarycenterConfig cfg;
        cfg.divergence = Divergence::fdiv;
        cfg.f_choice = f;
        rep.fdiv_delta = std::max(rep.fdiv_delta,
                                  std::abs(f_divergence(a1, b1, cfg, kde) - f_divergence(a2, b2, cfg, kde)));
    }
    rep.pass = rep.w2_delta <= 1e-12 && rep.mmd_delta <= 1e-12 && rep.fdiv_delta <= 1e-9;
    return rep;
}

struct SuiteResult {
    int pass = 0;
    int fail = 0;
    std::vector<BoundReport> failures;
};

namespace detail {

inline ParticleSet random_cloud(Rng& rng, int m, int dim, double center_scale, double spread) {
    ParticleSet ps;
    const Vec center = rng.normal_vec(dim, center_scale);
    for (int i = 0; i < m; ++i) ps.zs.push_back(center + rng.normal_vec(dim, spread));
    return ps;
}

}  // namespace detail

// Randomized transfer + disparity checks: the W2 case with affine losses
// and empirical Lipschitz constants, and the JS case with bounded losses.
inline SuiteResult run_bounds_suite(int trials, std::uint64_t seed) {
    SuiteResult result;
    Rng rng(seed, "bounds_suite");
    for (int t = 0; t < trials; ++t) {
        const int S = 2 + static_cast<int>(rng.below(2));
        const int M = 3 + static_cast<int>(rng.below(8));
        const int dim = 1 + static_cast<int>(rng.below(4));

        std::vector<ParticleSet> groups;
        for (int s = 0; s < S; ++s) groups.push_back(detail::random_cloud(rng, M, dim, 1.0, 0.5));
        const ParticleSet central = detail::random_cloud(rng, M, dim, 1.0, 0.5);

        std::vector<GroupLoss> affine;
        std::vector<GroupLoss> bounded;
        for (int s = 0; s < S; ++s) {
            const Vec a = rng.normal_vec(dim);
            const double c = rng.normal();
            affine.push_back({[a, c](const Vec& z) { return a.dot(z) + c; }, std::nullopt});
            const Vec slope = rng.normal_vec(dim, 2.0);
            const double shift = rng.normal();
            const double scale = rng.uniform(0.5, 2.0);
            bounded.push_back(
                {[slope, shift, scale](const Vec& z) { return scale * sigmoid(slope.dot(z) + shift); },
                 std::nullopt});
        }

        BarycenterConfig w2_cfg;
        w2_cfg.divergence = Divergence::wasserstein;
        BarycenterConfig js_cfg;
        js_cfg.divergence = Divergence::fdiv;
        js_cfg.f_choice = FChoice::js;
        const KdeConfig kde{0.1, 1e-3};

        for (const BoundReport& rep : {check_transfer_bound(groups, central, affine, w2_cfg, kde),
                                       check_disparity_bound(groups, central, affine, w2_cfg, kde),
                                       check_transfer_bound(groups, central, bounded, js_cfg, kde),
                                       check_disparity_bound(groups, central, bounded, js_cfg, kde)}) {
            if (rep.status == BoundStatus::pass) {
                ++result.pass;
            } else {
                ++result.fail;
                result.failures.push_back(rep);
            }
        }
    }
    return result;
}

inline SuiteResult run_padding_suite(int trials, std::uint64_t seed) {
    SuiteResult result;
    Rng rng(seed, "padding_suite");
    for (int t = 0; t < trials; ++t) {
        const int M = 2 + static_cast<int>(rng.below(5));
        const int theta_dim = static_cast<int>(rng.below(4));
        const int w_len = 1 + static_cast<int>(rng.below(5));
        const int n_max = w_len + 1 + static_cast<int>(rng.below(4));

        ParticleSet a = detail::random_cloud(rng, M, theta_dim + w_len, 0.5, 0.6);
        ParticleSet b = detail::random_cloud(rng, M, theta_dim + w_len, 0.5, 0.6);
        a.theta_dim = theta_dim;
        b.theta_dim = theta_dim;

        const PaddingReport rep = check_padding_invariance(a, b, n_max, KdeConfig{0.5, 1e-3});
        if (rep.pass) {
            ++result.pass;
        } else {
            ++result.fail;
            BoundReport br;
            br.name = "padding";
            br.detail = "w2 " + std::to_string(rep.w2_delta) + " mmd " + std::to_string(rep.mmd_delta) +
                        " fdiv " + std::to_string(rep.fdiv_delta);
            br.status = BoundStatus::fail;
            result.failures.push_back(br);
        }
    }
    return result;
}

}  // namespace fairbads
