#pragma once
// End-to-end orchestration: per-epoch group SVGD updates with the
// fairness score, central-distribution refresh, and metric logging.

#include "fairbads/central.hpp"
#include "fairbads/common.hpp"
#include "fairbads/config.hpp"
#include "fairbads/data.hpp"
#include "fairbads/metrics.hpp"
#include "fairbads/posterior.hpp"
#include "fairbads/svgd.hpp"

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fairbads {

class RunnerError : public std::runtime_error {
public:
    RunnerError(std::string msg, int epoch, int group, int particle)
        : std::runtime_error(std::move(msg)), epoch(epoch), group(group), particle(particle) {}

    int epoch;
    int group;
    int particle;
};

struct RunState {
    std::vector<ParticleSet> groups;
    ParticleSet central;
    int epoch = 0;
    std::vector<FairnessReport> history;

    std::vector<GroupPosterior> posteriors;
    Dataset eval_data;  // labels per eval_on_clean
    Vec lambda_weights;
    int theta_dim = 0;
    int n_bar = 0;
};

// KL(pseudo-label Bernoulli || model Bernoulli) summed over the pseudo
// meta set; replaces the meta CE term when configured.
inline double surrogate_meta_loss(const ModelParams& params, const MetaSet& pseudo) {
    if (!pseudo.soft_labels) throw std::invalid_argument("pseudo meta set has no soft labels");
    const DataSlice ms = slice_meta(pseudo);
    return bernoulli_kl_loss(params, ms.X, pseudo.soft_labels->col(1));
}

inline Vec surrogate_meta_grad(const ModelParams& params, const MetaSet& pseudo) {
    if (!pseudo.soft_labels) throw std::invalid_argument("pseudo meta set has no soft labels");
    const DataSlice ms = slice_meta(pseudo);
    Vec grad = Vec::Zero(params.theta.size());
    accumulate_kl_grad_theta(params.theta, ms.X, pseudo.soft_labels->col(1), grad);
    return grad;
}

namespace detail {

// Median-heuristic bandwidth across group->central distances, floored at
// the configured h. A fixed h that is tiny relative to the cloud gap
// underflows every kernel and silences the alignment force entirely.
inline double alignment_bandwidth(const std::vector<ParticleSet>& groups, const ParticleSet& central,
                                  const ExperimentConfig& cfg) {
    if (!cfg.adaptive_alignment_bandwidth) return cfg.h;
    std::vector<double> dists;
    for (const auto& g : groups) {
        for (const auto& z : g.zs) {
            for (const auto& c : central.zs) dists.push_back((z - c).norm());
        }
    }
    if (dists.empty()) return cfg.h;
    std::sort(dists.begin(), dists.end());
    const std::size_t n = dists.size();
    const double median = (n % 2 == 1) ? dists[n / 2] : 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
    const double adaptive = median / std::sqrt(2.0 * std::log(static_cast<double>(central.size()) + 1.0));
    return std::max(cfg.h, adaptive);
}

inline BarycenterConfig barycenter_config(const ExperimentConfig& cfg) {
    BarycenterConfig bc;
    bc.divergence = cfg.divergence;
    bc.inner_iters = cfg.k_bary;
    bc.gd_step = cfg.gd_step;
    bc.f_choice = cfg.f_choice;
    return bc;
}

inline SvgdConfig svgd_config(const ExperimentConfig& cfg) {
    SvgdConfig sc;
    sc.step_size = cfg.eps_step;
    sc.bandwidth = cfg.svgd_bandwidth;
    sc.fixed_h = cfg.svgd_fixed_h;
    sc.lambda_fair = cfg.lambda_fair;
    return sc;
}

inline std::pair<int, int> two_largest_groups(const Dataset& eval_data) {
    int first = 0, second = 1;
    const auto& sizes = eval_data.group_sizes;
    if (sizes[static_cast<std::size_t>(second)] > sizes[static_cast<std::size_t>(first)]) {
        std::swap(first, second);
    }
    for (int s = 2; s < static_cast<int>(sizes.size()); ++s) {
        if (sizes[static_cast<std::size_t>(s)] > sizes[static_cast<std::size_t>(first)]) {
            second = first;
            first = s;
        } else if (sizes[static_cast<std::size_t>(s)] > sizes[static_cast<std::size_t>(second)]) {
            second = s;
        }
    }
    return {first, second};
}

inline ParticleSet prediction_set(const RunState& state, const ExperimentConfig& cfg) {
    switch (cfg.predict_mode) {
        case PredictMode::central: return state.central;
        case PredictMode::group: {
            if (cfg.eval_group >= static_cast<int>(state.groups.size())) {
                throw ConfigError("eval_group out of range");
            }
            return state.groups[static_cast<std::size_t>(cfg.eval_group)];
        }
        case PredictMode::ensemble: break;
    }
    ParticleSet mix;
    mix.theta_dim = state.theta_dim;
    for (const auto& g : state.groups) {
        mix.zs.insert(mix.zs.end(), g.zs.begin(), g.zs.end());
    }
    return mix;
}

inline void append_snapshot(RunState& state, const ExperimentConfig& cfg) {
    const ParticleSet pred = prediction_set(state, cfg);
    const Predictor predictor = [&pred](const Vec& x) { return posterior_predict(pred, x); };
    FairnessReport rep;
    if (state.eval_data.group_count() >= 2) {
        rep = evaluate_predictor(predictor, state.eval_data);
        const auto [a, b] = two_largest_groups(state.eval_data);
        rep.w2_weights = weight_distance(state.groups[static_cast<std::size_t>(a)],
                                         state.groups[static_cast<std::size_t>(b)]);
    } else {
        // single-group runs: fairness gaps are undefined, accuracy still logged
        const int n = state.eval_data.size();
        int correct = 0;
        for (const auto& e : state.eval_data.examples) {
            correct += (predictor(e.x) >= 0.5 ? 1 : 0) == e.y;
        }
        rep.acc = static_cast<double>(correct) / n;
        rep.group_pos_rates = Vec::Zero(1);
        rep.group_tprs = Vec::Zero(1);
    }
    rep.epoch = state.epoch;
    state.history.push_back(std::move(rep));
}

}  // namespace detail

// Particle initialization: theta ~ N(0, init_theta_scale^2) i.i.d., live
// weights at logit(beta) so the prior starts exactly satisfied, padded
// slots exactly 0; central starts at the weighted per-index mean.
inline RunState init_run(const ExperimentConfig& cfg, const Dataset& ds, const MetaSet& meta) {
    validate(cfg);
    const int S = ds.group_count();
    if (S < 1) throw ConfigError("dataset has no groups");
    for (int s = 0; s < S; ++s) {
        if (ds.group_sizes[static_cast<std::size_t>(s)] == 0) {
            throw ConfigError("group " + std::to_string(s) + " has no examples");
        }
    }

    RunState state;
    state.theta_dim = ds.d + 1;
    state.n_bar = ds.n_max;
    state.lambda_weights = Vec::Constant(S, 1.0 / S);

    PriorConfig prior;
    prior.beta = cfg.beta;
    prior.prior_scale = cfg.prior_scale;
    for (int s = 0; s < S; ++s) {
        state.posteriors.push_back(make_group_posterior(ds, meta, s, prior, cfg.use_surrogate_meta));
    }

    const double w0 = logit(cfg.beta);
    const int dim = state.theta_dim + state.n_bar;
    for (int s = 0; s < S; ++s) {
        Rng rng(cfg.seed, "init_theta:" + std::to_string(s));
        ParticleSet ps;
        ps.theta_dim = state.theta_dim;
        ps.live_weights = ds.group_sizes[static_cast<std::size_t>(s)];
        for (int m = 0; m < cfg.particles; ++m) {
            Vec z = Vec::Zero(dim);
            z.head(state.theta_dim) = rng.normal_vec(state.theta_dim, cfg.init_theta_scale);
            for (int i = 0; i < ps.live_weights; ++i) z[state.theta_dim + i] = w0;
            ps.zs.push_back(std::move(z));
        }
        state.groups.push_back(std::move(ps));
    }

    state.central.theta_dim = state.theta_dim;
    state.central.live_weights = state.n_bar;
    for (int m = 0; m < cfg.particles; ++m) {
        Vec z = Vec::Zero(dim);
        for (int s = 0; s < S; ++s) {
            z += state.lambda_weights[s] * state.groups[static_cast<std::size_t>(s)].zs[static_cast<std::size_t>(m)];
        }
        state.central.zs.push_back(std::move(z));
    }

    state.eval_data = ds;
    if (cfg.eval_on_clean) {
        for (auto& e : state.eval_data.examples) e.y = e.y_clean;
    }

    detail::append_snapshot(state, cfg);
    return state;
}

// One epoch: per-group SVGD with the fairness score against the previous
// central snapshot, then the central refresh, then a metric snapshot.
inline void train_epoch(RunState& state, const ExperimentConfig& cfg) {
    const int S = static_cast<int>(state.groups.size());
    const double lambda = cfg.effective_lambda(state.epoch);
    const SvgdConfig svgd_cfg = detail::svgd_config(cfg);
    KdeConfig score_kde{cfg.h, cfg.eps_stab};
    if (lambda != 0.0) {
        score_kde.bandwidth = detail::alignment_bandwidth(state.groups, state.central, cfg);
    }

    for (int s = 0; s < S; ++s) {
        auto& ps = state.groups[static_cast<std::size_t>(s)];
        const ScoreFn score =
            fair_score(state.posteriors[static_cast<std::size_t>(s)], state.central, score_kde, lambda);
        for (int t = 0; t < cfg.t_inner; ++t) ps = svgd_step(ps, score, svgd_cfg);
        for (int m = 0; m < ps.size(); ++m) {
            if (!ps.zs[static_cast<std::size_t>(m)].allFinite()) {
                throw RunnerError("non-finite particle at epoch " + std::to_string(state.epoch) +
                                      ", group " + std::to_string(s) + ", particle " + std::to_string(m),
                                  state.epoch, s, m);
            }
        }
    }

    const BarycenterConfig bc = detail::barycenter_config(cfg);
    KdeConfig bary_kde{cfg.h, cfg.eps_stab};
    if (cfg.divergence != Divergence::wasserstein) {
        bary_kde.bandwidth = detail::alignment_bandwidth(state.groups, state.central, cfg);
    }
    switch (cfg.divergence) {
        case Divergence::wasserstein:
            state.central = wasserstein_barycenter_update(state.groups, state.central, bc);
            break;
        case Divergence::mmd:
            state.central = mmd_barycenter_update(state.groups, state.central, bc, bary_kde);
            break;
        case Divergence::fdiv:
            state.central = fdiv_barycenter_update(state.groups, state.central, bc, bary_kde);
            break;
    }

    ++state.epoch;
    detail::append_snapshot(state, cfg);
}

inline RunState run_experiment(const ExperimentConfig& cfg, const Dataset& ds, const MetaSet& meta) {
    RunState state = init_run(cfg, ds, meta);
    for (int t = 0; t < cfg.epochs; ++t) train_epoch(state, cfg);
    return state;
}

// Full pipeline from a raw dataset: corrupt, carve the meta set, run.
inline RunState run_pipeline(const ExperimentConfig& cfg, const Dataset& raw) {
    Dataset ds = raw;
    if (cfg.bias_amount > 0.0) {
        ds = inject_label_bias(ds, cfg.bias_amount, cfg.target_group, cfg.seed, cfg.flip_symmetric);
    }
    auto [train, meta] = carve_meta(ds, cfg.meta_fraction, cfg.seed);
    return run_experiment(cfg, train, meta);
}

}  // namespace fairbads
