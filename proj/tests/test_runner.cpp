#include "fairbads/runner.hpp"

#include "support/oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace fairbads;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.particles = 4;
    cfg.epochs = 3;
    cfg.eps_step = 0.05;
    cfg.meta_fraction = 0.05;
    cfg.seed = 7;
    return cfg;
}

Dataset small_data(std::uint64_t seed, int n = 120) {
    oracle::SyntheticSpec spec;
    spec.n = n;
    spec.d = 2;
    return oracle::make_synthetic(seed, spec);
}

}  // namespace

TEST_CASE("init_run draws seeded particles with the prior satisfied", "[runner]") {
    const Dataset raw = small_data(1);
    auto [train, meta] = carve_meta(raw, 0.05, 7);
    ExperimentConfig cfg = small_config();

    const RunState state = init_run(cfg, train, meta);
    REQUIRE(state.groups.size() == 2);
    REQUIRE(state.central.size() == cfg.particles);
    REQUIRE(state.epoch == 0);
    REQUIRE(state.history.size() == 1);
    REQUIRE(state.history[0].epoch == 0);

    const int P = train.d + 1;
    for (int s = 0; s < 2; ++s) {
        const auto& ps = state.groups[static_cast<std::size_t>(s)];
        REQUIRE(ps.size() == cfg.particles);
        REQUIRE(ps.dim() == P + train.n_max);
        const int n_live = train.group_sizes[static_cast<std::size_t>(s)];
        for (const auto& z : ps.zs) {
            double sum_sigma = 0.0;
            for (int i = 0; i < n_live; ++i) sum_sigma += sigmoid(z[P + i]);
            REQUIRE(std::abs(sum_sigma - cfg.beta * n_live) < 1e-9);
            for (int i = n_live; i < train.n_max; ++i) REQUIRE(z[P + i] == 0.0);
        }
    }

    ExperimentConfig cfg2 = cfg;
    cfg2.seed = 8;
    const RunState other = init_run(cfg2, train, meta);
    REQUIRE((other.groups[0].zs[0].head(P) - state.groups[0].zs[0].head(P)).norm() > 0.0);
    REQUIRE(other.groups[0].dim() == state.groups[0].dim());
}

TEST_CASE("baseline single-group run is plain svgd on the posterior", "[runner]") {
    // one group: keep only group-0 rows, relabel sizes
    Dataset raw = small_data(2, 80);
    Dataset solo;
    solo.d = raw.d;
    for (const auto& e : raw.examples) {
        if (e.s == 0) solo.examples.push_back(e);
    }
    solo.recount_groups();
    auto [train, meta] = carve_meta(solo, 0.05, 3);

    ExperimentConfig cfg = small_config();
    cfg.baseline = true;
    cfg.epochs = 4;

    RunState state = init_run(cfg, train, meta);
    ParticleSet manual = state.groups[0];
    const GroupPosterior gp = make_group_posterior(train, meta, 0, PriorConfig{cfg.beta, cfg.prior_scale});
    SvgdConfig svgd_cfg;
    svgd_cfg.step_size = cfg.eps_step;

    for (int t = 0; t < cfg.epochs; ++t) {
        train_epoch(state, cfg);
        manual = svgd_step(manual, [&](const Vec& z) { return grad_log_post(gp, z); }, svgd_cfg);
        for (int m = 0; m < manual.size(); ++m) {
            REQUIRE((state.groups[0].zs[static_cast<std::size_t>(m)] -
                     manual.zs[static_cast<std::size_t>(m)]).norm() < 1e-12);
        }
    }
}

TEST_CASE("identical groups form a symmetric fixed point", "[runner]") {
    Dataset raw = small_data(5, 60);
    // duplicate group 0's rows into group 1 so both groups hold the same data
    Dataset twin;
    twin.d = raw.d;
    for (const auto& e : raw.examples) {
        if (e.s != 0) continue;
        twin.examples.push_back(e);
        LabeledExample copy = e;
        copy.s = 1;
        twin.examples.push_back(copy);
    }
    twin.recount_groups();
    auto [train, meta] = carve_meta(twin, 0.05, 9);
    // carving may unbalance the twins; rebuild exact copies
    Dataset balanced;
    balanced.d = train.d;
    for (const auto& e : train.examples) {
        if (e.s != 0) continue;
        balanced.examples.push_back(e);
        LabeledExample copy = e;
        copy.s = 1;
        balanced.examples.push_back(copy);
    }
    balanced.recount_groups();

    ExperimentConfig cfg = small_config();
    cfg.epochs = 3;
    cfg.lambda_fair = 1.0;
    RunState state = init_run(cfg, balanced, meta);
    state.groups[1] = state.groups[0];  // exact symmetry

    for (int t = 0; t < cfg.epochs; ++t) train_epoch(state, cfg);

    for (int m = 0; m < state.groups[0].size(); ++m) {
        REQUIRE((state.groups[0].zs[static_cast<std::size_t>(m)] -
                 state.groups[1].zs[static_cast<std::size_t>(m)]).norm() < 1e-10);
        REQUIRE((state.central.zs[static_cast<std::size_t>(m)] -
                 state.groups[0].zs[static_cast<std::size_t>(m)]).norm() < 1e-10);
    }
    REQUIRE(state.history.back().w2_weights < 1e-10);
}

TEST_CASE("surrogate meta loss is the pseudo-label KL", "[runner]") {
    MetaSet pseudo;
    LabeledExample e;
    e.x = Vec::Zero(1);
    e.y = 0;
    e.y_clean = 0;
    pseudo.examples.push_back(e);
    Mat soft(1, 2);
    soft << 1.0, 0.0;  // all mass on y=0
    pseudo.soft_labels = soft;

    ModelParams half{Vec::Zero(2)};
    REQUIRE_THAT(surrogate_meta_loss(half, pseudo), Catch::Matchers::WithinAbs(std::log(2.0), 1e-12));

    // model matching the pseudo distribution scores zero
    Mat agree(1, 2);
    agree << 0.5, 0.5;
    pseudo.soft_labels = agree;
    REQUIRE_THAT(surrogate_meta_loss(half, pseudo), Catch::Matchers::WithinAbs(0.0, 1e-12));

    // gradient against finite differences
    Rng rng(71, "surrogate_fd");
    for (int trial = 0; trial < 100; ++trial) {
        MetaSet ms;
        const int n = 1 + static_cast<int>(rng.below(4));
        Mat labels(n, 2);
        for (int i = 0; i < n; ++i) {
            LabeledExample ex;
            ex.x = rng.normal_vec(2);
            ms.examples.push_back(std::move(ex));
            const double q1 = rng.uniform01();
            labels(i, 0) = 1.0 - q1;
            labels(i, 1) = q1;
        }
        ms.soft_labels = labels;
        const Vec theta = rng.normal_vec(3);
        const Vec analytic = surrogate_meta_grad(ModelParams{theta}, ms);
        const Vec fd = oracle::finite_difference_gradient(
            [&](const Vec& t) { return surrogate_meta_loss(ModelParams{t}, ms); }, theta);
        REQUIRE(oracle::rel_error(analytic, fd) < 1e-4);
    }
}

TEST_CASE("runs are deterministic for a fixed seed", "[runner]") {
    const Dataset raw = small_data(11);
    ExperimentConfig cfg = small_config();
    cfg.bias_amount = 0.4;
    cfg.epochs = 3;

    const RunState a = run_pipeline(cfg, raw);
    const RunState b = run_pipeline(cfg, raw);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        REQUIRE(a.history[i].acc == b.history[i].acc);
        REQUIRE(a.history[i].dp == b.history[i].dp);
        REQUIRE(a.history[i].w2_weights == b.history[i].w2_weights);
    }
    for (int m = 0; m < a.groups[0].size(); ++m) {
        REQUIRE(a.groups[0].zs[static_cast<std::size_t>(m)] ==
                b.groups[0].zs[static_cast<std::size_t>(m)]);
    }
}

TEST_CASE("particles stay finite and history grows per epoch", "[runner]") {
    const Dataset raw = small_data(13);
    ExperimentConfig cfg = small_config();
    cfg.epochs = 5;
    cfg.divergence = Divergence::mmd;
    const RunState state = run_pipeline(cfg, raw);
    REQUIRE(state.epoch == 5);
    REQUIRE(state.history.size() == 6);
    for (const auto& g : state.groups) REQUIRE(g.all_finite());
    for (std::size_t i = 0; i < state.history.size(); ++i) {
        REQUIRE(state.history[i].epoch == static_cast<int>(i));
    }
}

TEST_CASE("weight distributions differentiate and realign under bias", "[runner]") {
    // small smoke version of the direction-of-effect experiment
    oracle::SyntheticSpec spec;
    spec.n = 300;
    spec.d = 2;
    const Dataset raw = oracle::make_synthetic(17, spec);

    ExperimentConfig cfg;
    cfg.particles = 6;
    cfg.epochs = 25;
    cfg.eps_step = 0.4;
    cfg.lambda_fair = 10.0;
    cfg.bias_amount = 0.4;
    cfg.target_group = 1;
    cfg.meta_fraction = 0.02;
    cfg.seed = 21;

    const RunState state = run_pipeline(cfg, raw);
    const double initial = state.history.front().w2_weights;
    const double final_d = state.history.back().w2_weights;
    REQUIRE(initial > 0.0);
    REQUIRE(final_d < initial);
}
