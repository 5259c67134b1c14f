#include "fairbads/svgd.hpp"

#include "support/oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

using namespace fairbads;

namespace {

ParticleSet cloud_from(std::initializer_list<std::initializer_list<double>> rows) {
    ParticleSet ps;
    for (const auto& row : rows) {
        Vec z(static_cast<Eigen::Index>(row.size()));
        Eigen::Index i = 0;
        for (const double v : row) z[i++] = v;
        ps.zs.push_back(std::move(z));
    }
    return ps;
}

double mean_pairwise_distance(const ParticleSet& ps) {
    double sum = 0.0;
    int count = 0;
    for (int i = 0; i < ps.size(); ++i) {
        for (int j = i + 1; j < ps.size(); ++j) {
            sum += (ps.zs[static_cast<std::size_t>(i)] - ps.zs[static_cast<std::size_t>(j)]).norm();
            ++count;
        }
    }
    return sum / count;
}

}  // namespace

TEST_CASE("rbf_kernel values and gradient", "[svgd]") {
    Vec a(2), b(2);
    a << 1.0, -2.0;
    b = a;
    const auto at_zero = rbf_kernel(a, b, 0.7);
    REQUIRE(at_zero.value == 1.0);
    REQUIRE(at_zero.grad_a.norm() == 0.0);

    // ||a-b|| = h*sqrt(2 ln 2) makes the kernel exactly one half
    const double h = 0.9;
    b << 1.0 + h * std::sqrt(2.0 * std::log(2.0)), -2.0;
    REQUIRE_THAT(rbf_kernel(a, b, h).value, Catch::Matchers::WithinAbs(0.5, 1e-12));

    Rng rng(3, "kernel_fd");
    for (int trial = 0; trial < 25; ++trial) {
        const Vec u = rng.normal_vec(3);
        const Vec v = rng.normal_vec(3);
        const double bw = rng.uniform(0.4, 2.0);
        const Vec fd = oracle::finite_difference_gradient(
            [&](const Vec& p) { return rbf_kernel(p, v, bw).value; }, u, 1e-6);
        REQUIRE(oracle::rel_error(rbf_kernel(u, v, bw).grad_a, fd) < 1e-6);
    }

    REQUIRE_THROWS_AS(rbf_kernel(a, b, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(rbf_kernel(a, Vec::Zero(3), 1.0), std::invalid_argument);
}

TEST_CASE("median_bandwidth follows the scaled median rule", "[svgd]") {
    const ParticleSet two = cloud_from({{0.0}, {2.0}});
    REQUIRE_THAT(median_bandwidth(two),
                 Catch::Matchers::WithinAbs(2.0 / std::sqrt(2.0 * std::log(3.0)), 1e-12));

    const ParticleSet collapsed = cloud_from({{1.5, 0.5}, {1.5, 0.5}, {1.5, 0.5}});
    REQUIRE(median_bandwidth(collapsed) == 1.0);

    Rng rng(7, "median_perm");
    ParticleSet ps;
    for (int i = 0; i < 7; ++i) ps.zs.push_back(rng.normal_vec(3));
    ParticleSet shuffled = ps;
    std::reverse(shuffled.zs.begin(), shuffled.zs.end());
    std::swap(shuffled.zs[0], shuffled.zs[3]);
    REQUIRE(median_bandwidth(ps) == median_bandwidth(shuffled));

    ParticleSet one = cloud_from({{0.0}});
    REQUIRE_THROWS_AS(median_bandwidth(one), std::invalid_argument);
}

TEST_CASE("single-particle svgd reduces to gradient ascent", "[svgd]") {
    SvgdConfig cfg;
    cfg.step_size = 0.05;
    cfg.bandwidth = BandwidthRule::fixed;
    cfg.fixed_h = 0.8;
    const ScoreFn score = [](const Vec& z) { return Vec(-z); };

    ParticleSet ps = cloud_from({{1.7, -0.4}});
    Vec manual = ps.zs[0];
    for (int step = 0; step < 100; ++step) {
        ps = svgd_step(ps, score, cfg);
        manual += cfg.step_size * (-manual);
        REQUIRE((ps.zs[0] - manual).norm() < 1e-12);
    }
}

TEST_CASE("with zero score particles repel", "[svgd]") {
    SvgdConfig cfg;
    cfg.step_size = 0.1;
    const ScoreFn zero = [](const Vec& z) { return Vec(Vec::Zero(z.size())); };

    ParticleSet two = cloud_from({{0.0, 0.0}, {1.0, 0.5}});
    const Vec gap_before = two.zs[1] - two.zs[0];
    const ParticleSet after = svgd_step(two, zero, cfg);
    const Vec gap_after = after.zs[1] - after.zs[0];
    REQUIRE(gap_after.norm() > gap_before.norm());
    // both move along the difference direction, in opposite senses
    REQUIRE((after.zs[1] - two.zs[1]).normalized().dot(gap_before.normalized()) > 0.999999);
    REQUIRE((after.zs[0] - two.zs[0]).normalized().dot(gap_before.normalized()) < -0.999999);

    Rng rng(13, "repulsion");
    for (int trial = 0; trial < 10; ++trial) {
        ParticleSet ps;
        for (int i = 0; i < 6; ++i) ps.zs.push_back(rng.normal_vec(2));
        SvgdConfig small = cfg;
        small.step_size = 0.01;
        const ParticleSet stepped = svgd_step(ps, zero, small);
        REQUIRE(mean_pairwise_distance(stepped) >= mean_pairwise_distance(ps));
    }
}

TEST_CASE("svgd update is synchronous: stepping commutes with permutation", "[svgd]") {
    Rng rng(19, "svgd_perm");
    ParticleSet ps;
    for (int i = 0; i < 5; ++i) ps.zs.push_back(rng.normal_vec(3));
    const ScoreFn score = [](const Vec& z) { return Vec(-z.array().cube().matrix()); };
    SvgdConfig cfg;
    cfg.step_size = 0.07;

    std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
    ParticleSet permuted;
    for (const auto i : perm) permuted.zs.push_back(ps.zs[i]);

    const ParticleSet stepped = svgd_step(ps, score, cfg);
    const ParticleSet stepped_perm = svgd_step(permuted, score, cfg);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        REQUIRE((stepped_perm.zs[i] - stepped.zs[perm[i]]).norm() < 1e-12);
    }
}

TEST_CASE("svgd rejects non-finite scores", "[svgd]") {
    ParticleSet ps = cloud_from({{0.0}, {1.0}});
    SvgdConfig cfg;
    const ScoreFn bad = [](const Vec& z) {
        Vec v = z;
        v[0] = std::numeric_limits<double>::quiet_NaN();
        return v;
    };
    REQUIRE_THROWS_AS(svgd_step(ps, bad, cfg), std::runtime_error);
}

TEST_CASE("svgd recovers the moments of a standard gaussian", "[svgd]") {
    // target N(0, I) in 2-D: score(z) = -z
    Rng rng(101, "svgd_gauss");
    ParticleSet ps;
    for (int i = 0; i < 50; ++i) {
        ps.zs.push_back(Vec::Constant(2, 1.5) + rng.normal_vec(2, 0.3));
    }
    SvgdConfig cfg;
    cfg.step_size = 0.25;
    const ScoreFn score = [](const Vec& z) { return Vec(-z); };
    for (int step = 0; step < 500; ++step) ps = svgd_step(ps, score, cfg);

    Vec mean = Vec::Zero(2);
    for (const auto& z : ps.zs) mean += z;
    mean /= ps.size();
    Vec var = Vec::Zero(2);
    for (const auto& z : ps.zs) var += (z - mean).cwiseAbs2();
    var /= ps.size();

    REQUIRE(std::abs(mean[0]) < 0.05);
    REQUIRE(std::abs(mean[1]) < 0.05);
    REQUIRE(std::abs(var[0] - 1.0) < 0.1);
    REQUIRE(std::abs(var[1] - 1.0) < 0.1);
}

TEST_CASE("fair_score composes the posterior and central pulls", "[svgd]") {
    Rng rng(43, "fair_score");
    GroupPosterior gp;
    const int d = 1;
    gp.theta_dim = d + 1;
    gp.n_live = 2;
    gp.n_padded = 3;
    gp.data.X.resize(2, d);
    gp.data.X << 0.4, -1.2;
    gp.data.y.resize(2);
    gp.data.y << 1.0, 0.0;
    gp.meta.X.resize(0, d);
    gp.meta.y.resize(0);

    ParticleSet central;
    central.zs.push_back(rng.normal_vec(gp.dim()));
    const KdeConfig kde{0.8, 1e-12};

    const Vec z = rng.normal_vec(gp.dim());

    const ScoreFn off = fair_score(gp, central, kde, 0.0);
    REQUIRE((off(z) - grad_log_post(gp, z)).norm() == 0.0);

    // singleton central: the fairness term is the pull -(z - z0)/h^2
    const ScoreFn on = fair_score(gp, central, kde, 1.0);
    const Vec pull = on(z) - grad_log_post(gp, z);
    const Vec expected = -(z - central.zs[0]) / (kde.bandwidth * kde.bandwidth);
    REQUIRE(oracle::rel_error(pull, expected) < 1e-6);

    // linear in lambda
    const ScoreFn twice = fair_score(gp, central, kde, 2.0);
    const Vec delta1 = on(z) - off(z);
    const Vec delta2 = twice(z) - off(z);
    REQUIRE((delta2 - 2.0 * delta1).norm() < 1e-12);
}
