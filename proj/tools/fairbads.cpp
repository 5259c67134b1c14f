// fairbads: run alignment experiments, compute standalone barycenters,
// and execute the randomized bound/padding check suites.

#include "fairbads/config.hpp"
#include "fairbads/data.hpp"
#include "fairbads/io.hpp"
#include "fairbads/metrics.hpp"
#include "fairbads/runner.hpp"
#include "fairbads/theory.hpp"

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace fairbads;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitIo = 3;

struct RunOverrides {
    std::optional<std::string> divergence;
    std::optional<double> bias_amount;
    std::optional<int> particles;
    std::optional<double> beta;
    std::optional<int> epochs;
    std::optional<std::uint64_t> seed;
    std::optional<double> lambda_fair;
    bool baseline = false;
    std::optional<std::string> data;
};

// per-group loss for the bound checkers: mean clamped cross entropy of a
// particle's classifier on that group's training examples
std::vector<GroupLoss> group_ce_losses(const RunState& state) {
    std::vector<GroupLoss> losses;
    for (const auto& gp : state.posteriors) {
        const Mat X = gp.data.X;
        const Vec y = gp.data.y;
        const int P = gp.theta_dim;
        losses.push_back({[X, y, P](const Vec& z) {
                              const Vec p = batch_probs(z.head(P), X);
                              double sum = 0.0;
                              for (Eigen::Index i = 0; i < y.size(); ++i) {
                                  sum += cross_entropy(p[i], y[i]);
                              }
                              return sum / static_cast<double>(y.size());
                          },
                          std::nullopt});
    }
    return losses;
}

nlohmann::json bound_summaries(const RunState& state, const ExperimentConfig& cfg) {
    const std::vector<GroupLoss> losses = group_ce_losses(state);
    BarycenterConfig bc = detail::barycenter_config(cfg);
    KdeConfig kde{cfg.h, cfg.eps_stab};
    if (cfg.divergence != Divergence::wasserstein) {
        kde.bandwidth = detail::alignment_bandwidth(state.groups, state.central, cfg);
    }
    nlohmann::json j;
    j["transfer"] = to_json(check_transfer_bound(state.groups, state.central, losses, bc, kde));
    if (state.groups.size() >= 2) {
        j["disparity"] = to_json(check_disparity_bound(state.groups, state.central, losses, bc, kde));
    }
    return j;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, const RunOverrides& ov) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
        if (ov.data) cfg.data = *ov.data;
        if (ov.divergence) cfg.divergence = parse_divergence(*ov.divergence);
        if (ov.bias_amount) cfg.bias_amount = *ov.bias_amount;
        if (ov.particles) cfg.particles = *ov.particles;
        if (ov.beta) cfg.beta = *ov.beta;
        if (ov.epochs) cfg.epochs = *ov.epochs;
        if (ov.seed) cfg.seed = *ov.seed;
        if (ov.lambda_fair) cfg.lambda_fair = *ov.lambda_fair;
        if (ov.baseline) cfg.baseline = true;
        validate(cfg);
        if (cfg.data.empty()) throw ConfigError("config key 'data' is required");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    Dataset raw;
    try {
        raw = load_dataset(cfg.data);
    } catch (const LoadError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    }

    RunState state;
    try {
        state = run_pipeline(cfg, raw);
    } catch (const RunnerError& e) {
        std::cerr << "runtime abort: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        const std::filesystem::path out(out_dir);
        std::filesystem::create_directories(out / "particles_final");

        std::ostringstream metrics;
        for (const auto& rep : state.history) metrics << to_json(rep).dump() << '\n';
        atomic_write_file(out / "metrics.jsonl", metrics.str());

        atomic_write_file(out / "config_echo", echo_config(cfg));

        for (std::size_t s = 0; s < state.groups.size(); ++s) {
            write_particle_csv(out / "particles_final" / (std::to_string(s) + ".csv"),
                               state.groups[s]);
        }

        nlohmann::json report;
        report["final"] = to_json(state.history.back());
        report["bounds"] = bound_summaries(state, cfg);
        report["config"] = echo_config(cfg);
        atomic_write_file(out / "report.json", report.dump(2) + "\n");
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    }
    return kExitOk;
}

int cmd_barycenter(const std::string& inputs, const std::string& divergence, const std::string& out,
                   int iters, double h, double eps_stab, double gd_step, const std::string& f_choice) {
    BarycenterConfig cfg;
    KdeConfig kde;
    std::vector<std::string> paths;
    try {
        cfg.divergence = parse_divergence(divergence);
        cfg.inner_iters = iters;
        cfg.gd_step = gd_step;
        cfg.f_choice = parse_f_choice(f_choice);
        kde.bandwidth = h;
        kde.stability = eps_stab;
        if (iters < 1) throw ConfigError("--iters must be >= 1");
        if (h <= 0.0) throw ConfigError("--h must be positive");
        std::stringstream ss(inputs);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) paths.push_back(item);
        }
        if (paths.empty()) throw ConfigError("--inputs needs at least one file");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    std::vector<ParticleSet> groups;
    try {
        for (const auto& p : paths) groups.push_back(read_particle_csv(p));
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    }

    const int M = groups.front().size();
    Eigen::Index max_dim = 0;
    for (const auto& g : groups) {
        if (g.size() != M) {
            std::cerr << "config error: inputs disagree on particle count\n";
            return kExitConfig;
        }
        max_dim = std::max(max_dim, g.dim());
    }
    for (auto& g : groups) g = pad_particles(g, static_cast<int>(max_dim));

    // central starts at the per-index uniform mean
    ParticleSet central;
    for (int m = 0; m < M; ++m) {
        Vec z = Vec::Zero(max_dim);
        for (const auto& g : groups) z += g.zs[static_cast<std::size_t>(m)];
        central.zs.push_back(z / static_cast<double>(groups.size()));
    }

    try {
        switch (cfg.divergence) {
            case Divergence::wasserstein:
                central = wasserstein_barycenter_update(groups, central, cfg);
                break;
            case Divergence::mmd:
                central = mmd_barycenter_update(groups, central, cfg, kde);
                break;
            case Divergence::fdiv:
                central = fdiv_barycenter_update(groups, central, cfg, kde);
                break;
        }
        const double objective = barycenter_objective(groups, central, cfg, kde);
        write_particle_csv(out, central);
        std::ostringstream os;
        os.precision(17);
        os << objective;
        std::cout << os.str() << '\n';
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "runtime abort: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_check(const std::string& suite, int trials, std::uint64_t seed) {
    if (trials <= 0) {
        std::cerr << "config error: no trials\n";
        return kExitConfig;
    }
    if (suite != "bounds" && suite != "padding" && suite != "all") {
        std::cerr << "config error: --suite must be bounds|padding|all\n";
        return kExitConfig;
    }
    int failures = 0;
    if (suite == "bounds" || suite == "all") {
        const SuiteResult res = run_bounds_suite(trials, seed);
        std::cout << "bounds: " << res.pass << " PASS, " << res.fail << " FAIL\n";
        for (const auto& rep : res.failures) {
            std::cout << "  FAIL " << rep.name << " (" << rep.divergence << ") slack=" << rep.slack
                      << '\n';
        }
        failures += res.fail;
    }
    if (suite == "padding" || suite == "all") {
        const SuiteResult res = run_padding_suite(trials, seed);
        std::cout << "padding: " << res.pass << " PASS, " << res.fail << " FAIL\n";
        for (const auto& rep : res.failures) std::cout << "  FAIL " << rep.detail << '\n';
        failures += res.fail;
    }
    return failures == 0 ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fair Bayesian data selection: particle inference with group alignment"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    std::string config_path;
    std::string out_dir;
    RunOverrides ov;
    std::string divergence_flag;
    std::string data_flag;
    double bias_flag = 0.0, beta_flag = 0.0, lambda_flag = 0.0;
    int particles_flag = 0, epochs_flag = 0;
    std::uint64_t seed_flag = 0;
    run->add_option("--config", config_path, "config file (key=value lines)")->required();
    run->add_option("--out", out_dir, "output directory")->required();
    auto* div_opt = run->add_option("--divergence", divergence_flag, "w2|mmd|fdiv");
    auto* bias_opt = run->add_option("--bias-amount", bias_flag, "label flip probability");
    auto* particles_opt = run->add_option("--particles", particles_flag, "particles per group");
    auto* beta_opt = run->add_option("--beta", beta_flag, "weight prior level");
    auto* epochs_opt = run->add_option("--epochs", epochs_flag, "training epochs");
    auto* seed_opt = run->add_option("--seed", seed_flag, "master seed");
    auto* lambda_opt = run->add_option("--lambda-fair", lambda_flag, "central score weight");
    run->add_flag("--baseline", ov.baseline, "disable alignment (lambda_fair = 0)");
    auto* data_opt = run->add_option("--data", data_flag, "dataset csv (overrides config)");

    // barycenter
    auto* bary = app.add_subcommand("barycenter", "central particles for stored particle sets");
    std::string inputs, bary_div = "w2", bary_out, bary_f = "js";
    int bary_iters = 1;
    double bary_h = 0.1, bary_eps = 1e-3, bary_gd = 1.0;
    bary->add_option("--inputs", inputs, "comma-separated particle csv files")->required();
    bary->add_option("--divergence", bary_div, "w2|mmd|fdiv");
    bary->add_option("--out", bary_out, "output csv")->required();
    bary->add_option("--iters", bary_iters, "sweeps / descent steps");
    bary->add_option("--h", bary_h, "kernel bandwidth");
    bary->add_option("--eps-stab", bary_eps, "kde stability constant");
    bary->add_option("--gd-step", bary_gd, "descent step size");
    bary->add_option("--f-choice", bary_f, "kl|reverse_kl|js");

    // check
    auto* check = app.add_subcommand("check", "randomized bound and padding suites");
    std::string suite = "all";
    int trials = 0;
    std::uint64_t check_seed = 0;
    check->add_option("--suite", suite, "bounds|padding|all");
    check->add_option("--trials", trials, "trials per suite")->required();
    check->add_option("--seed", check_seed, "suite seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    if (run->parsed()) {
        if (*div_opt) ov.divergence = divergence_flag;
        if (*bias_opt) ov.bias_amount = bias_flag;
        if (*particles_opt) ov.particles = particles_flag;
        if (*beta_opt) ov.beta = beta_flag;
        if (*epochs_opt) ov.epochs = epochs_flag;
        if (*seed_opt) ov.seed = seed_flag;
        if (*lambda_opt) ov.lambda_fair = lambda_flag;
        if (*data_opt) ov.data = data_flag;
        return cmd_run(config_path, out_dir, ov);
    }
    if (bary->parsed()) {
        return cmd_barycenter(inputs, bary_div, bary_out, bary_iters, bary_h, bary_eps, bary_gd, bary_f);
    }
    if (check->parsed()) {
        return cmd_check(suite, trials, check_seed);
    }
    return kExitConfig;
}
