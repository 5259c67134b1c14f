#pragma once
// Experiment configuration: flat key=value files, flag overrides, and a
// deterministic echo that round-trips through --config.

#include "fairbads/central.hpp"
#include "fairbads/common.hpp"
#include "fairbads/svgd.hpp"

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace fairbads {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PredictMode { ensemble, central, group };

struct ExperimentConfig {
    std::string data;  // dataset CSV path
    Divergence divergence = Divergence::wasserstein;
    int particles = 20;         // M per group
    double beta = 0.005;        // weight prior target level
    double h = 0.1;             // KDE/MMD bandwidth (floor when adaptive)
    double eps_stab = 1e-3;     // KDE stability constant
    double eps_step = 0.5;      // SVGD step size
    double lambda_fair = 1.0;   // central-score multiplier
    int lambda_anneal_epochs = 0;  // linear ramp length; 0 = constant
    int epochs = 50;
    int k_bary = 1;             // barycenter sweeps / descent steps per epoch
    double gd_step = 1.0;       // initial mmd/fdiv descent step
    double bias_amount = 0.0;   // label-flip probability rho
    int target_group = 1;       // group receiving the corruption
    bool flip_symmetric = false;
    double meta_fraction = 0.01;
    std::uint64_t seed = 0;
    bool baseline = false;      // forces lambda_fair = 0
    int t_inner = 1;            // SVGD steps per group per epoch
    double prior_scale = 1.0;
    FChoice f_choice = FChoice::js;
    BandwidthRule svgd_bandwidth = BandwidthRule::median;
    double svgd_fixed_h = 1.0;
    bool adaptive_alignment_bandwidth = true;  // runner-side kernel scale, floored at h
    PredictMode predict_mode = PredictMode::ensemble;
    int eval_group = 0;
    bool use_surrogate_meta = false;
    double init_theta_scale = 0.01;
    bool eval_on_clean = true;

    double effective_lambda(int epoch) const {
        if (baseline) return 0.0;
        if (lambda_anneal_epochs <= 0) return lambda_fair;
        const double ramp = std::min(1.0, static_cast<double>(epoch + 1) / lambda_anneal_epochs);
        return lambda_fair * ramp;
    }
};

namespace detail {

inline std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

inline int to_int(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != std::floor(d)) throw ConfigError("config key '" + key + "': expected an integer");
    return static_cast<int>(d);
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("config key '" + key + "': expected 0/1/true/false");
}

}  // namespace detail

inline Divergence parse_divergence(const std::string& v) {
    if (v == "w2" || v == "wasserstein") return Divergence::wasserstein;
    if (v == "mmd") return Divergence::mmd;
    if (v == "fdiv") return Divergence::fdiv;
    throw ConfigError("unknown divergence '" + v + "' (expected w2|mmd|fdiv)");
}

inline FChoice parse_f_choice(const std::string& v) {
    if (v == "kl") return FChoice::kl;
    if (v == "reverse_kl") return FChoice::reverse_kl;
    if (v == "js") return FChoice::js;
    throw ConfigError("unknown f_choice '" + v + "' (expected kl|reverse_kl|js)");
}

inline std::string to_string(FChoice f) {
    switch (f) {
        case FChoice::kl: return "kl";
        case FChoice::reverse_kl: return "reverse_kl";
        case FChoice::js: return "js";
    }
    return "?";
}

inline std::string to_string(PredictMode m) {
    switch (m) {
        case PredictMode::ensemble: return "ensemble";
        case PredictMode::central: return "central";
        case PredictMode::group: return "group";
    }
    return "?";
}

inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    using detail::to_bool;
    using detail::to_double;
    using detail::to_int;
    if (key == "data") {
        cfg.data = value;
    } else if (key == "divergence") {
        cfg.divergence = parse_divergence(value);
    } else if (key == "particles") {
        cfg.particles = to_int(key, value);
    } else if (key == "beta") {
        cfg.beta = to_double(key, value);
    } else if (key == "h") {
        cfg.h = to_double(key, value);
    } else if (key == "eps_stab") {
        cfg.eps_stab = to_double(key, value);
    } else if (key == "eps_step") {
        cfg.eps_step = to_double(key, value);
    } else if (key == "lambda_fair") {
        cfg.lambda_fair = to_double(key, value);
    } else if (key == "lambda_anneal_epochs") {
        cfg.lambda_anneal_epochs = to_int(key, value);
    } else if (key == "epochs") {
        cfg.epochs = to_int(key, value);
    } else if (key == "k_bary") {
        cfg.k_bary = to_int(key, value);
    } else if (key == "gd_step") {
        cfg.gd_step = to_double(key, value);
    } else if (key == "bias_amount") {
        cfg.bias_amount = to_double(key, value);
    } else if (key == "target_group") {
        cfg.target_group = to_int(key, value);
    } else if (key == "flip_symmetric") {
        cfg.flip_symmetric = to_bool(key, value);
    } else if (key == "meta_fraction") {
        cfg.meta_fraction = to_double(key, value);
    } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(to_double(key, value));
    } else if (key == "baseline") {
        cfg.baseline = to_bool(key, value);
    } else if (key == "t_inner") {
        cfg.t_inner = to_int(key, value);
    } else if (key == "prior_scale") {
        cfg.prior_scale = to_double(key, value);
    } else if (key == "f_choice") {
        cfg.f_choice = parse_f_choice(value);
    } else if (key == "svgd_bandwidth") {
        if (value == "median") {
            cfg.svgd_bandwidth = BandwidthRule::median;
        } else if (value == "fixed") {
            cfg.svgd_bandwidth = BandwidthRule::fixed;
        } else {
            throw ConfigError("unknown svgd_bandwidth '" + value + "' (expected median|fixed)");
        }
    } else if (key == "svgd_fixed_h") {
        cfg.svgd_fixed_h = to_double(key, value);
    } else if (key == "adaptive_alignment_bandwidth") {
        cfg.adaptive_alignment_bandwidth = to_bool(key, value);
    } else if (key == "predict_mode") {
        if (value == "ensemble") {
            cfg.predict_mode = PredictMode::ensemble;
        } else if (value == "central") {
            cfg.predict_mode = PredictMode::central;
        } else if (value == "group") {
            cfg.predict_mode = PredictMode::group;
        } else {
            throw ConfigError("unknown predict_mode '" + value + "' (expected ensemble|central|group)");
        }
    } else if (key == "eval_group") {
        cfg.eval_group = to_int(key, value);
    } else if (key == "use_surrogate_meta") {
        cfg.use_surrogate_meta = to_bool(key, value);
    } else if (key == "init_theta_scale") {
        cfg.init_theta_scale = to_double(key, value);
    } else if (key == "eval_on_clean") {
        cfg.eval_on_clean = to_bool(key, value);
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        }
        apply_config_entry(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

inline void validate(const ExperimentConfig& cfg) {
    if (cfg.particles < 1) throw ConfigError("particles must be >= 1");
    if (cfg.beta <= 0.0 || cfg.beta >= 1.0) throw ConfigError("beta must be in (0, 1)");
    if (cfg.h <= 0.0) throw ConfigError("h must be positive");
    if (cfg.eps_stab <= 0.0) throw ConfigError("eps_stab must be positive");
    if (cfg.eps_step <= 0.0) throw ConfigError("eps_step must be positive");
    if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (cfg.k_bary < 1) throw ConfigError("k_bary must be >= 1");
    if (cfg.gd_step <= 0.0) throw ConfigError("gd_step must be positive");
    if (cfg.bias_amount < 0.0 || cfg.bias_amount > 1.0) throw ConfigError("bias_amount must be in [0, 1]");
    if (cfg.meta_fraction <= 0.0 || cfg.meta_fraction >= 1.0) {
        throw ConfigError("meta_fraction must be in (0, 1)");
    }
    if (cfg.t_inner < 1) throw ConfigError("t_inner must be >= 1");
    if (cfg.lambda_fair < 0.0) throw ConfigError("lambda_fair must be >= 0");
    if (cfg.prior_scale < 0.0) throw ConfigError("prior_scale must be >= 0");
    if (cfg.init_theta_scale <= 0.0) throw ConfigError("init_theta_scale must be positive");
    if (cfg.svgd_fixed_h <= 0.0) throw ConfigError("svgd_fixed_h must be positive");
    if (cfg.target_group < 0) throw ConfigError("target_group must be >= 0");
    if (cfg.eval_group < 0) throw ConfigError("eval_group must be >= 0");
}

// Full resolved configuration, one key per line; feeding the echo back as
// --config reproduces the run.
inline std::string echo_config(const ExperimentConfig& cfg) {
    using detail::fmt_double;
    std::ostringstream os;
    os << "data=" << cfg.data << '\n';
    os << "divergence=" << to_string(cfg.divergence) << '\n';
    os << "particles=" << cfg.particles << '\n';
    os << "beta=" << fmt_double(cfg.beta) << '\n';
    os << "h=" << fmt_double(cfg.h) << '\n';
    os << "eps_stab=" << fmt_double(cfg.eps_stab) << '\n';
    os << "eps_step=" << fmt_double(cfg.eps_step) << '\n';
    os << "lambda_fair=" << fmt_double(cfg.lambda_fair) << '\n';
    os << "lambda_anneal_epochs=" << cfg.lambda_anneal_epochs << '\n';
    os << "epochs=" << cfg.epochs << '\n';
    os << "k_bary=" << cfg.k_bary << '\n';
    os << "gd_step=" << fmt_double(cfg.gd_step) << '\n';
    os << "bias_amount=" << fmt_double(cfg.bias_amount) << '\n';
    os << "target_group=" << cfg.target_group << '\n';
    os << "flip_symmetric=" << (cfg.flip_symmetric ? 1 : 0) << '\n';
    os << "meta_fraction=" << fmt_double(cfg.meta_fraction) << '\n';
    os << "seed=" << cfg.seed << '\n';
    os << "baseline=" << (cfg.baseline ? 1 : 0) << '\n';
    os << "t_inner=" << cfg.t_inner << '\n';
    os << "prior_scale=" << fmt_double(cfg.prior_scale) << '\n';
    os << "f_choice=" << to_string(cfg.f_choice) << '\n';
    os << "svgd_bandwidth=" << (cfg.svgd_bandwidth == BandwidthRule::median ? "median" : "fixed") << '\n';
    os << "svgd_fixed_h=" << fmt_double(cfg.svgd_fixed_h) << '\n';
    os << "adaptive_alignment_bandwidth=" << (cfg.adaptive_alignment_bandwidth ? 1 : 0) << '\n';
    os << "predict_mode=" << to_string(cfg.predict_mode) << '\n';
    os << "eval_group=" << cfg.eval_group << '\n';
    os << "use_surrogate_meta=" << (cfg.use_surrogate_meta ? 1 : 0) << '\n';
    os << "init_theta_scale=" << fmt_double(cfg.init_theta_scale) << '\n';
    os << "eval_on_clean=" << (cfg.eval_on_clean ? 1 : 0) << '\n';
    return os.str();
}

}  // namespace fairbads
