#pragma once
// Shared numeric helpers: stable logistic functions, seeded RNG streams,
// and a small thread pool wrapper honoring FAIRBADS_THREADS.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <future>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace fairbads {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kProbClamp = 1e-12;

inline double sigmoid(double t) {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

// d/dt sigmoid(t)
inline double sigmoid_grad(double t) {
    const double s = sigmoid(t);
    return s * (1.0 - s);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double clamp_prob(double p) {
    if (p < kProbClamp) return kProbClamp;
    if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
    return p;
}

inline double cross_entropy(double p, double y) {
    p = clamp_prob(p);
    return -(y * std::log(p) + (1.0 - y) * std::log1p(-p));
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

// Deterministic per-operation RNG stream: the same (seed, op) pair always
// yields the same sequence regardless of call order elsewhere.
class Rng {
public:
    Rng(std::uint64_t seed, std::string_view op) : engine_(mix(seed, op)) {}

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // uniform in [0, 1), 53-bit resolution
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    // Box-Muller; portable across standard libraries
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    Vec normal_vec(Eigen::Index n, double scale = 1.0) {
        Vec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * normal();
        return v;
    }

    // uniform integer in [0, n)
    std::size_t below(std::size_t n) {
        const auto k = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
        return k >= n ? n - 1 : k;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    std::uint64_t raw() { return engine_(); }

private:
    static std::uint64_t mix(std::uint64_t seed, std::string_view op) {
        // FNV-1a over the op name, folded into the seed
        std::uint64_t h = 14695981039346656037ull;
        for (const char c : op) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        h ^= seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        return h;
    }

    std::mt19937_64 engine_;
};

inline int worker_threads() {
    if (const char* env = std::getenv("FAIRBADS_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
        if (n < 0) return 1;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, n). Results must be written to preallocated,
// disjoint slots so the output is identical for any thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const int threads = worker_threads();
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t chunks = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::future<void>> futures;
    futures.reserve(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
        futures.push_back(std::async(std::launch::async, [&, c] {
            for (std::size_t i = c; i < n; i += chunks) fn(i);
        }));
    }
    for (auto& f : futures) f.get();
}

}  // namespace fairbads
