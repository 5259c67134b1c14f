#pragma once
// Particle containers shared by the SVGD and central-distribution modules.

#include "fairbads/common.hpp"

#include <stdexcept>
#include <vector>

namespace fairbads {

// One joint point z = (theta ++ padded w).
using Particle = Vec;

// M equally weighted particles representing an empirical distribution.
// theta_dim/live_weights describe the block layout when the set holds
// joint (theta, w) particles; both stay 0 for plain point clouds.
struct ParticleSet {
    std::vector<Particle> zs;
    int theta_dim = 0;
    int live_weights = 0;

    int size() const { return static_cast<int>(zs.size()); }
    Eigen::Index dim() const { return zs.empty() ? 0 : zs.front().size(); }

    bool all_finite() const {
        for (const auto& z : zs) {
            if (!z.allFinite()) return false;
        }
        return true;
    }
};

inline void check_same_shape(const ParticleSet& a, const ParticleSet& b) {
    if (a.size() != b.size()) throw std::invalid_argument("particle sets differ in size");
    if (a.dim() != b.dim()) throw std::invalid_argument("particle sets differ in dimension");
}

}  // namespace fairbads
