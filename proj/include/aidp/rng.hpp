#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace aidp {

/// All randomness in the project flows through one engine type so that runs
/// are reproducible from seeds alone.
using Rng = std::mt19937_64;

/// Uniform double in [0,1) from the top 53 bits; stable across platforms.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi).
inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Standard normal via Box-Muller; two uniforms per call, no state carried.
inline double normal01(Rng& rng) {
    double u1;
    do {
        u1 = uniform01(rng);
    } while (u1 <= 0.0);
    double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

}  // namespace aidp
