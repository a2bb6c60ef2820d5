#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace dunmri {

// Draws below avoid std::uniform_real_distribution / std::normal_distribution,
// whose outputs are implementation-defined; these are reproducible anywhere.

inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
    return lo + (hi - lo) * uniform01(g);
}

inline double gaussian(std::mt19937_64& g) {
    double u1 = uniform01(g);
    while (u1 == 0.0) u1 = uniform01(g);
    double u2 = uniform01(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stateless seed derivation: a fresh engine per (seed, purpose, ...) tuple
/// keeps draws independent of call order, so runs resume bit-identically.
inline uint64_t mix_seed(std::initializer_list<uint64_t> parts) {
    uint64_t h = 0x6a09e667f3bcc909ULL;
    for (uint64_t v : parts) h = splitmix64(h ^ splitmix64(v));
    return h;
}

}  // namespace dunmri
