// Deterministic randomness helpers. Everything in this project draws from an
// explicit seed; these wrappers avoid the implementation-defined distribution
// adaptors in <random> so streams are reproducible across standard libraries.
#pragma once

#include <cstdint>
#include <random>

namespace quanvnet {

// SplitMix64 step; used to derive independent child seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Uniform double in [0, 1) from the top 53 bits of one mt19937_64 draw.
inline double uniform_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(rng);
}

// Uniform integer in [0, n); rejection-free modulo is fine for our n << 2^64.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    return rng() % n;
}

} // namespace quanvnet
