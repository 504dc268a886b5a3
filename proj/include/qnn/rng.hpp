#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace qnn {

// splitmix64 step; used to derive independent sub-seeds from one master seed.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic seed for a labelled RNG site, e.g. (seed, epoch, batch, pass).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = mix64(seed ^ 0x7f4a7c15ULL);
    s = mix64(s ^ mix64(a));
    s = mix64(s ^ mix64(b + 0x1000000001ULL));
    s = mix64(s ^ mix64(c + 0x2000000002ULL));
    return s;
}

using Rng = std::mt19937_64;

// Uniform double in [0, 1). Explicit bit conversion so results do not depend
// on the standard library's distribution implementation.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Standard normal via Box-Muller (no cached second value, deterministic).
inline double normal(Rng& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

// Unbiased draw from [0, n) via rejection; avoids the standard library's
// implementation-defined uniform_int_distribution.
inline std::uint64_t bounded(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

// In-place Fisher-Yates with explicit draws, identical on every platform.
template <typename T>
inline void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[bounded(rng, i)]);
}

}  // namespace qnn
