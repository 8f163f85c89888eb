#ifndef PROTOSEG_RNG_HPP
#define PROTOSEG_RNG_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace protoseg::rng {

// mt19937_64 is fully specified by the standard; the distributions below are
// hand-rolled because std:: distribution output is implementation-defined,
// and episode files must be reproducible from a seed alone.
using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a stream tag.
inline std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream));
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return mix(mix(seed, a), b);
}

// Uniform double in [0, 1), 53 mantissa bits.
inline double uniform(Engine& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& g, double lo, double hi) {
    return lo + (hi - lo) * uniform(g);
}

// Uniform integer in [0, n). Rejection sampling, no modulo bias.
inline std::uint64_t uniform_int(Engine& g, std::uint64_t n) {
    // 2^64 mod n, computed without overflow
    const std::uint64_t rem = (std::numeric_limits<std::uint64_t>::max() % n + 1) % n;
    if (rem == 0) return g() % n;
    const std::uint64_t limit = static_cast<std::uint64_t>(0) - rem;
    std::uint64_t x = g();
    while (x >= limit) x = g();
    return x % n;
}

// Standard normal via Box-Muller (cosine branch only; stateless).
inline double normal(Engine& g) {
    double u1 = uniform(g);
    while (u1 <= 0.0) u1 = uniform(g);
    const double u2 = uniform(g);
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

inline double normal(Engine& g, double mean, double stddev) {
    return mean + stddev * normal(g);
}

// Uniform point on the unit sphere in `dim` dimensions.
inline std::vector<double> unit_vector(Engine& g, int dim) {
    std::vector<double> v(dim);
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (double& x : v) {
            x = normal(g);
            norm2 += x * x;
        }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
    return v;
}

}  // namespace protoseg::rng

#endif  // PROTOSEG_RNG_HPP
