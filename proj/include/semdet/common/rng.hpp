#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace semdet {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based substream seed: a pure function of (master, stream, index),
/// so work item i never depends on how many items ran before it.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index)
{
    return splitmix64(splitmix64(master ^ splitmix64(stream)) + index);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t stream, std::uint64_t index)
{
    return Rng(derive_seed(master, stream, index));
}

inline double uniform_real(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi)
{
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// Standard normal sample addressed by (seed, counter) via Box-Muller on two
/// hashed uniforms. Used for per-pixel noise fields that must not depend on
/// evaluation order.
inline double hashed_normal(std::uint64_t seed, std::uint64_t counter)
{
    const std::uint64_t a = splitmix64(seed ^ splitmix64(2 * counter));
    const std::uint64_t b = splitmix64(seed ^ splitmix64(2 * counter + 1));
    // 53-bit uniforms in (0, 1]
    const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace semdet
