#pragma once

#include <cstdint>
#include <random>

namespace dnnci {

/// Pseudo random engine used throughout the library.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Bijective on 64-bit words with good avalanche.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/**
 * Seed of the independent stream number `index` below `parent`.
 *
 * stream(parent, index) = splitmix64(splitmix64(parent) ^ splitmix64(index + 1)).
 * Replication k of a study always draws from stream(master_seed, k), so results
 * never depend on how replications are scheduled across threads.
 */
constexpr std::uint64_t stream_seed(std::uint64_t parent, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(parent) ^ splitmix64(index + 1));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

inline Rng make_rng(std::uint64_t parent, std::uint64_t index) {
    return Rng(stream_seed(parent, index));
}

/// Uniform draw on [0, 1) taking the top 53 bits of one engine output.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace dnnci
