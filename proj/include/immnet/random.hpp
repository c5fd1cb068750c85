#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace immnet {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of the sub-stream addressed by `path` under `master`. Streams are
/// addressed by work item (batch, user, grid point), never by worker, so
/// results do not depend on the worker count.
constexpr std::uint64_t stream_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t s = mix64(master);
    for (std::uint64_t p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
    return s;
}

inline Rng make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> path = {}) {
    return Rng{stream_seed(master, path)};
}

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>{lo, hi}(rng);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>{}(rng); }

}  // namespace immnet
