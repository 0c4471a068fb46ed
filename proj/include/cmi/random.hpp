#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cmi {

// Bumped whenever the mapping from seeds to random streams changes, so that
// recorded results can be tied to the generator layout that produced them.
inline constexpr int kRngStreamVersion = 1;

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent child seed from a parent seed and a path of
// integer labels, e.g. derive_seed(master, {trial, kTrainBatch}).
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t s = mix64(parent ^ 0x5ca1ab1e0ddba11ULL);
    for (auto label : path) s = mix64(s ^ mix64(label + 0x632be59bd9b4e019ULL));
    return s;
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

}  // namespace cmi
