#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace iwkrr {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of an independent stream identified by (seed, keys...). Pure function
/// of its inputs, so workers can derive their generators without coordination.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t s = mix64(seed);
    for (auto k : keys) s = mix64(s ^ mix64(k + 0x632be59bd9b4e019ULL));
    return s;
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {}) {
    return Engine(derive_seed(seed, keys));
}

// Stream tags used across modules.
namespace stream {
inline constexpr std::uint64_t kTrainX = 1;
inline constexpr std::uint64_t kTrainNoise = 2;
inline constexpr std::uint64_t kTestX = 3;
inline constexpr std::uint64_t kDictionary = 10;
inline constexpr std::uint64_t kBasis = 11;
inline constexpr std::uint64_t kSplit = 20;
inline constexpr std::uint64_t kRulsif = 30;
inline constexpr std::uint64_t kWeightSlice = 31;
} // namespace stream

} // namespace iwkrr
