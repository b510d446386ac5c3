#pragma once

#include <cstdint>
#include <random>

namespace seqacq {

// The single generator type used everywhere. All randomness in a run is
// derived from one seed; sub-components get streams via derive_seed().
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// splitmix64 finalizer; maps (seed, stream) to an independent seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace seqacq
