#pragma once

#include "sndiff/common.hpp"

#include <cstdint>
#include <random>

namespace sndiff {

using Rng = std::mt19937_64;

/// Named substreams. Every consumer of randomness in a posterior run draws
/// from its own stream so that swapping one component (e.g. the guidance
/// rule) leaves the draws of all other components untouched.
enum class Stream : std::uint64_t {
  Init = 1,
  SignalDiffusion = 2,
  NoiseDiffusion = 3,
  Projection = 4,
  Problem = 5,
  Training = 6,
  Parameters = 7,
};

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  return mix64(mix64(mix64(seed) ^ static_cast<std::uint64_t>(stream)) + index);
}

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, stream, index));
}

inline Vector standard_normal(Eigen::Index dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z[i] = normal(rng);
  return z;
}

inline double uniform(double lo, double hi, Rng& rng) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace sndiff
