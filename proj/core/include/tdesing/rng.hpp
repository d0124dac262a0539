#pragma once

#include "tdesing/tensor.hpp"

#include <random>

namespace tdesing {

std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic, portable random stream.
///
/// All randomness in the project flows through this class: a std::mt19937_64
/// engine (bit-reproducible across platforms) whose raw 64-bit words are
/// mapped to doubles; normal variates use the Box-Muller transform rather
/// than std::normal_distribution, whose output is implementation-defined.
/// Substreams are derived with splitmix64 so that independent objects (one
/// factor matrix each, for instance) consume independent streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller.
  double normal();

  /// Uniform integer in [0, n), rejection-sampled (unbiased).
  Index uniform_index(Index n);

  /// Independent substream for the given tag.
  Rng split(std::uint64_t tag) const {
    return Rng(splitmix64(seed_ ^ splitmix64(tag + 0x9e3779b97f4a7c15ull)));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Tensor with i.i.d. N(0,1) entries; bit-identical for a fixed seed.
DenseTensor random_gaussian(const Dims& dims, std::uint64_t seed);

Matrix random_gaussian_matrix(Index rows, Index cols, std::uint64_t seed);

/// Q factor of the thin QR of an n x r Gaussian matrix.
Matrix random_stiefel(Index n, Index r, std::uint64_t seed);

}  // namespace tdesing
