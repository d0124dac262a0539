#include "tdesing/rng.hpp"

#include "tdesing/linalg.hpp"

#include <cmath>
#include <numbers>

namespace tdesing {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

Index Rng::uniform_index(Index n) {
  if (n <= 0) throw std::invalid_argument("uniform_index requires n > 0");
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<Index>(x % un);
}

DenseTensor random_gaussian(const Dims& dims, std::uint64_t seed) {
  DenseTensor t(dims);
  Rng rng(seed);
  for (Index i = 0; i < t.size(); ++i) t.values()[i] = rng.normal();
  return t;
}

Matrix random_gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
  Matrix m(rows, cols);
  Rng rng(seed);
  // column-major fill order, part of the documented stream layout
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

Matrix random_stiefel(Index n, Index r, std::uint64_t seed) {
  if (r > n) throw std::invalid_argument("random_stiefel requires r <= n");
  return thin_qr(random_gaussian_matrix(n, r, seed)).q;
}

}  // namespace tdesing
