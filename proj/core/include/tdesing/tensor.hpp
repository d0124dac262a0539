#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tdesing {

using Matrix = Eigen::MatrixXd;  // column-major
using Vector = Eigen::VectorXd;
using Index = std::int64_t;
using Dims = std::vector<Index>;

/// A malformed or infeasible dataset / input file.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A computation that cannot proceed for numerical reasons.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Index product(const Dims& dims);

/// Dense d-way array of doubles.
///
/// Entries are addressed with 0-based indices (i_1,...,i_d). The flat
/// storage position of an entry is
///   i_1 + i_2*n_1 + i_3*n_1*n_2 + ...
/// i.e. mode 1 varies fastest. With this layout the mode-1 unfolding is a
/// plain reshape of the value array.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(Dims dims);
  DenseTensor(Dims dims, Vector values);

  int ndim() const { return static_cast<int>(dims_.size()); }
  const Dims& dims() const { return dims_; }
  Index dim(int k) const { return dims_[static_cast<size_t>(k)]; }
  Index size() const { return values_.size(); }

  Vector& values() { return values_; }
  const Vector& values() const { return values_; }

  Index linear_index(std::span<const Index> idx) const;
  double operator()(std::span<const Index> idx) const {
    return values_[linear_index(idx)];
  }
  double& operator()(std::span<const Index> idx) {
    return values_[linear_index(idx)];
  }
  double operator()(std::initializer_list<Index> idx) const {
    return (*this)(std::span<const Index>(idx.begin(), idx.size()));
  }
  double& operator()(std::initializer_list<Index> idx) {
    return (*this)(std::span<const Index>(idx.begin(), idx.size()));
  }

  static DenseTensor zeros(Dims dims) { return DenseTensor(std::move(dims)); }

 private:
  Dims dims_;
  Vector values_;
};

/// Mode-k unfolding (k is 0-based). Row index is i_k; the column index packs
/// the remaining indices with the lowest mode fastest:
///   j = sum_{l != k} i_l * J_l,   J_l = prod_{m < l, m != k} n_m.
Matrix unfold(const DenseTensor& t, int mode);

/// Inverse of unfold for the given dims; the permutation is bit-exact.
DenseTensor fold(const Matrix& m, int mode, const Dims& dims);

/// Mode-k product t x_k A with A of shape M x n_k: replaces dimension n_k
/// by M, and unfold(result, k) == A * unfold(t, k).
DenseTensor mode_product(const DenseTensor& t, int mode, const Matrix& a);

Matrix kron(const Matrix& a, const Matrix& b);

/// Rank-1 tensor v_1 o v_2 o ... o v_d.
DenseTensor outer(const std::vector<Vector>& vs);

double inner(const DenseTensor& a, const DenseTensor& b);
double frob_norm(const DenseTensor& t);

DenseTensor operator+(const DenseTensor& a, const DenseTensor& b);
DenseTensor operator-(const DenseTensor& a, const DenseTensor& b);
DenseTensor operator*(double s, const DenseTensor& t);

/// Kronecker chain M_d (x) ... (x) M_{k+1} (x) M_{k-1} (x) ... (x) M_1,
/// the matrix that pairs with mode-k unfoldings of products over all other
/// modes. Test-scale helper.
Matrix kron_chain_skip(const std::vector<Matrix>& mats, int skip);

}  // namespace tdesing
