#pragma once

#include "tdesing/tensor.hpp"

#include <memory>

namespace tdesing {

/// Index set of a sparse d-way tensor in coordinate form.
///
/// Entries are stored sorted by flat linear index (mode 1 fastest), so runs
/// of equal trailing index are contiguous; the contraction kernels exploit
/// this to cache the trailing-mode contraction per run. Patterns are
/// immutable and shared between tensors that live on the same index set.
class SparsePattern {
 public:
  /// Builds a pattern from 0-based multi-indices (entry e occupies
  /// indices[e*d .. e*d+d-1]). Sorts canonically; duplicate indices are a
  /// DataError.
  static std::shared_ptr<const SparsePattern> create(Dims dims,
                                                     std::vector<std::int32_t> indices);

  const Dims& dims() const { return dims_; }
  int ndim() const { return static_cast<int>(dims_.size()); }
  Index count() const { return count_; }

  std::int32_t index(Index entry, int mode) const {
    return idx_[static_cast<size_t>(entry * ndim() + mode)];
  }
  const std::int32_t* entry(Index e) const { return idx_.data() + e * ndim(); }
  Index linear_index(Index e) const;

  struct Run {
    Index begin, end;       // entry range [begin, end)
    std::int32_t trailing;  // shared index of the last mode
  };
  const std::vector<Run>& runs() const { return runs_; }

 private:
  Dims dims_;
  Index count_ = 0;
  std::vector<std::int32_t> idx_;
  std::vector<Run> runs_;
};

using SparsePatternPtr = std::shared_ptr<const SparsePattern>;

/// Values attached to a shared sparse pattern.
struct SparseTensor {
  SparsePatternPtr pattern;
  Vector values;

  SparseTensor() = default;
  SparseTensor(SparsePatternPtr p, Vector v) : pattern(std::move(p)), values(std::move(v)) {
    if (values.size() != pattern->count())
      throw std::invalid_argument("sparse values do not match pattern count");
  }
  const Dims& dims() const { return pattern->dims(); }
  Index count() const { return pattern->count(); }
};

/// Scatters a sparse tensor into a dense one (test scale).
DenseTensor densify(const SparseTensor& s);

// ---------------------------------------------------------------------------
// Contraction kernels. Each takes one matrix per mode, with M_k of shape
// n_k x m_k, and contracts sample e against the rows M_k(i_k(e), :).
// Costs are O(count * prod m_k) worst case and never touch prod n_k.
// ---------------------------------------------------------------------------

/// Full contraction: C(j_1..j_d) = sum_e v_e * prod_k M_k(i_k(e), j_k).
/// Equals (dense S) x_1 M_1^T x_2 M_2^T ... as an m_1 x ... x m_d tensor.
DenseTensor contract_all(const SparsePattern& p, const Vector& values,
                         const std::vector<const Matrix*>& mats);

/// Skip-mode contraction: the mode-k unfolding of the tensor obtained by
/// contracting every mode j != k with M_j; shape n_k x prod_{j != k} m_j.
Matrix contract_skip(const SparsePattern& p, const Vector& values, int k,
                     const std::vector<const Matrix*>& mats);

/// Values of the Tucker-form tensor core x_k factors(k)^... at the pattern's
/// entries: out_e = sum_j core(j) * prod_k factors[k](i_k(e), j_k).
Vector sample_tucker(const SparsePattern& p, const DenseTensor& core,
                     const std::vector<const Matrix*>& factors);

}  // namespace tdesing
