#pragma once

#include "tdesing/tensor.hpp"

namespace tdesing {

struct ThinQr {
  Matrix q;  // m x n, orthonormal columns
  Matrix r;  // n x n, upper triangular, nonnegative diagonal
};

/// Thin QR of an m x n matrix with m >= n. The sign convention (nonnegative
/// diagonal of R) makes the output deterministic. Rank-deficient inputs
/// yield zero diagonal entries in R; callers decide what that means.
ThinQr thin_qr(const Matrix& a);

struct ThinSvd {
  Matrix u;
  Vector s;  // descending, nonnegative
  Matrix v;
};

ThinSvd thin_svd(const Matrix& a);

/// Singular values only (descending).
Vector singular_values(const Matrix& a);

/// Number of singular values exceeding tol * sigma_max.
Index rank_of(const Matrix& a, double tol = 1e-10);

/// Tucker rank: per-mode ranks of the unfolding matrices, at relative
/// tolerance tol. Dense input, test scale.
Dims tucker_rank(const DenseTensor& t, double tol = 1e-10);

/// 2-norm condition number (sigma_max / sigma_min).
double cond_2(const Matrix& a);

}  // namespace tdesing
