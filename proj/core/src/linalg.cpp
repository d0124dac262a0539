#include "tdesing/linalg.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <limits>

namespace tdesing {

ThinQr thin_qr(const Matrix& a) {
  const Index m = a.rows(), n = a.cols();
  if (m < n) throw std::invalid_argument("thin_qr requires rows >= cols");
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(m, n);
  Matrix r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  for (Index i = 0; i < n; ++i) {
    if (r(i, i) < 0.0) {
      r.row(i) = -r.row(i);
      q.col(i) = -q.col(i);
    }
  }
  return {std::move(q), std::move(r)};
}

ThinSvd thin_svd(const Matrix& a) {
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

Vector singular_values(const Matrix& a) {
  Eigen::BDCSVD<Matrix> svd(a);
  return svd.singularValues();
}

Index rank_of(const Matrix& a, double tol) {
  const Vector s = singular_values(a);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Index r = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > tol * s(0)) ++r;
  return r;
}

Dims tucker_rank(const DenseTensor& t, double tol) {
  Dims r;
  for (int k = 0; k < t.ndim(); ++k) r.push_back(rank_of(unfold(t, k), tol));
  return r;
}

double cond_2(const Matrix& a) {
  const Vector s = singular_values(a);
  const double smin = s(s.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

}  // namespace tdesing
