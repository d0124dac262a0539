#include "tdesing/tensor.hpp"

namespace tdesing {

Index product(const Dims& dims) {
  Index p = 1;
  for (Index n : dims) p *= n;
  return p;
}

namespace {

void check_dims(const Dims& dims) {
  if (dims.empty()) throw std::invalid_argument("tensor order must be >= 1");
  for (Index n : dims)
    if (n < 1) throw std::invalid_argument("tensor dimensions must be >= 1");
}

Dims strides_of(const Dims& dims) {
  Dims s(dims.size());
  Index acc = 1;
  for (size_t k = 0; k < dims.size(); ++k) {
    s[k] = acc;
    acc *= dims[k];
  }
  return s;
}

}  // namespace

DenseTensor::DenseTensor(Dims dims) : dims_(std::move(dims)) {
  check_dims(dims_);
  values_ = Vector::Zero(product(dims_));
}

DenseTensor::DenseTensor(Dims dims, Vector values)
    : dims_(std::move(dims)), values_(std::move(values)) {
  check_dims(dims_);
  if (values_.size() != product(dims_))
    throw std::invalid_argument("value count does not match dimensions");
}

Index DenseTensor::linear_index(std::span<const Index> idx) const {
  if (static_cast<int>(idx.size()) != ndim())
    throw std::invalid_argument("index arity does not match tensor order");
  Index flat = 0, stride = 1;
  for (size_t k = 0; k < dims_.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= dims_[k])
      throw std::out_of_range("tensor index out of range");
    flat += idx[k] * stride;
    stride *= dims_[k];
  }
  return flat;
}

Matrix unfold(const DenseTensor& t, int mode) {
  const int d = t.ndim();
  if (mode < 0 || mode >= d) throw std::invalid_argument("mode index out of range");
  const Dims& dims = t.dims();
  const Dims s = strides_of(dims);
  const Index nk = dims[static_cast<size_t>(mode)];
  const Index ncols = t.size() / nk;
  const Index sk = s[static_cast<size_t>(mode)];
  Matrix m(nk, ncols);
  const double* v = t.values().data();

  Dims idx(dims.size(), 0);
  Index base = 0;
  for (Index col = 0; col < ncols; ++col) {
    for (Index i = 0; i < nk; ++i) m(i, col) = v[base + i * sk];
    // odometer over modes != mode, lowest mode fastest
    for (int l = 0; l < d; ++l) {
      if (l == mode) continue;
      base += s[static_cast<size_t>(l)];
      if (++idx[static_cast<size_t>(l)] < dims[static_cast<size_t>(l)]) break;
      base -= dims[static_cast<size_t>(l)] * s[static_cast<size_t>(l)];
      idx[static_cast<size_t>(l)] = 0;
    }
  }
  return m;
}

DenseTensor fold(const Matrix& m, int mode, const Dims& dims) {
  check_dims(dims);
  const int d = static_cast<int>(dims.size());
  if (mode < 0 || mode >= d) throw std::invalid_argument("mode index out of range");
  const Index nk = dims[static_cast<size_t>(mode)];
  const Index total = product(dims);
  if (m.rows() != nk || m.cols() != total / nk)
    throw std::invalid_argument("matrix shape inconsistent with target dims");
  const Dims s = strides_of(dims);
  const Index sk = s[static_cast<size_t>(mode)];

  DenseTensor t(dims);
  double* v = t.values().data();
  Dims idx(dims.size(), 0);
  Index base = 0;
  for (Index col = 0; col < m.cols(); ++col) {
    for (Index i = 0; i < nk; ++i) v[base + i * sk] = m(i, col);
    for (int l = 0; l < d; ++l) {
      if (l == mode) continue;
      base += s[static_cast<size_t>(l)];
      if (++idx[static_cast<size_t>(l)] < dims[static_cast<size_t>(l)]) break;
      base -= dims[static_cast<size_t>(l)] * s[static_cast<size_t>(l)];
      idx[static_cast<size_t>(l)] = 0;
    }
  }
  return t;
}

DenseTensor mode_product(const DenseTensor& t, int mode, const Matrix& a) {
  if (mode < 0 || mode >= t.ndim())
    throw std::invalid_argument("mode index out of range");
  if (a.cols() != t.dim(mode))
    throw std::invalid_argument("mode product: inner dimensions mismatch");
  Dims nd = t.dims();
  nd[static_cast<size_t>(mode)] = a.rows();
  Matrix prod = a * unfold(t, mode);
  return fold(prod, mode, nd);
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

DenseTensor outer(const std::vector<Vector>& vs) {
  if (vs.empty()) throw std::invalid_argument("outer product needs >= 1 vector");
  Dims dims;
  for (const Vector& v : vs) dims.push_back(v.size());
  DenseTensor t(dims);
  Vector& out = t.values();
  out.head(vs[0].size()) = vs[0];
  Index len = vs[0].size();
  for (size_t k = 1; k < vs.size(); ++k) {
    const Vector& v = vs[k];
    for (Index i = v.size() - 1; i >= 0; --i)
      out.segment(i * len, len) = v[i] * out.head(len);
    len *= v.size();
  }
  return t;
}

double inner(const DenseTensor& a, const DenseTensor& b) {
  if (a.dims() != b.dims())
    throw std::invalid_argument("inner product: shape mismatch");
  return a.values().dot(b.values());
}

double frob_norm(const DenseTensor& t) { return t.values().norm(); }

DenseTensor operator+(const DenseTensor& a, const DenseTensor& b) {
  if (a.dims() != b.dims()) throw std::invalid_argument("tensor sum: shape mismatch");
  return DenseTensor(a.dims(), a.values() + b.values());
}

DenseTensor operator-(const DenseTensor& a, const DenseTensor& b) {
  if (a.dims() != b.dims()) throw std::invalid_argument("tensor diff: shape mismatch");
  return DenseTensor(a.dims(), a.values() - b.values());
}

DenseTensor operator*(double s, const DenseTensor& t) {
  return DenseTensor(t.dims(), s * t.values());
}

Matrix kron_chain_skip(const std::vector<Matrix>& mats, int skip) {
  Matrix acc = Matrix::Identity(1, 1);
  for (int k = static_cast<int>(mats.size()) - 1; k >= 0; --k) {
    if (k == skip) continue;
    acc = kron(acc, mats[static_cast<size_t>(k)]);
  }
  return acc;
}

}  // namespace tdesing
