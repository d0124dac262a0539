#include "tdesing/sparse.hpp"

#include <algorithm>
#include <numeric>

namespace tdesing {

std::shared_ptr<const SparsePattern> SparsePattern::create(
    Dims dims, std::vector<std::int32_t> indices) {
  if (dims.empty()) throw std::invalid_argument("pattern order must be >= 1");
  const int d = static_cast<int>(dims.size());
  if (indices.size() % static_cast<size_t>(d) != 0)
    throw std::invalid_argument("index array length not a multiple of order");
  const Index count = static_cast<Index>(indices.size()) / d;

  Dims strides(dims.size());
  Index acc = 1;
  for (size_t k = 0; k < dims.size(); ++k) {
    strides[k] = acc;
    acc *= dims[k];
  }

  std::vector<Index> lin(static_cast<size_t>(count));
  for (Index e = 0; e < count; ++e) {
    Index flat = 0;
    for (int k = 0; k < d; ++k) {
      const std::int32_t i = indices[static_cast<size_t>(e * d + k)];
      if (i < 0 || i >= dims[static_cast<size_t>(k)])
        throw DataError("sparse index out of range");
      flat += i * strides[static_cast<size_t>(k)];
    }
    lin[static_cast<size_t>(e)] = flat;
  }

  std::vector<Index> order(static_cast<size_t>(count));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return lin[static_cast<size_t>(a)] < lin[static_cast<size_t>(b)];
  });
  for (Index e = 1; e < count; ++e)
    if (lin[static_cast<size_t>(order[static_cast<size_t>(e)])] ==
        lin[static_cast<size_t>(order[static_cast<size_t>(e - 1)])])
      throw DataError("duplicate sparse index");

  auto p = std::make_shared<SparsePattern>();
  p->dims_ = std::move(dims);
  p->count_ = count;
  p->idx_.resize(static_cast<size_t>(count) * static_cast<size_t>(d));
  for (Index e = 0; e < count; ++e) {
    const Index src = order[static_cast<size_t>(e)];
    for (int k = 0; k < d; ++k)
      p->idx_[static_cast<size_t>(e * d + k)] =
          indices[static_cast<size_t>(src * d + k)];
  }

  // runs of equal trailing index (contiguous after the canonical sort)
  Index begin = 0;
  while (begin < count) {
    const std::int32_t t = p->idx_[static_cast<size_t>(begin * d + d - 1)];
    Index end = begin + 1;
    while (end < count && p->idx_[static_cast<size_t>(end * d + d - 1)] == t) ++end;
    p->runs_.push_back({begin, end, t});
    begin = end;
  }
  return p;
}

Index SparsePattern::linear_index(Index e) const {
  Index flat = 0, stride = 1;
  const int d = ndim();
  for (int k = 0; k < d; ++k) {
    flat += index(e, k) * stride;
    stride *= dims_[static_cast<size_t>(k)];
  }
  return flat;
}

DenseTensor densify(const SparseTensor& s) {
  DenseTensor t(s.dims());
  for (Index e = 0; e < s.count(); ++e)
    t.values()[s.pattern->linear_index(e)] = s.values[e];
  return t;
}

namespace {

// Row-contiguous copies: rt[k].col(i) is row i of mats[k].
std::vector<Matrix> transpose_all(const std::vector<const Matrix*>& mats) {
  std::vector<Matrix> rt;
  rt.reserve(mats.size());
  for (const Matrix* m : mats) rt.push_back(m ? m->transpose() : Matrix());
  return rt;
}

// out[a + b*len] += scale * buf[a] * col[b]
inline void expand_acc(const double* buf, Index len, const double* col, Index m,
                       double scale, double* out) {
  for (Index b = 0; b < m; ++b) {
    const double c = scale * col[b];
    double* o = out + b * len;
    for (Index a = 0; a < len; ++a) o[a] += c * buf[a];
  }
}

// Accumulates v * outer(rows of modes[0..m-1] at entry e) into out; `buf`
// and `buf2` are scratch of the output length.
inline void accumulate_outer(const SparsePattern& p, const std::vector<Matrix>& rt,
                             const std::vector<int>& modes, Index e, double v,
                             double* out, Vector& buf, Vector& buf2) {
  const int m = static_cast<int>(modes.size());
  const Matrix& last = rt[static_cast<size_t>(modes[static_cast<size_t>(m - 1)])];
  const double* last_row = last.col(p.index(e, modes[static_cast<size_t>(m - 1)])).data();
  if (m == 1) {
    for (Index b = 0; b < last.rows(); ++b) out[b] += v * last_row[b];
    return;
  }
  const Matrix& first = rt[static_cast<size_t>(modes[0])];
  const double* row0 = first.col(p.index(e, modes[0])).data();
  Index len = first.rows();
  for (Index a = 0; a < len; ++a) buf[a] = row0[a];
  for (int t = 1; t + 1 < m; ++t) {
    const Matrix& mid = rt[static_cast<size_t>(modes[static_cast<size_t>(t)])];
    const double* row = mid.col(p.index(e, modes[static_cast<size_t>(t)])).data();
    const Index mt = mid.rows();
    for (Index b = 0; b < mt; ++b)
      for (Index a = 0; a < len; ++a) buf2[b * len + a] = row[b] * buf[a];
    buf.swap(buf2);
    len *= mt;
  }
  expand_acc(buf.data(), len, last_row, last.rows(), v, out);
}

void check_mats(const SparsePattern& p, const std::vector<const Matrix*>& mats,
                int skip) {
  if (static_cast<int>(mats.size()) != p.ndim())
    throw std::invalid_argument("kernel needs one matrix per mode");
  for (int k = 0; k < p.ndim(); ++k)
    if (k != skip &&
        mats[static_cast<size_t>(k)]->rows() != p.dims()[static_cast<size_t>(k)])
      throw std::invalid_argument("kernel matrix rows must equal mode size");
}

}  // namespace

DenseTensor contract_all(const SparsePattern& p, const Vector& values,
                         const std::vector<const Matrix*>& mats) {
  check_mats(p, mats, -1);
  if (values.size() != p.count())
    throw std::invalid_argument("value count does not match pattern");
  const int d = p.ndim();
  Dims out_dims;
  for (const Matrix* m : mats) out_dims.push_back(m->cols());
  DenseTensor out(out_dims);
  const std::vector<Matrix> rt = transpose_all(mats);

  if (d == 1) {
    for (Index e = 0; e < p.count(); ++e)
      out.values() += values[e] * rt[0].col(p.index(e, 0));
    return out;
  }

  std::vector<int> lead_modes;
  for (int k = 0; k + 1 < d; ++k) lead_modes.push_back(k);
  Index plead = 1;
  for (int k : lead_modes) plead *= out_dims[static_cast<size_t>(k)];
  Vector acc(plead), buf(plead), buf2(plead);
  const Index m_last = out_dims[static_cast<size_t>(d - 1)];

  for (const SparsePattern::Run& run : p.runs()) {
    acc.setZero();
    for (Index e = run.begin; e < run.end; ++e)
      accumulate_outer(p, rt, lead_modes, e, values[e], acc.data(), buf, buf2);
    expand_acc(acc.data(), plead, rt[static_cast<size_t>(d - 1)].col(run.trailing).data(),
               m_last, 1.0, out.values().data());
  }
  return out;
}

Matrix contract_skip(const SparsePattern& p, const Vector& values, int k,
                     const std::vector<const Matrix*>& mats) {
  const int d = p.ndim();
  if (k < 0 || k >= d) throw std::invalid_argument("mode index out of range");
  check_mats(p, mats, k);
  if (values.size() != p.count())
    throw std::invalid_argument("value count does not match pattern");

  Index pcols = 1;
  for (int j = 0; j < d; ++j)
    if (j != k) pcols *= mats[static_cast<size_t>(j)]->cols();
  const Index nk = p.dims()[static_cast<size_t>(k)];

  std::vector<const Matrix*> used = mats;
  used[static_cast<size_t>(k)] = nullptr;
  const std::vector<Matrix> rt = transpose_all(used);

  // accumulate into the transpose so each update hits a contiguous column
  Matrix tt = Matrix::Zero(pcols, nk);

  if (d == 1) {
    for (Index e = 0; e < p.count(); ++e) tt(0, p.index(e, 0)) += values[e];
    return tt.transpose();
  }

  std::vector<int> other;
  for (int j = 0; j < d; ++j)
    if (j != k) other.push_back(j);
  Vector buf(pcols), buf2(pcols);

  if (k == d - 1) {
    // kept mode is the trailing one: accumulate per run, flush once
    Vector acc(pcols);
    for (const SparsePattern::Run& run : p.runs()) {
      acc.setZero();
      for (Index e = run.begin; e < run.end; ++e)
        accumulate_outer(p, rt, other, e, values[e], acc.data(), buf, buf2);
      tt.col(run.trailing) += acc;
    }
  } else {
    for (Index e = 0; e < p.count(); ++e)
      accumulate_outer(p, rt, other, e, values[e], tt.col(p.index(e, k)).data(),
                       buf, buf2);
  }
  return tt.transpose();
}

Vector sample_tucker(const SparsePattern& p, const DenseTensor& core,
                     const std::vector<const Matrix*>& factors) {
  const int d = p.ndim();
  if (core.ndim() != d)
    throw std::invalid_argument("core order does not match pattern");
  check_mats(p, factors, -1);
  for (int k = 0; k < d; ++k)
    if (factors[static_cast<size_t>(k)]->cols() != core.dim(k))
      throw std::invalid_argument("factor cols must equal core dims");

  Vector out(p.count());
  const std::vector<Matrix> rt = transpose_all(factors);

  if (d == 1) {
    for (Index e = 0; e < p.count(); ++e)
      out[e] = core.values().dot(rt[0].col(p.index(e, 0)));
    return out;
  }

  const Index plead = core.size() / core.dim(d - 1);
  Vector w(plead), buf(plead), buf2(plead);
  for (const SparsePattern::Run& run : p.runs()) {
    // trailing-mode contraction shared by the whole run
    const double* rowd = rt[static_cast<size_t>(d - 1)].col(run.trailing).data();
    w.setZero();
    for (Index b = 0; b < core.dim(d - 1); ++b) {
      const double c = rowd[b];
      const double* g = core.values().data() + b * plead;
      for (Index a = 0; a < plead; ++a) w[a] += c * g[a];
    }
    for (Index e = run.begin; e < run.end; ++e) {
      const double* cur = w.data();
      Index len = plead;
      for (int j = d - 2; j >= 1; --j) {
        const double* row = rt[static_cast<size_t>(j)].col(p.index(e, j)).data();
        const Index mj = rt[static_cast<size_t>(j)].rows();
        const Index stride = len / mj;
        for (Index a = 0; a < stride; ++a) buf2[a] = 0.0;
        for (Index b = 0; b < mj; ++b) {
          const double c = row[b];
          const double* src = cur + b * stride;
          for (Index a = 0; a < stride; ++a) buf2[a] += c * src[a];
        }
        buf.swap(buf2);
        cur = buf.data();
        len = stride;
      }
      const double* row0 = rt[0].col(p.index(e, 0)).data();
      double s = 0.0;
      for (Index a = 0; a < len; ++a) s += row0[a] * cur[a];
      out[e] = s;
    }
  }
  return out;
}

}  // namespace tdesing
