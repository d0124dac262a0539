#include "tdesing/tucker_geometry.hpp"

#include "tdesing/linalg.hpp"
#include "tdesing/rng.hpp"

#include <Eigen/LU>

#include <atomic>
#include <cmath>

namespace tdesing {

namespace {

std::atomic<std::uint64_t> g_point_ids{1};

std::vector<const Matrix*> mat_ptrs(const std::vector<Matrix>& ms) {
  std::vector<const Matrix*> p;
  p.reserve(ms.size());
  for (const Matrix& m : ms) p.push_back(&m);
  return p;
}

// B * F_k^{-1} via the cached Cholesky (F_k symmetric).
Matrix solve_right(const Eigen::LLT<Matrix>& llt, const Matrix& b) {
  return llt.solve(b.transpose()).transpose();
}

Matrix project_out(const Matrix& u, const Matrix& b) {
  return b - u * (u.transpose() * b);
}

}  // namespace

// ---------------------------------------------------------------------------
// EuclideanTensor helpers
// ---------------------------------------------------------------------------

const Dims& euclidean_dims(const EuclideanTensor& t) {
  if (const DenseTensor* d = std::get_if<DenseTensor>(&t)) return d->dims();
  return std::get<SparseTensor>(t).dims();
}

double euclidean_norm(const EuclideanTensor& t) {
  if (const DenseTensor* d = std::get_if<DenseTensor>(&t)) return frob_norm(*d);
  return std::get<SparseTensor>(t).values.norm();
}

DenseTensor euclidean_contract_all(const EuclideanTensor& t,
                                   const std::vector<const Matrix*>& mats) {
  if (const DenseTensor* d = std::get_if<DenseTensor>(&t)) {
    DenseTensor acc = *d;
    for (int k = 0; k < acc.ndim(); ++k)
      acc = mode_product(acc, k, mats[static_cast<size_t>(k)]->transpose());
    return acc;
  }
  const SparseTensor& s = std::get<SparseTensor>(t);
  return contract_all(*s.pattern, s.values, mats);
}

Matrix euclidean_contract_skip(const EuclideanTensor& t, int k,
                               const std::vector<const Matrix*>& mats) {
  if (const DenseTensor* d = std::get_if<DenseTensor>(&t)) {
    DenseTensor acc = *d;
    for (int j = 0; j < acc.ndim(); ++j)
      if (j != k) acc = mode_product(acc, j, mats[static_cast<size_t>(j)]->transpose());
    return unfold(acc, k);
  }
  const SparseTensor& s = std::get<SparseTensor>(t);
  return contract_skip(*s.pattern, s.values, k, mats);
}

// ---------------------------------------------------------------------------
// Point
// ---------------------------------------------------------------------------

TuckerDesingPoint TuckerDesingPoint::finish(DenseTensor core,
                                            std::vector<Matrix> factors) {
  auto data = std::make_shared<Data>();
  const int d = static_cast<int>(factors.size());
  data->core = std::move(core);
  data->factors = std::move(factors);
  data->core_unfolds.reserve(static_cast<size_t>(d));
  data->ftilde.reserve(static_cast<size_t>(d));
  data->ftilde_llt.reserve(static_cast<size_t>(d));
  for (int k = 0; k < d; ++k) {
    Matrix gk = unfold(data->core, k);
    const Index rk = gk.rows();
    Matrix f = 2.0 * Matrix::Identity(rk, rk) + gk * gk.transpose();
    data->core_unfolds.push_back(std::move(gk));
    data->ftilde_llt.emplace_back(f);
    data->ftilde.push_back(std::move(f));
  }
  data->id = g_point_ids.fetch_add(1);
  return TuckerDesingPoint(std::move(data));
}

TuckerDesingPoint TuckerDesingPoint::make(DenseTensor core,
                                          std::vector<Matrix> factors) {
  const int d = static_cast<int>(factors.size());
  if (core.ndim() != d)
    throw std::invalid_argument("core order must match factor count");
  for (int k = 0; k < d; ++k) {
    const Matrix& u = factors[static_cast<size_t>(k)];
    if (u.cols() != core.dim(k))
      throw std::invalid_argument("factor cols must match core dims");
    if (u.cols() > u.rows())
      throw std::invalid_argument("rank exceeds ambient dimension");
  }
  for (int k = 0; k < d; ++k) {
    ThinQr qr = thin_qr(factors[static_cast<size_t>(k)]);
    factors[static_cast<size_t>(k)] = std::move(qr.q);
    core = mode_product(core, k, qr.r);
  }
  return finish(std::move(core), std::move(factors));
}

TuckerDesingPoint TuckerDesingPoint::from_orthonormal(DenseTensor core,
                                                      std::vector<Matrix> factors) {
  const int d = static_cast<int>(factors.size());
  if (core.ndim() != d)
    throw std::invalid_argument("core order must match factor count");
  for (int k = 0; k < d; ++k) {
    const Matrix& u = factors[static_cast<size_t>(k)];
    if (u.cols() != core.dim(k))
      throw std::invalid_argument("factor cols must match core dims");
    if (u.cols() > u.rows())
      throw std::invalid_argument("rank exceeds ambient dimension");
    const double dev = (u.transpose() * u - Matrix::Identity(u.cols(), u.cols()))
                           .cwiseAbs()
                           .maxCoeff();
    if (dev > 1e-8)
      throw std::invalid_argument("factor is not orthonormal");
  }
  return finish(std::move(core), std::move(factors));
}

Dims TuckerDesingPoint::ranks() const { return d_->core.dims(); }

Dims TuckerDesingPoint::ambient_dims() const {
  Dims n;
  for (const Matrix& u : d_->factors) n.push_back(u.rows());
  return n;
}

// ---------------------------------------------------------------------------
// Tangent
// ---------------------------------------------------------------------------

TuckerDesingTangent TuckerDesingTangent::from_base(
    std::shared_ptr<const TuckerDesingPoint::Data> base, DenseTensor core_dot,
    std::vector<Matrix> factor_dots) {
  TuckerDesingTangent t;
  t.core_dot_ = std::move(core_dot);
  t.factor_dots_ = std::move(factor_dots);
  t.base_ = std::move(base);
  return t;
}

TuckerDesingTangent TuckerDesingTangent::unchecked(const TuckerDesingPoint& base,
                                                   DenseTensor core_dot,
                                                   std::vector<Matrix> factor_dots) {
  return from_base(base.data(), std::move(core_dot), std::move(factor_dots));
}

TuckerDesingTangent TuckerDesingTangent::make(const TuckerDesingPoint& base,
                                              DenseTensor core_dot,
                                              std::vector<Matrix> factor_dots) {
  if (core_dot.dims() != base.core().dims())
    throw std::invalid_argument("tangent core shape mismatch");
  if (factor_dots.size() != base.factors().size())
    throw std::invalid_argument("tangent factor count mismatch");
  for (int k = 0; k < base.ndim(); ++k) {
    const Matrix& u = base.factor(k);
    const Matrix& du = factor_dots[static_cast<size_t>(k)];
    if (du.rows() != u.rows() || du.cols() != u.cols())
      throw std::invalid_argument("tangent factor shape mismatch");
    const double scale = std::max(1.0, du.norm());
    if ((u.transpose() * du).cwiseAbs().maxCoeff() > 1e-8 * scale)
      throw std::invalid_argument("tangent factor not orthogonal to base factor");
  }
  return unchecked(base, std::move(core_dot), std::move(factor_dots));
}

TuckerDesingTangent TuckerDesingTangent::zero(const TuckerDesingPoint& base) {
  std::vector<Matrix> dots;
  for (const Matrix& u : base.factors()) dots.push_back(Matrix::Zero(u.rows(), u.cols()));
  return unchecked(base, DenseTensor(base.core().dims()), std::move(dots));
}

static void check_same_base(const TuckerDesingTangent& a, const TuckerDesingTangent& b) {
  if (a.base()->id != b.base()->id)
    throw std::invalid_argument("tangent vectors belong to different base points");
}

double tangent_inner(const TuckerDesingTangent& xi, const TuckerDesingTangent& eta) {
  check_same_base(xi, eta);
  const auto& base = *xi.base();
  double s = xi.core_dot().values().dot(eta.core_dot().values());
  for (size_t k = 0; k < base.factors.size(); ++k) {
    const Matrix& f = base.ftilde[k];
    s += (xi.factor_dots()[k].transpose() * (eta.factor_dots()[k] * f)).trace();
  }
  return s;
}

double tangent_norm(const TuckerDesingTangent& xi) {
  return std::sqrt(std::max(0.0, tangent_inner(xi, xi)));
}

TuckerDesingTangent tangent_scale(double a, const TuckerDesingTangent& xi) {
  DenseTensor core(xi.core_dot().dims(), a * xi.core_dot().values());
  std::vector<Matrix> dots;
  dots.reserve(xi.factor_dots().size());
  for (const Matrix& m : xi.factor_dots()) dots.push_back(a * m);
  return TuckerDesingTangent::from_base(xi.base(), std::move(core), std::move(dots));
}

TuckerDesingTangent tangent_axpy(double a, const TuckerDesingTangent& xi,
                                 const TuckerDesingTangent& eta) {
  check_same_base(xi, eta);
  DenseTensor core(xi.core_dot().dims(),
                   a * xi.core_dot().values() + eta.core_dot().values());
  std::vector<Matrix> dots;
  dots.reserve(xi.factor_dots().size());
  for (size_t k = 0; k < xi.factor_dots().size(); ++k)
    dots.push_back(a * xi.factor_dots()[k] + eta.factor_dots()[k]);
  return TuckerDesingTangent::from_base(xi.base(), std::move(core), std::move(dots));
}

// ---------------------------------------------------------------------------
// Dense embeddings (test scale)
// ---------------------------------------------------------------------------

DenseTensor phi(const TuckerDesingPoint& x) {
  DenseTensor t = x.core();
  for (int k = 0; k < x.ndim(); ++k) t = mode_product(t, k, x.factor(k));
  return t;
}

std::pair<DenseTensor, std::vector<Matrix>> embed(const TuckerDesingPoint& x) {
  std::vector<Matrix> projectors;
  for (const Matrix& u : x.factors())
    projectors.push_back(Matrix::Identity(u.rows(), u.rows()) - u * u.transpose());
  return {phi(x), std::move(projectors)};
}

AmbientVector embed_tangent(const TuckerDesingTangent& xi) {
  const auto& b = *xi.base();
  const int d = static_cast<int>(b.factors.size());
  DenseTensor xdot = xi.core_dot();
  for (int k = 0; k < d; ++k) xdot = mode_product(xdot, k, b.factors[static_cast<size_t>(k)]);
  for (int k = 0; k < d; ++k) {
    DenseTensor term = b.core;
    for (int j = 0; j < d; ++j) {
      const Matrix& m = (j == k) ? xi.factor_dots()[static_cast<size_t>(j)]
                                 : b.factors[static_cast<size_t>(j)];
      term = mode_product(term, j, m);
    }
    xdot = xdot + term;
  }
  std::vector<Matrix> pdots;
  for (int k = 0; k < d; ++k) {
    const Matrix& u = b.factors[static_cast<size_t>(k)];
    const Matrix& du = xi.factor_dots()[static_cast<size_t>(k)];
    pdots.push_back(-(du * u.transpose() + u * du.transpose()));
  }
  return {std::move(xdot), std::move(pdots)};
}

// ---------------------------------------------------------------------------
// Projection / gradient
// ---------------------------------------------------------------------------

TuckerDesingTangent project_tangent(const TuckerDesingPoint& x, const AmbientVector& v) {
  const int d = x.ndim();
  const auto mats = mat_ptrs(x.factors());
  EuclideanTensor a = v.tensor_part;
  DenseTensor core_dot = euclidean_contract_all(a, mats);
  std::vector<Matrix> dots;
  for (int k = 0; k < d; ++k) {
    const Matrix& u = x.factor(k);
    Matrix inner = euclidean_contract_skip(a, k, mats) * x.core_unfold(k).transpose();
    if (!v.sym_parts.empty()) {
      const Matrix& ak = v.sym_parts[static_cast<size_t>(k)];
      inner.noalias() -= (ak + ak.transpose()) * u;
    }
    dots.push_back(project_out(u, solve_right(x.metric_factor_llt(k), inner)));
  }
  return TuckerDesingTangent::unchecked(x, std::move(core_dot), std::move(dots));
}

TuckerDesingTangent riem_grad(const TuckerDesingPoint& x, const EuclideanTensor& egrad) {
  const int d = x.ndim();
  const auto mats = mat_ptrs(x.factors());
  DenseTensor core_dot = euclidean_contract_all(egrad, mats);
  std::vector<Matrix> dots;
  for (int k = 0; k < d; ++k) {
    Matrix inner = euclidean_contract_skip(egrad, k, mats) * x.core_unfold(k).transpose();
    dots.push_back(project_out(x.factor(k), solve_right(x.metric_factor_llt(k), inner)));
  }
  return TuckerDesingTangent::unchecked(x, std::move(core_dot), std::move(dots));
}

// ---------------------------------------------------------------------------
// Retraction / transport
// ---------------------------------------------------------------------------

TuckerDesingPoint retract(const TuckerDesingPoint& x, const TuckerDesingTangent& xi,
                          double s) {
  if (xi.base()->id != x.id())
    throw std::invalid_argument("tangent does not belong to this base point");
  const int d = x.ndim();
  std::vector<Matrix> new_factors;
  new_factors.reserve(static_cast<size_t>(d));
  for (int k = 0; k < d; ++k)
    new_factors.push_back(thin_qr(x.factor(k) + s * xi.factor_dot(k)).q);

  // coefficients of X + s*Xdot in the new factor basis
  std::vector<Matrix> a(static_cast<size_t>(d)), b(static_cast<size_t>(d));
  for (int k = 0; k < d; ++k) {
    a[static_cast<size_t>(k)] = new_factors[static_cast<size_t>(k)].transpose() * x.factor(k);
    b[static_cast<size_t>(k)] = new_factors[static_cast<size_t>(k)].transpose() * xi.factor_dot(k);
  }
  DenseTensor core(x.core().dims(), x.core().values() + s * xi.core_dot().values());
  for (int k = 0; k < d; ++k) core = mode_product(core, k, a[static_cast<size_t>(k)]);
  for (int k = 0; k < d; ++k) {
    DenseTensor term = x.core();
    for (int j = 0; j < d; ++j)
      term = mode_product(term, j,
                          j == k ? b[static_cast<size_t>(j)] : a[static_cast<size_t>(j)]);
    core = core + (s * term);
  }
  return TuckerDesingPoint::from_orthonormal(std::move(core), std::move(new_factors));
}

TuckerDesingTangent transport(const TuckerDesingPoint& to, const TuckerDesingTangent& xi) {
  const auto& old = *xi.base();
  const int d = to.ndim();

  // small cross-Gram blocks between the new and old frames
  std::vector<Matrix> a(static_cast<size_t>(d)), b(static_cast<size_t>(d));
  for (int k = 0; k < d; ++k) {
    a[static_cast<size_t>(k)] =
        to.factor(k).transpose() * old.factors[static_cast<size_t>(k)];
    b[static_cast<size_t>(k)] =
        to.factor(k).transpose() * xi.factor_dots()[static_cast<size_t>(k)];
  }

  // Gdot_new = Xdot_old x_j U_new_j^T, assembled from the d+1 Tucker terms
  DenseTensor core_dot = xi.core_dot();
  for (int k = 0; k < d; ++k)
    core_dot = mode_product(core_dot, k, a[static_cast<size_t>(k)]);
  for (int k = 0; k < d; ++k) {
    DenseTensor term = old.core;
    for (int j = 0; j < d; ++j)
      term = mode_product(term, j,
                          j == k ? b[static_cast<size_t>(j)] : a[static_cast<size_t>(j)]);
    core_dot = core_dot + term;
  }

  std::vector<Matrix> dots;
  for (int k = 0; k < d; ++k) {
    const Matrix& u_new = to.factor(k);
    const Matrix& u_old = old.factors[static_cast<size_t>(k)];
    const Matrix& du_old = xi.factor_dots()[static_cast<size_t>(k)];

    // M_k = (Xdot_old x_{j != k} U_new_j^T)_(k), term by term
    Matrix m = Matrix::Zero(u_new.rows(), to.core_unfold(k).cols());
    {
      DenseTensor t = xi.core_dot();
      for (int j = 0; j < d; ++j)
        if (j != k) t = mode_product(t, j, a[static_cast<size_t>(j)]);
      m.noalias() += u_old * unfold(t, k);
    }
    for (int kp = 0; kp < d; ++kp) {
      DenseTensor t = old.core;
      for (int j = 0; j < d; ++j) {
        if (j == k) continue;
        t = mode_product(t, j,
                         j == kp ? b[static_cast<size_t>(j)] : a[static_cast<size_t>(j)]);
      }
      m.noalias() += (kp == k ? du_old : u_old) * unfold(t, k);
    }

    // ambient symmetric part Pdot_old applied to the new factor
    Matrix pdot_u = -(du_old * (u_old.transpose() * u_new) +
                      u_old * (du_old.transpose() * u_new));
    Matrix inner = m * to.core_unfold(k).transpose() - 2.0 * pdot_u;
    dots.push_back(project_out(u_new, solve_right(to.metric_factor_llt(k), inner)));
  }
  return TuckerDesingTangent::unchecked(to, std::move(core_dot), std::move(dots));
}

// ---------------------------------------------------------------------------
// Hessian
// ---------------------------------------------------------------------------

TuckerDesingTangent hess_apply(const TuckerDesingPoint& x, const TuckerDesingTangent& xi,
                               const EuclideanTensor& egrad,
                               const EuclideanTensor& ehess_of_xdot) {
  if (xi.base()->id != x.id())
    throw std::invalid_argument("tangent does not belong to this base point");
  const int d = x.ndim();
  const auto mats = mat_ptrs(x.factors());

  // unfolded gradient contractions reused across terms
  std::vector<Matrix> mk(static_cast<size_t>(d));   // (egrad)_(k) V_k
  std::vector<Matrix> bk(static_cast<size_t>(d));   // (egrad)_(k) V_k G_(k)^T F_k^{-1}
  for (int k = 0; k < d; ++k) {
    mk[static_cast<size_t>(k)] = euclidean_contract_skip(egrad, k, mats);
    bk[static_cast<size_t>(k)] = solve_right(
        x.metric_factor_llt(k), mk[static_cast<size_t>(k)] * x.core_unfold(k).transpose());
  }

  const DenseTensor gdot = xi.core_dot();
  std::vector<Matrix> gdot_unfolds;
  for (int k = 0; k < d; ++k) gdot_unfolds.push_back(unfold(gdot, k));

  // curvature part of the core parameter
  DenseTensor core_hat(x.core().dims());
  for (int k = 0; k < d; ++k) {
    std::vector<const Matrix*> with_dot = mats;
    with_dot[static_cast<size_t>(k)] = &xi.factor_dot(k);
    core_hat = core_hat + euclidean_contract_all(egrad, with_dot);
    core_hat = core_hat +
               mode_product(x.core(), k,
                            xi.factor_dot(k).transpose() * bk[static_cast<size_t>(k)]);
  }
  core_hat = -1.0 * core_hat;

  // curvature part of the factor parameters
  std::vector<Matrix> dots(static_cast<size_t>(d));
  for (int k = 0; k < d; ++k) {
    Matrix w = Matrix::Zero(mk[static_cast<size_t>(k)].rows(),
                            mk[static_cast<size_t>(k)].cols());
    for (int j = 0; j < d; ++j) {
      if (j == k) continue;
      std::vector<const Matrix*> with_dot = mats;
      with_dot[static_cast<size_t>(j)] = &xi.factor_dot(j);
      w.noalias() += euclidean_contract_skip(egrad, k, with_dot);
    }
    const Matrix& gk = x.core_unfold(k);
    const Matrix& gdk = gdot_unfolds[static_cast<size_t>(k)];
    Matrix inner = w * gk.transpose() + mk[static_cast<size_t>(k)] * gdk.transpose();
    inner.noalias() -=
        mk[static_cast<size_t>(k)] *
        (gk.transpose() * x.metric_factor_llt(k).solve(gk * gdk.transpose()));
    dots[static_cast<size_t>(k)] =
        project_out(x.factor(k), solve_right(x.metric_factor_llt(k), inner));
  }

  // Gauss-Newton-like part from the Euclidean Hessian along Xdot
  DenseTensor core_breve = euclidean_contract_all(ehess_of_xdot, mats);
  for (int k = 0; k < d; ++k) {
    Matrix inner = euclidean_contract_skip(ehess_of_xdot, k, mats) *
                   x.core_unfold(k).transpose();
    dots[static_cast<size_t>(k)] +=
        project_out(x.factor(k), solve_right(x.metric_factor_llt(k), inner));
  }

  DenseTensor core_out(x.core().dims(), core_hat.values() + core_breve.values());
  return TuckerDesingTangent::unchecked(x, std::move(core_out), std::move(dots));
}

// ---------------------------------------------------------------------------
// Stationarity
// ---------------------------------------------------------------------------

double first_order_residual(const TuckerDesingPoint& x, const EuclideanTensor& egrad) {
  const auto mats = mat_ptrs(x.factors());
  double res = frob_norm(euclidean_contract_all(egrad, mats));
  for (int k = 0; k < x.ndim(); ++k) {
    const Matrix m =
        euclidean_contract_skip(egrad, k, mats) * x.core_unfold(k).transpose();
    res = std::max(res, m.norm());
  }
  return res;
}

Vector tangent_samples(const TuckerDesingTangent& xi, const SparsePattern& p) {
  const auto& b = *xi.base();
  const auto mats = mat_ptrs(b.factors);
  Vector out = sample_tucker(p, xi.core_dot(), mats);
  for (int k = 0; k < static_cast<int>(b.factors.size()); ++k) {
    std::vector<const Matrix*> with_dot = mats;
    with_dot[static_cast<size_t>(k)] = &xi.factor_dots()[static_cast<size_t>(k)];
    out += sample_tucker(p, b.core, with_dot);
  }
  return out;
}

double second_order_quadform(const TuckerDesingPoint& x, const TuckerDesingTangent& xi,
                             const EuclideanTensor& egrad,
                             const EuclideanTensor& ehess_of_xdot,
                             double stationarity_tol) {
  if (first_order_residual(x, egrad) > stationarity_tol)
    throw std::invalid_argument(
        "second_order_quadform requires a first-order stationary base point");
  const int d = x.ndim();

  double quad = 0.0;
  if (const DenseTensor* dense = std::get_if<DenseTensor>(&ehess_of_xdot)) {
    const AmbientVector amb = embed_tangent(xi);
    quad += inner(*dense, amb.tensor_part);
  } else {
    const SparseTensor& s = std::get<SparseTensor>(ehess_of_xdot);
    quad += s.values.dot(tangent_samples(xi, *s.pattern));
  }

  const auto mats = mat_ptrs(x.factors());
  for (int k = 0; k < d; ++k) {
    for (int j = 0; j < d; ++j) {
      if (j == k) continue;
      std::vector<const Matrix*> with_dots = mats;
      with_dots[static_cast<size_t>(k)] = &xi.factor_dot(k);
      with_dots[static_cast<size_t>(j)] = &xi.factor_dot(j);
      quad += inner(euclidean_contract_all(egrad, with_dots), x.core());
    }
  }
  return quad;
}

Index manifold_dim(const Dims& ambient, const Dims& ranks) {
  if (ambient.size() != ranks.size())
    throw std::invalid_argument("dimension/rank arity mismatch");
  Index dim = product(ranks);
  for (size_t k = 0; k < ranks.size(); ++k) dim += ranks[k] * (ambient[k] - ranks[k]);
  return dim;
}

bool matrix_desing_tangent_check(const TuckerDesingPoint& x, const AmbientVector& v,
                                 int k, double tol) {
  const auto [xt, projectors] = embed(x);
  const Matrix& p = projectors[static_cast<size_t>(k)];
  const DenseTensor& a = v.tensor_part;
  Matrix ak = v.sym_parts.empty() ? Matrix::Zero(p.rows(), p.cols())
                                  : v.sym_parts[static_cast<size_t>(k)];

  const double scale_a = std::max(1.0, frob_norm(a));
  const double scale_p = std::max(1.0, ak.norm());

  const double r_sym = (ak - ak.transpose()).norm();
  const double r_proj = (ak * p + p * ak - ak).norm();
  const DenseTensor coupling = mode_product(a, k, p) + mode_product(xt, k, ak);
  const double r_couple = frob_norm(coupling);

  return r_sym <= tol * scale_p && r_proj <= tol * scale_p &&
         r_couple <= tol * std::max(scale_a, frob_norm(xt) * scale_p);
}

// ---------------------------------------------------------------------------
// Tangent cone
// ---------------------------------------------------------------------------

DenseTensor cone_element(const TangentConeElement& e) {
  const int d = static_cast<int>(e.base_factors.size());
  for (int k = 0; k < d; ++k) {
    const Matrix& ub = e.base_factors[static_cast<size_t>(k)];
    const Matrix& u1 = e.u1[static_cast<size_t>(k)];
    const Matrix& u2 = e.u2[static_cast<size_t>(k)];
    Matrix all(ub.rows(), ub.cols() + u1.cols() + u2.cols());
    all << ub, u1, u2;
    if (all.cols() > all.rows())
      throw std::invalid_argument("cone element: too many block columns");
    const double dev =
        (all.transpose() * all - Matrix::Identity(all.cols(), all.cols()))
            .cwiseAbs()
            .maxCoeff();
    if (dev > 1e-8)
      throw std::invalid_argument("cone element: blocks are not orthonormal");
    if (e.c.dim(k) != ub.cols() + u1.cols())
      throw std::invalid_argument("cone element: C dims mismatch");
    if (e.r2[static_cast<size_t>(k)].rows() != u2.cols() ||
        e.r2[static_cast<size_t>(k)].cols() != e.base_core.dim(k))
      throw std::invalid_argument("cone element: R2 shape mismatch");
  }

  DenseTensor v = e.c;
  for (int k = 0; k < d; ++k) {
    const Matrix& ub = e.base_factors[static_cast<size_t>(k)];
    const Matrix& u1 = e.u1[static_cast<size_t>(k)];
    Matrix w(ub.rows(), ub.cols() + u1.cols());
    w << ub, u1;
    v = mode_product(v, k, w);
  }
  for (int k = 0; k < d; ++k) {
    DenseTensor term = e.base_core;
    for (int j = 0; j < d; ++j) {
      const Matrix m = (j == k)
                           ? Matrix(e.u2[static_cast<size_t>(j)] * e.r2[static_cast<size_t>(j)])
                           : e.base_factors[static_cast<size_t>(j)];
      term = mode_product(term, j, m);
    }
    v = v + term;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Spurious stationary instance
// ---------------------------------------------------------------------------

DenseTensor SpuriousStationaryInstance::egrad() const { return outer(dirs); }

TangentConeElement SpuriousStationaryInstance::descent_cone_element() const {
  const int d = x.ndim();
  const Dims r = x.ranks();
  const Dims n = x.ambient_dims();

  TangentConeElement e;
  // thin base of phi(x): split the core into its own thin Tucker pieces
  std::vector<Matrix> ub_in_core(static_cast<size_t>(d));
  Dims rb(static_cast<size_t>(d));
  {
    DenseTensor core = x.core();
    std::vector<Matrix> w(static_cast<size_t>(d));
    for (int k = 0; k < d; ++k) {
      ThinSvd svd = thin_svd(unfold(core, k));
      Index rk = 0;
      for (Index i = 0; i < svd.s.size(); ++i)
        if (svd.s(i) > 1e-10 * svd.s(0)) ++rk;
      rb[static_cast<size_t>(k)] = rk;
      w[static_cast<size_t>(k)] = svd.u.leftCols(rk);
    }
    e.base_core = core;
    for (int k = 0; k < d; ++k) {
      e.base_core = mode_product(e.base_core, k, w[static_cast<size_t>(k)].transpose());
      ub_in_core[static_cast<size_t>(k)] = w[static_cast<size_t>(k)];
    }
  }

  double prod_norm = 1.0;
  for (const Vector& v : dirs) prod_norm *= v.norm();

  Dims c_pos(static_cast<size_t>(d));
  for (int k = 0; k < d; ++k) {
    const Matrix thin_factor = x.factor(k) * ub_in_core[static_cast<size_t>(k)];
    const Vector vhat = dirs[static_cast<size_t>(k)].normalized();
    const Index nk = n[static_cast<size_t>(k)];
    const Index rbk = rb[static_cast<size_t>(k)];
    Matrix m(nk, nk);
    m.leftCols(rbk) = thin_factor;
    m.col(rbk) = vhat;
    m.rightCols(nk - rbk - 1) =
        random_gaussian_matrix(nk, nk - rbk - 1, 0x5eedull + static_cast<std::uint64_t>(k));
    Matrix q = thin_qr(m).q;
    e.base_factors.push_back(thin_factor);
    e.u1.push_back(q.middleCols(rbk, r[static_cast<size_t>(k)] - rbk));
    e.u2.push_back(q.rightCols(nk - r[static_cast<size_t>(k)]));
    e.r2.push_back(Matrix::Zero(nk - r[static_cast<size_t>(k)], rbk));
    c_pos[static_cast<size_t>(k)] = rbk;  // the vhat column inside [Ub U1]
  }

  Dims c_dims = r;
  DenseTensor c(c_dims);
  c(std::span<const Index>(c_pos.data(), c_pos.size())) = -prod_norm;
  e.c = std::move(c);
  return e;
}

SpuriousStationaryInstance spurious_stationary_instance(const Dims& dims,
                                                        const Dims& rank,
                                                        const Dims& rank_under,
                                                        std::uint64_t seed) {
  const int d = static_cast<int>(dims.size());
  if (rank.size() != dims.size() || rank_under.size() != dims.size())
    throw std::invalid_argument("rank arity mismatch");
  bool some_slack = false;
  for (int k = 0; k < d; ++k) {
    if (rank_under[static_cast<size_t>(k)] >= rank[static_cast<size_t>(k)] ||
        rank[static_cast<size_t>(k)] > dims[static_cast<size_t>(k)] ||
        rank_under[static_cast<size_t>(k)] < 1)
      throw std::invalid_argument("infeasible rank configuration");
    if (rank[static_cast<size_t>(k)] < dims[static_cast<size_t>(k)]) some_slack = true;
  }
  if (!some_slack)
    throw std::invalid_argument("need at least one mode with r_k < n_k");

  Rng rng(seed);
  std::vector<Matrix> factors;
  for (int k = 0; k < d; ++k)
    factors.push_back(random_stiefel(dims[static_cast<size_t>(k)],
                                     rank[static_cast<size_t>(k)],
                                     rng.split(static_cast<std::uint64_t>(k)).next_u64()));

  // core with exact deficient Tucker rank
  DenseTensor core;
  for (int attempt = 0;; ++attempt) {
    DenseTensor small = random_gaussian(
        rank_under, rng.split(100 + static_cast<std::uint64_t>(attempt)).next_u64());
    DenseTensor lifted = small;
    std::vector<Matrix> mix;
    for (int k = 0; k < d; ++k) {
      mix.push_back(random_stiefel(
          rank[static_cast<size_t>(k)], rank_under[static_cast<size_t>(k)],
          rng.split(200 + static_cast<std::uint64_t>(attempt * d + k)).next_u64()));
      lifted = mode_product(lifted, k, mix.back());
    }
    if (tucker_rank(lifted) == rank_under) {
      core = std::move(lifted);
      break;
    }
    if (attempt > 16) throw NumericalError("failed to build a rank-deficient core");
  }

  SpuriousStationaryInstance inst;
  inst.x = TuckerDesingPoint::from_orthonormal(std::move(core), std::move(factors));

  const Dims rb = tucker_rank(inst.x.core());
  for (int k = 0; k < d; ++k) {
    const Index nk = dims[static_cast<size_t>(k)];
    const Index rk = rank[static_cast<size_t>(k)];
    Matrix span_block;
    if (rk < nk) {
      span_block = inst.x.factor(k);
    } else {
      // r_k == n_k: direction must escape the active thin factor instead
      ThinSvd svd = thin_svd(unfold(inst.x.core(), k));
      span_block = inst.x.factor(k) * svd.u.leftCols(rb[static_cast<size_t>(k)]);
    }
    Vector v;
    for (int attempt = 0;; ++attempt) {
      Vector w(nk);
      Rng sub = rng.split(300 + static_cast<std::uint64_t>(k * 31 + attempt));
      for (Index i = 0; i < nk; ++i) w[i] = sub.normal();
      v = w - span_block * (span_block.transpose() * w);
      if (v.norm() > 1e-6) break;
      if (attempt > 16) throw NumericalError("failed to draw an orthogonal direction");
    }
    inst.dirs.push_back(std::move(v));
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Product-space parametrization
// ---------------------------------------------------------------------------

DenseTensor tucker_eval(const TuckerParams& p) {
  DenseTensor t = p.core;
  for (int k = 0; k < t.ndim(); ++k) t = mode_product(t, k, p.factors[static_cast<size_t>(k)]);
  return t;
}

TuckerParams tucker_param_grad(const TuckerParams& p, const EuclideanTensor& egrad) {
  const int d = static_cast<int>(p.factors.size());
  const auto mats = mat_ptrs(p.factors);
  TuckerParams g;
  g.core = euclidean_contract_all(egrad, mats);
  for (int k = 0; k < d; ++k)
    g.factors.push_back(euclidean_contract_skip(egrad, k, mats) *
                        unfold(p.core, k).transpose());
  return g;
}

TuckerParams group_action_apply(const TuckerParams& p, const std::vector<Matrix>& r) {
  const int d = static_cast<int>(p.factors.size());
  if (static_cast<int>(r.size()) != d)
    throw std::invalid_argument("one transform per mode required");
  TuckerParams out;
  out.core = p.core;
  for (int k = 0; k < d; ++k) {
    const Matrix& rk = r[static_cast<size_t>(k)];
    if (rk.rows() != rk.cols() || rk.rows() != p.core.dim(k))
      throw std::invalid_argument("transform shape mismatch");
    if (cond_2(rk) > 1e12)
      throw std::invalid_argument("transform is numerically singular");
    Eigen::PartialPivLU<Matrix> lu(rk);
    out.core = fold(lu.solve(unfold(out.core, k)), k, out.core.dims());
    out.factors.push_back(p.factors[static_cast<size_t>(k)] * rk);
  }
  return out;
}

}  // namespace tdesing
