#pragma once

#include "tdesing/sparse.hpp"
#include "tdesing/tensor.hpp"

#include <Eigen/Cholesky>

#include <memory>
#include <optional>
#include <variant>

namespace tdesing {

/// Euclidean gradient / Hessian-apply carrier: either a dense tensor or a
/// sparse tensor supported on a fixed index set.
using EuclideanTensor = std::variant<DenseTensor, SparseTensor>;

const Dims& euclidean_dims(const EuclideanTensor& t);
double euclidean_norm(const EuclideanTensor& t);
/// C = T x_1 M_1^T x_2 M_2^T ... (full contraction against row-sampled mats).
DenseTensor euclidean_contract_all(const EuclideanTensor& t,
                                   const std::vector<const Matrix*>& mats);
/// Mode-k unfolding of T contracted with M_j on every mode j != k.
Matrix euclidean_contract_skip(const EuclideanTensor& t, int k,
                               const std::vector<const Matrix*>& mats);

// ---------------------------------------------------------------------------
// Points and tangent vectors
// ---------------------------------------------------------------------------

/// Point of the desingularized bounded-Tucker-rank set, held by parameters:
/// a full core G (r_1 x ... x r_d) and one orthonormal factor U_k per mode.
/// The represented pair is (X, P_1..P_d) with X = G x_k U_k and
/// P_k = I - U_k U_k^T; the projectors are never materialized here.
///
/// Immutable; copies share storage. Each point carries a unique identity so
/// tangent vectors can be checked against the base they belong to.
class TuckerDesingPoint {
 public:
  TuckerDesingPoint() = default;

  /// General factory: orthonormalizes the factors by thin QR and absorbs the
  /// triangular parts into the core, leaving the represented tensor
  /// unchanged (to roundoff).
  static TuckerDesingPoint make(DenseTensor core, std::vector<Matrix> factors);

  /// Requires factors that are already orthonormal (checked to 1e-8).
  static TuckerDesingPoint from_orthonormal(DenseTensor core,
                                            std::vector<Matrix> factors);

  int ndim() const { return static_cast<int>(d_->factors.size()); }
  const DenseTensor& core() const { return d_->core; }
  const std::vector<Matrix>& factors() const { return d_->factors; }
  const Matrix& factor(int k) const { return d_->factors[static_cast<size_t>(k)]; }
  Dims ranks() const;
  Dims ambient_dims() const;

  /// Mode-k unfolding of the core.
  const Matrix& core_unfold(int k) const { return d_->core_unfolds[static_cast<size_t>(k)]; }
  /// F_k = 2 I + G_(k) G_(k)^T, the per-mode metric factor.
  const Matrix& metric_factor(int k) const { return d_->ftilde[static_cast<size_t>(k)]; }
  /// Cholesky of F_k (F_k is SPD with eigenvalues >= 2).
  const Eigen::LLT<Matrix>& metric_factor_llt(int k) const {
    return d_->ftilde_llt[static_cast<size_t>(k)];
  }

  std::uint64_t id() const { return d_->id; }
  bool valid() const { return d_ != nullptr; }

  struct Data {
    DenseTensor core;
    std::vector<Matrix> factors;
    std::vector<Matrix> core_unfolds;
    std::vector<Matrix> ftilde;
    std::vector<Eigen::LLT<Matrix>> ftilde_llt;
    std::uint64_t id;
  };
  std::shared_ptr<const Data> data() const { return d_; }

 private:
  explicit TuckerDesingPoint(std::shared_ptr<const Data> d) : d_(std::move(d)) {}
  static TuckerDesingPoint finish(DenseTensor core, std::vector<Matrix> factors);
  std::shared_ptr<const Data> d_;
};

/// Tangent vector at a TuckerDesingPoint, held by parameters
/// (Gdot, Udot_1..Udot_d) with U_k^T Udot_k = 0.
class TuckerDesingTangent {
 public:
  TuckerDesingTangent() = default;

  /// Validates the orthogonality constraints (1e-8 relative).
  static TuckerDesingTangent make(const TuckerDesingPoint& base, DenseTensor core_dot,
                                  std::vector<Matrix> factor_dots);
  /// No validation; for components produced by operations that guarantee
  /// the constraints by construction.
  static TuckerDesingTangent unchecked(const TuckerDesingPoint& base,
                                       DenseTensor core_dot,
                                       std::vector<Matrix> factor_dots);
  static TuckerDesingTangent from_base(std::shared_ptr<const TuckerDesingPoint::Data> base,
                                       DenseTensor core_dot,
                                       std::vector<Matrix> factor_dots);
  static TuckerDesingTangent zero(const TuckerDesingPoint& base);

  const DenseTensor& core_dot() const { return core_dot_; }
  const std::vector<Matrix>& factor_dots() const { return factor_dots_; }
  const Matrix& factor_dot(int k) const { return factor_dots_[static_cast<size_t>(k)]; }
  std::uint64_t base_id() const { return base_->id; }
  const std::shared_ptr<const TuckerDesingPoint::Data>& base() const { return base_; }

 private:
  DenseTensor core_dot_;
  std::vector<Matrix> factor_dots_;
  std::shared_ptr<const TuckerDesingPoint::Data> base_;
};

/// Element of the ambient space: a tensor plus one symmetric matrix per
/// mode. Dense; test scale only.
struct AmbientVector {
  DenseTensor tensor_part;
  std::vector<Matrix> sym_parts;  // empty means all-zero
};

// ---------------------------------------------------------------------------
// Metric, projection, gradient, retraction, transport, Hessian
// ---------------------------------------------------------------------------

/// Riemannian inner product of two tangents at the same base,
///   <xi, eta> = <Gdot_xi, Gdot_eta> + sum_k <Udot_xi,k, Udot_eta,k F_k>.
/// Throws on mismatched bases. Never touches ambient-sized arrays.
double tangent_inner(const TuckerDesingTangent& xi, const TuckerDesingTangent& eta);
double tangent_norm(const TuckerDesingTangent& xi);

TuckerDesingTangent tangent_scale(double a, const TuckerDesingTangent& xi);
/// a*xi + eta (same base).
TuckerDesingTangent tangent_axpy(double a, const TuckerDesingTangent& xi,
                                 const TuckerDesingTangent& eta);

/// Dense evaluation X = G x_k U_k. Test scale.
DenseTensor phi(const TuckerDesingPoint& x);

/// Dense (X, P_1..P_d) with P_k = I - U_k U_k^T. Test scale.
std::pair<DenseTensor, std::vector<Matrix>> embed(const TuckerDesingPoint& x);

/// Dense ambient embedding (Xdot, Pdot_1..Pdot_d) of a tangent. Test scale.
AmbientVector embed_tangent(const TuckerDesingTangent& xi);

/// Orthogonal projection of an ambient vector onto the tangent space at x.
TuckerDesingTangent project_tangent(const TuckerDesingPoint& x, const AmbientVector& v);

/// Riemannian gradient from the Euclidean gradient of f at phi(x); equal to
/// the projection of (egrad, 0, ..., 0). Sparse and dense egrads take the
/// same code path up to kernel dispatch.
TuckerDesingTangent riem_grad(const TuckerDesingPoint& x, const EuclideanTensor& egrad);

/// Values of the ambient direction Xdot of a tangent at the pattern's
/// entries (sum of the d+1 Tucker-form terms, O(count * prod r) cost).
Vector tangent_samples(const TuckerDesingTangent& xi, const SparsePattern& p);

/// Retraction: factors move to the Q factor of U_k + s*Udot_k; the core is
/// the projection coefficient of X + s*Xdot onto the new factors. The QR
/// orthonormalization spans the same subspace as the inverse-square-root
/// form, so the projector -- and hence the retracted point -- is identical.
TuckerDesingPoint retract(const TuckerDesingPoint& x, const TuckerDesingTangent& xi,
                          double s);

/// Vector transport: tangent-space projection of the embedded tangent,
/// computed on parameters only (no n_k x n_k matrices).
TuckerDesingTangent transport(const TuckerDesingPoint& to, const TuckerDesingTangent& xi);

/// Riemannian Hessian applied to xi. `ehess_of_xdot` must be the Euclidean
/// Hessian of f at phi(x) applied to the ambient direction Xdot of xi;
/// supplying it keeps this module objective-agnostic.
TuckerDesingTangent hess_apply(const TuckerDesingPoint& x, const TuckerDesingTangent& xi,
                               const EuclideanTensor& egrad,
                               const EuclideanTensor& ehess_of_xdot);

/// Max over the first-order stationarity residuals:
/// ||egrad x_k U_k^T (all modes)|| and ||(egrad)_(k) V_k G_(k)^T|| per mode.
double first_order_residual(const TuckerDesingPoint& x, const EuclideanTensor& egrad);

/// Second-order stationarity quadratic form at a first-order stationary
/// point. Throws if first_order_residual(x, egrad) > stationarity_tol.
double second_order_quadform(const TuckerDesingPoint& x, const TuckerDesingTangent& xi,
                             const EuclideanTensor& egrad,
                             const EuclideanTensor& ehess_of_xdot,
                             double stationarity_tol = 1e-9);

/// prod r_k + sum_k r_k (n_k - r_k).
Index manifold_dim(const Dims& ambient, const Dims& ranks);

/// Per-mode tangent-membership predicate obtained by differentiating the
/// defining equations X x_k P_k = 0: requires Xdot x_k A_k-part coupling,
/// symmetry of the mode-k matrix part, and the projector-derivative
/// identity. Dense; test scale.
bool matrix_desing_tangent_check(const TuckerDesingPoint& x, const AmbientVector& v,
                                 int k, double tol = 1e-10);

// ---------------------------------------------------------------------------
// Tangent cone of the underlying variety
// ---------------------------------------------------------------------------

/// Parameters of a tangent-cone element at a tensor with thin Tucker
/// decomposition base_core x_k base_factors[k] (ranks rbar <= r):
///   V = C x_k [Ub_k U1_k] + sum_k base_core x_k (U2_k R2_k) x_{j!=k} Ub_j.
struct TangentConeElement {
  DenseTensor base_core;             // rbar_1 x ... x rbar_d
  std::vector<Matrix> base_factors;  // n_k x rbar_k, orthonormal
  DenseTensor c;                     // r_1 x ... x r_d
  std::vector<Matrix> u1;            // n_k x (r_k - rbar_k)
  std::vector<Matrix> u2;            // n_k x (n_k - r_k)
  std::vector<Matrix> r2;            // (n_k - r_k) x rbar_k
};

/// Dense cone element; validates the block-orthonormality invariants.
DenseTensor cone_element(const TangentConeElement& e);

// ---------------------------------------------------------------------------
// Spurious stationary instance (rank-deficient point where the parametrized
// problem is second-order stationary but the variety still admits a descent
// direction in its tangent cone)
// ---------------------------------------------------------------------------

struct SpuriousStationaryInstance {
  TuckerDesingPoint x;
  std::vector<Vector> dirs;  // v_k, orthogonal to the active factor spans
  /// Euclidean gradient of f(X) = <X, v_1 o ... o v_d> (constant in X).
  DenseTensor egrad() const;
  /// Cone element with <egrad, V> = -prod ||v_k||^2.
  TangentConeElement descent_cone_element() const;
};

/// Builds a point with tucker_rank(phi(x)) == rank_under < rank and the
/// rank-one objective directions that make it second-order stationary.
/// Requires rank_under < rank componentwise and some mode with r_k < n_k.
SpuriousStationaryInstance spurious_stationary_instance(const Dims& dims,
                                                        const Dims& rank,
                                                        const Dims& rank_under,
                                                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Unconstrained product-space parametrization (core x factor matrices,
// no orthogonality), used by the baseline solver and the group-action
// invariance checks.
// ---------------------------------------------------------------------------

struct TuckerParams {
  DenseTensor core;
  std::vector<Matrix> factors;
};

/// Dense evaluation core x_k factors_k. Test scale.
DenseTensor tucker_eval(const TuckerParams& p);

/// Euclidean gradient of f(core x_k factors) on the product space:
/// core part egrad x_k U_k^T, factor part (egrad)_(k) V_k G_(k)^T.
TuckerParams tucker_param_grad(const TuckerParams& p, const EuclideanTensor& egrad);

/// Group action (G x_k R_k^{-1}, U_1 R_1, ..., U_d R_d); leaves the
/// represented tensor unchanged. Throws on cond(R_k) > 1e12.
TuckerParams group_action_apply(const TuckerParams& p, const std::vector<Matrix>& r);

}  // namespace tdesing
