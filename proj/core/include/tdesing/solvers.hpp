#pragma once

#include "tdesing/tucker_geometry.hpp"

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace tdesing {

// ---------------------------------------------------------------------------
// Configuration, trace, stopping rules
// ---------------------------------------------------------------------------

struct RtrConfig {
  double rho_prime = 0.1;   // acceptance threshold, in (0, 1/4)
  double delta_bar = -1.0;  // max radius; <= 0 means sqrt(manifold dim)
  double delta0 = -1.0;     // initial radius; <= 0 means delta_bar / 16
  Index tcg_max_iters = 250;
  double tcg_kappa = 0.1;
  double tcg_theta = 1.0;
};

struct SolverConfig {
  Index max_iters = 500;
  double grad_tol = 1e-13;
  double train_tol = 1e-12;
  double rel_change_tol = 1e-12;
  double time_budget_s = std::numeric_limits<double>::infinity();
  RtrConfig rtr;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class StopRule {
  none,
  train_tol,
  rel_change,
  max_iters,
  time_budget,
  grad_tol,
  degenerate_direction,
};
const char* stop_rule_name(StopRule r);

struct IterationRecord {
  Index iter = 0;
  double time_s = 0.0;
  double train_error = std::numeric_limits<double>::quiet_NaN();
  double test_error = std::numeric_limits<double>::quiet_NaN();
  double grad_norm = std::numeric_limits<double>::quiet_NaN();
  double step = std::numeric_limits<double>::quiet_NaN();  // stepsize, or radius for RTR
  double rho = std::numeric_limits<double>::quiet_NaN();   // RTR only
  double sv_error = std::numeric_limits<double>::quiet_NaN();
};

struct IterationTrace {
  std::vector<IterationRecord> records;
  StopRule stop = StopRule::none;
  Index cg_restarts = 0;
  bool numerical_failure = false;  // RTR zero-model-decrease diagnostic
};

/// Streams trace rows as CSV, one flush per row so interrupted runs keep
/// their partial trace. Missing fields are written empty.
class TraceWriter {
 public:
  explicit TraceWriter(std::ostream* out);
  void row(const IterationRecord& r);

 private:
  std::ostream* out_;
};

void write_trace_csv(std::ostream& out, const IterationTrace& trace);

/// First stopping rule triggered by the trace tail, or StopRule::none.
/// Rule order: training error, relative change, gradient norm, iteration
/// cap, time budget.
StopRule stopping_check(const IterationTrace& trace, const SolverConfig& cfg);

// ---------------------------------------------------------------------------
// Objective callbacks
// ---------------------------------------------------------------------------

/// Smooth objective presented through Euclidean derivatives at phi(x).
/// `residual` in Eval carries the sampled residual data used by the exact
/// line search of quadratic sampling objectives; it stays empty otherwise.
template <class Point, class Tangent>
struct ObjectiveT {
  struct Eval {
    double value = 0.0;
    EuclideanTensor egrad;
    Vector residual;  // P_Omega(A - X) when exact_linesearch is available
  };
  std::function<Eval(const Point&)> eval;
  std::function<EuclideanTensor(const Point&, const Tangent&)> ehess;  // optional
  std::function<Vector(const Point&, const Tangent&)> dir_samples;     // P_Omega(Xdot)
  std::function<double(const Point&)> test_error;                      // optional
  std::function<double(const Point&)> sv_error;                        // optional
  double train_norm = std::numeric_limits<double>::quiet_NaN();  // ||P_Omega A||
  bool exact_linesearch = false;
};

using Objective = ObjectiveT<TuckerDesingPoint, TuckerDesingTangent>;

// ---------------------------------------------------------------------------
// Desingularization solvers
// ---------------------------------------------------------------------------

struct SolveResult {
  TuckerDesingPoint x;
  IterationTrace trace;
};

SolveResult rgd_solve(const TuckerDesingPoint& x0, const Objective& obj,
                      const SolverConfig& cfg, TraceWriter* writer = nullptr);
SolveResult rcg_solve(const TuckerDesingPoint& x0, const Objective& obj,
                      const SolverConfig& cfg, TraceWriter* writer = nullptr);
SolveResult rtr_solve(const TuckerDesingPoint& x0, const Objective& obj,
                      const SolverConfig& cfg, TraceWriter* writer = nullptr);

/// Exact line search of the sampled quadratic along a tangent line:
///   s = <dir, resid> / <dir, dir>.
/// Throws NumericalError when <dir, dir> < 1e-30 (degenerate direction).
double exact_linesearch(const Vector& dir_samples, const Vector& resid_samples);

/// Truncated CG for the trust-region subproblem (boundary, negative
/// curvature, and relative-residual stops).
struct TcgResult {
  TuckerDesingTangent step;
  bool boundary = false;
  Index iters = 0;
  double model_decrease = 0.0;
};
TcgResult tcg_subproblem(const TuckerDesingPoint& x, const TuckerDesingTangent& grad,
                         const std::function<TuckerDesingTangent(const TuckerDesingTangent&)>& hess_op,
                         double delta, const RtrConfig& cfg);

/// Radius update of the trust-region outer loop:
/// rho < 1/4 -> delta/4;  rho > 3/4 and boundary hit -> min(2 delta,
/// delta_bar);  otherwise unchanged.
double rtr_update_radius(double delta, double rho, bool boundary_hit, double delta_bar);

// ---------------------------------------------------------------------------
// Product-space baseline (Euclidean core x Stiefel factors)
// ---------------------------------------------------------------------------

/// Tangent of the baseline parametrization: same shapes as the point, with
/// the factor parts tangent to the Stiefel manifolds.
using TuckerParamsTangent = TuckerParams;
using BaselineObjective = ObjectiveT<TuckerParams, TuckerParamsTangent>;

struct BaselineSolveResult {
  TuckerParams x;
  IterationTrace trace;
};

BaselineSolveResult baseline_rgd_solve(const TuckerParams& x0, const BaselineObjective& obj,
                                       const SolverConfig& cfg, TraceWriter* writer = nullptr);
BaselineSolveResult baseline_rcg_solve(const TuckerParams& x0, const BaselineObjective& obj,
                                       const SolverConfig& cfg, TraceWriter* writer = nullptr);

/// Riemannian gradient of the baseline: Euclidean core part plus factor
/// parts projected to the Stiefel tangent space, xi - U sym(U^T xi).
TuckerParamsTangent baseline_riem_grad(const TuckerParams& x, const EuclideanTensor& egrad);

}  // namespace tdesing
