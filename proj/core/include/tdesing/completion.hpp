#pragma once

#include "tdesing/solvers.hpp"
#include "tdesing/sparse.hpp"
#include "tdesing/tucker_geometry.hpp"

#include <optional>
#include <string>

namespace tdesing {

/// Observed entries of a partially known tensor.
using SparseObservations = SparseTensor;

struct CompletionProblem {
  SparseObservations train;  // Omega
  SparseObservations test;   // Gamma, disjoint from Omega
  Dims rank;                 // solver rank parameter
  std::optional<TuckerParams> ground_truth;  // synthetic runs only
};

/// Values of phi(x) at the observed entries; O(count * prod r) cost.
Vector sample_phi(const TuckerDesingPoint& x, const SparsePattern& p);
Vector sample_phi(const TuckerParams& x, const SparsePattern& p);
/// Values of the ambient direction of a tangent at the observed entries.
Vector sample_tangent(const TuckerDesingTangent& xi, const SparsePattern& p);

/// 1/2 ||P_Omega(phi(x)) - P_Omega(A)||^2 together with the sparse Euclidean
/// gradient (residual on Omega, zero elsewhere).
double objective_value(const TuckerDesingPoint& x, const CompletionProblem& problem);
SparseTensor egrad_sparse(const TuckerDesingPoint& x, const CompletionProblem& problem);

/// Euclidean Hessian along a tangent: P_Omega of the ambient direction.
SparseTensor ehess_completion(const TuckerDesingPoint& x, const TuckerDesingTangent& xi,
                              const CompletionProblem& problem);

/// Synthetic instance: ground truth core/factors with N(0,1) entries
/// (factors orthogonalized), and disjoint uniform samples Omega and Gamma,
/// each of size round(p * prod n). Throws DataError when 2*round(p*prod n)
/// exceeds the number of entries.
CompletionProblem synth_generate(const Dims& dims, const Dims& r_star, double p,
                                 std::uint64_t seed);

/// Relative errors on the training and test entries. Throws on zero-norm
/// observation data.
std::pair<double, double> completion_errors(const Vector& train_pred,
                                            const Vector& test_pred,
                                            const CompletionProblem& problem);
std::pair<double, double> completion_errors(const TuckerDesingPoint& x,
                                            const CompletionProblem& problem);

/// Sum over modes and leading indices of |sigma_i(unfold_k(phi(x))) -
/// sigma_i(unfold_k(truth))|. Computed from the core unfoldings: with
/// orthonormal factors the unfolding and the core share singular values.
double sv_error(const TuckerDesingPoint& x, const TuckerParams& truth);
double sv_error(const TuckerParams& x, const TuckerParams& truth);
/// Sum of the leading ground-truth singular values (normalization for
/// relative singular-value error reporting).
double sv_total(const TuckerParams& truth);

/// Parses `UserID::MovieID::Rating::Timestamp` lines into observations on a
/// (user, movie, period) grid. The period index is anchored at the smallest
/// timestamp in the file; duplicate (user, movie, period) cells keep the
/// last value in file order. Malformed lines raise DataError with the line
/// number.
SparseObservations ingest_ratings(const std::string& path, std::int64_t period_seconds);

/// Deterministic disjoint split of observations into train/test.
CompletionProblem split_train_test(const SparseObservations& obs, Index train_count,
                                   std::uint64_t seed, Dims rank);

/// Objective wiring for the desingularization solvers.
Objective make_objective(const CompletionProblem& problem);
/// Objective wiring for the product-space baseline solvers.
BaselineObjective make_baseline_objective(const CompletionProblem& problem);

/// Seeded start point of the given rank (Gaussian core, orthonormalized
/// Gaussian factors; one substream per factor).
TuckerDesingPoint random_start_point(const Dims& dims, const Dims& rank,
                                     std::uint64_t seed);
TuckerParams random_start_params(const Dims& dims, const Dims& rank,
                                 std::uint64_t seed);

}  // namespace tdesing
