#include "tdesing/completion.hpp"

#include "tdesing/linalg.hpp"
#include "tdesing/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace tdesing {

namespace {

std::vector<const Matrix*> mat_ptrs(const std::vector<Matrix>& ms) {
  std::vector<const Matrix*> p;
  p.reserve(ms.size());
  for (const Matrix& m : ms) p.push_back(&m);
  return p;
}

}  // namespace

Vector sample_phi(const TuckerDesingPoint& x, const SparsePattern& p) {
  return sample_tucker(p, x.core(), mat_ptrs(x.factors()));
}

Vector sample_phi(const TuckerParams& x, const SparsePattern& p) {
  return sample_tucker(p, x.core, mat_ptrs(x.factors));
}

Vector sample_tangent(const TuckerDesingTangent& xi, const SparsePattern& p) {
  return tangent_samples(xi, p);
}

double objective_value(const TuckerDesingPoint& x, const CompletionProblem& problem) {
  const Vector pred = sample_phi(x, *problem.train.pattern);
  return 0.5 * (pred - problem.train.values).squaredNorm();
}

SparseTensor egrad_sparse(const TuckerDesingPoint& x, const CompletionProblem& problem) {
  const Vector pred = sample_phi(x, *problem.train.pattern);
  return SparseTensor(problem.train.pattern, pred - problem.train.values);
}

SparseTensor ehess_completion(const TuckerDesingPoint& x, const TuckerDesingTangent& xi,
                              const CompletionProblem& problem) {
  (void)x;
  return SparseTensor(problem.train.pattern,
                      sample_tangent(xi, *problem.train.pattern));
}

CompletionProblem synth_generate(const Dims& dims, const Dims& r_star, double p,
                                 std::uint64_t seed) {
  if (p <= 0.0) throw DataError("sampling rate must be positive");
  const Index total = product(dims);
  const Index m = std::llround(p * static_cast<double>(total));
  if (m < 1) throw DataError("sampling rate yields an empty training set");
  if (2 * m > total)
    throw DataError("sampling rate too large for disjoint train/test sets");

  Rng rng(seed);
  TuckerParams truth;
  truth.core = random_gaussian(r_star, rng.split(0).next_u64());
  for (size_t k = 0; k < dims.size(); ++k)
    truth.factors.push_back(
        random_stiefel(dims[k], r_star[k], rng.split(1 + k).next_u64()));

  // 2m distinct flat indices: dense shuffle when the sample covers a large
  // share of the grid, rejection sampling otherwise
  std::vector<Index> flat(static_cast<size_t>(2 * m));
  Rng draw = rng.split(1000);
  if (2 * m * 4 >= total) {
    std::vector<Index> all(static_cast<size_t>(total));
    std::iota(all.begin(), all.end(), Index{0});
    for (Index i = 0; i < 2 * m; ++i) {
      const Index j = i + draw.uniform_index(total - i);
      std::swap(all[static_cast<size_t>(i)], all[static_cast<size_t>(j)]);
      flat[static_cast<size_t>(i)] = all[static_cast<size_t>(i)];
    }
  } else {
    std::unordered_set<Index> seen;
    seen.reserve(static_cast<size_t>(2 * m) * 2);
    Index got = 0;
    while (got < 2 * m) {
      const Index c = draw.uniform_index(total);
      if (seen.insert(c).second) flat[static_cast<size_t>(got++)] = c;
    }
  }

  const int d = static_cast<int>(dims.size());
  auto to_pattern = [&](Index begin, Index count) {
    std::vector<std::int32_t> idx(static_cast<size_t>(count) * static_cast<size_t>(d));
    for (Index e = 0; e < count; ++e) {
      Index rem = flat[static_cast<size_t>(begin + e)];
      for (int k = 0; k < d; ++k) {
        idx[static_cast<size_t>(e * d + k)] =
            static_cast<std::int32_t>(rem % dims[static_cast<size_t>(k)]);
        rem /= dims[static_cast<size_t>(k)];
      }
    }
    return SparsePattern::create(dims, std::move(idx));
  };

  CompletionProblem problem;
  SparsePatternPtr train_p = to_pattern(0, m);
  SparsePatternPtr test_p = to_pattern(m, m);
  problem.train = SparseTensor(train_p, sample_phi(truth, *train_p));
  problem.test = SparseTensor(test_p, sample_phi(truth, *test_p));
  problem.rank = r_star;
  problem.ground_truth = std::move(truth);
  return problem;
}

std::pair<double, double> completion_errors(const Vector& train_pred,
                                            const Vector& test_pred,
                                            const CompletionProblem& problem) {
  const double train_norm = problem.train.values.norm();
  const double test_norm = problem.test.values.norm();
  if (train_norm == 0.0 || (problem.test.count() > 0 && test_norm == 0.0))
    throw NumericalError("relative error undefined: observed data has zero norm");
  const double tr = (train_pred - problem.train.values).norm() / train_norm;
  const double te =
      problem.test.count() > 0 ? (test_pred - problem.test.values).norm() / test_norm : 0.0;
  return {tr, te};
}

std::pair<double, double> completion_errors(const TuckerDesingPoint& x,
                                            const CompletionProblem& problem) {
  return completion_errors(sample_phi(x, *problem.train.pattern),
                           sample_phi(x, *problem.test.pattern), problem);
}

namespace {

// Leading singular values per mode. With orthonormal factors the unfolding
// U_k G_(k) V_k^T has the singular values of G_(k); for raw parameters the
// factors are folded in first.
std::vector<Vector> mode_singular_values(const DenseTensor& core,
                                         const std::vector<Matrix>& factors,
                                         bool orthonormal) {
  std::vector<Vector> out;
  if (orthonormal) {
    for (int k = 0; k < core.ndim(); ++k) out.push_back(singular_values(unfold(core, k)));
  } else {
    DenseTensor compressed = core;  // fold non-orthonormal factors into the core
    std::vector<Matrix> qs;
    for (int k = 0; k < core.ndim(); ++k) {
      ThinQr qr = thin_qr(factors[static_cast<size_t>(k)]);
      compressed = mode_product(compressed, k, qr.r);
      qs.push_back(std::move(qr.q));
    }
    for (int k = 0; k < core.ndim(); ++k)
      out.push_back(singular_values(unfold(compressed, k)));
  }
  return out;
}

double sv_error_impl(const std::vector<Vector>& sx, const std::vector<Vector>& st) {
  double err = 0.0;
  for (size_t k = 0; k < sx.size(); ++k) {
    const Index nx = sx[k].size();
    for (Index i = 0; i < nx; ++i) {
      const double truth = i < st[k].size() ? st[k][i] : 0.0;
      err += std::abs(sx[k][i] - truth);
    }
  }
  return err;
}

}  // namespace

double sv_error(const TuckerDesingPoint& x, const TuckerParams& truth) {
  return sv_error_impl(mode_singular_values(x.core(), x.factors(), true),
                       mode_singular_values(truth.core, truth.factors, false));
}

double sv_error(const TuckerParams& x, const TuckerParams& truth) {
  return sv_error_impl(mode_singular_values(x.core, x.factors, false),
                       mode_singular_values(truth.core, truth.factors, false));
}

double sv_total(const TuckerParams& truth) {
  double total = 0.0;
  for (const Vector& s : mode_singular_values(truth.core, truth.factors, false))
    total += s.sum();
  return total;
}

SparseObservations ingest_ratings(const std::string& path, std::int64_t period_seconds) {
  if (period_seconds <= 0) throw DataError("period must be positive");
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ratings file: " + path);

  struct Row {
    std::int64_t user, movie, ts;
    double rating;
  };
  std::vector<Row> rows;
  std::string line;
  Index line_no = 0;
  std::int64_t min_ts = std::numeric_limits<std::int64_t>::max();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Row r;
    size_t pos = 0;
    auto next_field = [&](bool last) {
      const size_t sep = last ? line.size() : line.find("::", pos);
      if (sep == std::string::npos)
        throw DataError("malformed ratings line " + std::to_string(line_no));
      std::string f = line.substr(pos, sep - pos);
      pos = last ? line.size() : sep + 2;
      return f;
    };
    try {
      r.user = std::stoll(next_field(false));
      r.movie = std::stoll(next_field(false));
      r.rating = std::stod(next_field(false));
      r.ts = std::stoll(next_field(true));
    } catch (const std::exception&) {
      throw DataError("malformed ratings line " + std::to_string(line_no));
    }
    if (r.user < 1 || r.movie < 1)
      throw DataError("malformed ratings line " + std::to_string(line_no) +
                      ": ids must be positive");
    min_ts = std::min(min_ts, r.ts);
    rows.push_back(r);
  }
  if (rows.empty()) throw DataError("empty ratings file: " + path);

  Dims dims = {0, 0, 0};
  std::unordered_map<std::uint64_t, size_t> cell;  // (user,movie,week) -> row slot
  struct Entry {
    std::int32_t i[3];
    double v;
  };
  std::vector<Entry> entries;
  cell.reserve(rows.size() * 2);
  for (const Row& r : rows) {
    const std::int64_t week = 1 + (r.ts - min_ts) / period_seconds;
    dims[0] = std::max(dims[0], r.user);
    dims[1] = std::max(dims[1], r.movie);
    dims[2] = std::max(dims[2], week);
    if (r.user > (1 << 20) || r.movie > (1 << 20) || week > (1 << 20))
      throw DataError("ratings ids exceed supported range");
    const std::uint64_t key = (static_cast<std::uint64_t>(r.user) << 42) |
                              (static_cast<std::uint64_t>(r.movie) << 21) |
                              static_cast<std::uint64_t>(week);
    auto [it, inserted] = cell.try_emplace(key, entries.size());
    if (inserted) {
      entries.push_back({{static_cast<std::int32_t>(r.user - 1),
                          static_cast<std::int32_t>(r.movie - 1),
                          static_cast<std::int32_t>(week - 1)},
                         r.rating});
    } else {
      entries[it->second].v = r.rating;  // last write wins
    }
  }

  std::vector<std::int32_t> idx;
  idx.reserve(entries.size() * 3);
  Vector values(static_cast<Index>(entries.size()));
  for (size_t e = 0; e < entries.size(); ++e) {
    idx.push_back(entries[e].i[0]);
    idx.push_back(entries[e].i[1]);
    idx.push_back(entries[e].i[2]);
    values[static_cast<Index>(e)] = entries[e].v;
  }
  // create() re-sorts canonically; re-apply the same order to the values
  auto pattern_order = [&]() {
    std::vector<Index> order(entries.size());
    std::iota(order.begin(), order.end(), Index{0});
    Dims strides = {1, dims[0], dims[0] * dims[1]};
    auto lin = [&](Index e) {
      return entries[static_cast<size_t>(e)].i[0] * strides[0] +
             entries[static_cast<size_t>(e)].i[1] * strides[1] +
             entries[static_cast<size_t>(e)].i[2] * strides[2];
    };
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return lin(a) < lin(b); });
    return order;
  }();
  Vector sorted(values.size());
  for (size_t e = 0; e < entries.size(); ++e)
    sorted[static_cast<Index>(e)] = values[pattern_order[e]];
  return SparseTensor(SparsePattern::create(dims, std::move(idx)), std::move(sorted));
}

CompletionProblem split_train_test(const SparseObservations& obs, Index train_count,
                                   std::uint64_t seed, Dims rank) {
  if (train_count < 0 || train_count > obs.count())
    throw DataError("train_count exceeds observation count");
  const Index n = obs.count();
  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  for (Index i = 0; i + 1 < n; ++i) {
    const Index j = i + rng.uniform_index(n - i);
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  const int d = obs.pattern->ndim();
  auto build = [&](Index begin, Index count) {
    std::vector<std::int32_t> idx(static_cast<size_t>(count * d));
    Vector vals(count);
    for (Index e = 0; e < count; ++e) {
      const Index src = order[static_cast<size_t>(begin + e)];
      for (int k = 0; k < d; ++k)
        idx[static_cast<size_t>(e * d + k)] = obs.pattern->index(src, k);
      vals[e] = obs.values[src];
    }
    // re-sorting inside create() permutes indices; mirror it on the values
    std::vector<Index> perm(static_cast<size_t>(count));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::sort(perm.begin(), perm.end(), [&](Index a, Index b) {
      return obs.pattern->linear_index(order[static_cast<size_t>(begin + a)]) <
             obs.pattern->linear_index(order[static_cast<size_t>(begin + b)]);
    });
    std::vector<std::int32_t> sidx(static_cast<size_t>(count * d));
    Vector svals(count);
    for (Index e = 0; e < count; ++e) {
      const Index src = perm[static_cast<size_t>(e)];
      for (int k = 0; k < d; ++k)
        sidx[static_cast<size_t>(e * d + k)] = idx[static_cast<size_t>(src * d + k)];
      svals[e] = vals[src];
    }
    return SparseTensor(SparsePattern::create(obs.dims(), std::move(sidx)),
                        std::move(svals));
  };
  CompletionProblem problem;
  problem.train = build(0, train_count);
  problem.test = build(train_count, n - train_count);
  problem.rank = std::move(rank);
  return problem;
}

Objective make_objective(const CompletionProblem& problem) {
  Objective obj;
  const CompletionProblem* p = &problem;
  obj.eval = [p](const TuckerDesingPoint& x) {
    Objective::Eval ev;
    const Vector pred = sample_phi(x, *p->train.pattern);
    Vector resid = p->train.values - pred;
    ev.value = 0.5 * resid.squaredNorm();
    ev.egrad = SparseTensor(p->train.pattern, -resid);
    ev.residual = std::move(resid);
    return ev;
  };
  obj.ehess = [p](const TuckerDesingPoint& x, const TuckerDesingTangent& xi) {
    return EuclideanTensor(ehess_completion(x, xi, *p));
  };
  obj.dir_samples = [p](const TuckerDesingPoint&, const TuckerDesingTangent& xi) {
    return sample_tangent(xi, *p->train.pattern);
  };
  obj.test_error = [p](const TuckerDesingPoint& x) {
    const double norm = p->test.values.norm();
    if (p->test.count() == 0 || norm == 0.0)
      return std::numeric_limits<double>::quiet_NaN();
    return (sample_phi(x, *p->test.pattern) - p->test.values).norm() / norm;
  };
  if (problem.ground_truth) {
    obj.sv_error = [p](const TuckerDesingPoint& x) {
      return sv_error(x, *p->ground_truth);
    };
  }
  obj.train_norm = problem.train.values.norm();
  obj.exact_linesearch = true;
  return obj;
}

BaselineObjective make_baseline_objective(const CompletionProblem& problem) {
  BaselineObjective obj;
  const CompletionProblem* p = &problem;
  obj.eval = [p](const TuckerParams& x) {
    BaselineObjective::Eval ev;
    const Vector pred = sample_phi(x, *p->train.pattern);
    Vector resid = p->train.values - pred;
    ev.value = 0.5 * resid.squaredNorm();
    ev.egrad = SparseTensor(p->train.pattern, -resid);
    ev.residual = std::move(resid);
    return ev;
  };
  obj.dir_samples = [p](const TuckerParams& x, const TuckerParams& dir) {
    const auto mats = mat_ptrs(x.factors);
    Vector out = sample_tucker(*p->train.pattern, dir.core, mats);
    for (size_t k = 0; k < x.factors.size(); ++k) {
      std::vector<const Matrix*> with_dot = mats;
      with_dot[k] = &dir.factors[k];
      out += sample_tucker(*p->train.pattern, x.core, with_dot);
    }
    return out;
  };
  obj.test_error = [p](const TuckerParams& x) {
    const double norm = p->test.values.norm();
    if (p->test.count() == 0 || norm == 0.0)
      return std::numeric_limits<double>::quiet_NaN();
    return (sample_phi(x, *p->test.pattern) - p->test.values).norm() / norm;
  };
  if (problem.ground_truth) {
    obj.sv_error = [p](const TuckerParams& x) { return sv_error(x, *p->ground_truth); };
  }
  obj.train_norm = problem.train.values.norm();
  obj.exact_linesearch = true;
  return obj;
}

TuckerDesingPoint random_start_point(const Dims& dims, const Dims& rank,
                                     std::uint64_t seed) {
  TuckerParams p = random_start_params(dims, rank, seed);
  return TuckerDesingPoint::from_orthonormal(std::move(p.core), std::move(p.factors));
}

TuckerParams random_start_params(const Dims& dims, const Dims& rank,
                                 std::uint64_t seed) {
  Rng rng(seed);
  TuckerParams p;
  p.core = random_gaussian(rank, rng.split(0).next_u64());
  for (size_t k = 0; k < dims.size(); ++k)
    p.factors.push_back(random_stiefel(dims[k], rank[k], rng.split(1 + k).next_u64()));
  return p;
}

}  // namespace tdesing
