#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mot/common.hpp"
#include "mot/lp.hpp"
#include "mot/measure.hpp"
#include "mot/support.hpp"

namespace mot {

// Index tuples (i_1,...,i_k) over {0,...,N-1} flattened row-major: the
// first index is the most significant digit. This matches the column
// ordering of the constraint-matrix display for N=2, k=3.
struct TupleIndexer {
  std::size_t N = 0;
  std::size_t k = 0;

  std::uint64_t count() const {
    std::uint64_t c = 1;
    for (std::size_t i = 0; i < k; ++i) c *= N;
    return c;
  }

  std::size_t digit(std::uint64_t t, std::size_t i) const {
    std::uint64_t div = 1;
    for (std::size_t p = i + 1; p < k; ++p) div *= N;
    return static_cast<std::size_t>((t / div) % N);
  }

  std::vector<std::size_t> digits(std::uint64_t t) const {
    std::vector<std::size_t> d(k);
    for (std::size_t i = k; i-- > 0;) {
      d[i] = static_cast<std::size_t>(t % N);
      t /= N;
    }
    return d;
  }
};

// Cost with k-1 coinciding indices: ((k-1)/k^2) ||x_i - x_j||^2.
inline double pair_cost(const SupportSpace& support, std::size_t k, std::size_t i,
                        std::size_t j) {
  if (i >= support.size() || j >= support.size())
    fail(Errc::index_out_of_range, "pair_cost index");
  if (k < 2) fail(Errc::invalid_argument, "pair_cost needs k >= 2");
  const double kk = static_cast<double>(k);
  return (kk - 1.0) / (kk * kk) * support.sq_dist(i, j);
}

namespace detail {

// Incremental odometer over tuples keeping the running coordinate sum S
// and squared-norm sum Q of the selected points, so each step costs O(d).
class TupleScanner {
 public:
  TupleScanner(const SupportSpace& support, std::size_t k)
      : support_(support), k_(k), d_(support.dim()), digits_(k, 0), S_(d_, 0.0) {
    for (std::size_t j = 0; j < support_.size(); ++j) {
      sq_norm_.push_back(support_.sq_norm(j));
    }
    for (std::size_t t = 0; t < d_; ++t) S_[t] = k_ * support_.point(0)[t];
    Q_ = k_ * sq_norm_[0];
  }

  // Variance cost of the current tuple: Q/k - ||S||^2/k^2.
  double cost() const {
    double s2 = 0.0;
    for (double v : S_) s2 += v * v;
    const double kk = static_cast<double>(k_);
    return Q_ / kk - s2 / (kk * kk);
  }

  const std::vector<std::size_t>& digits() const { return digits_; }

  bool advance() {
    for (std::size_t pos = k_; pos-- > 0;) {
      const std::size_t old = digits_[pos];
      const Point& po = support_.point(old);
      for (std::size_t t = 0; t < d_; ++t) S_[t] -= po[t];
      Q_ -= sq_norm_[old];
      const std::size_t next = old + 1 < support_.size() ? old + 1 : 0;
      digits_[pos] = next;
      const Point& pn = support_.point(next);
      for (std::size_t t = 0; t < d_; ++t) S_[t] += pn[t];
      Q_ += sq_norm_[next];
      if (next != 0) return true;
    }
    return false;  // wrapped around
  }

 private:
  const SupportSpace& support_;
  std::size_t k_, d_;
  std::vector<std::size_t> digits_;
  std::vector<double> S_;
  double Q_ = 0.0;
  std::vector<double> sq_norm_;
};

}  // namespace detail

// Dense variance-cost tensor, N^k entries.
struct CostTensor {
  std::size_t N = 0;
  std::size_t k = 0;
  std::vector<double> entries;

  double at(std::uint64_t t) const { return entries[t]; }
};

inline CostTensor build_cost_tensor(const SupportSpace& support, std::size_t k,
                                    std::uint64_t budget = kDefaultTensorBudget) {
  if (k < 2) fail(Errc::invalid_argument, "cost tensor needs k >= 2");
  const TupleIndexer ix{support.size(), k};
  double logsize = k * std::log(static_cast<double>(support.size()));
  if (logsize > std::log(static_cast<double>(budget)) + 1e-9)
    fail(Errc::budget_exceeded,
         "N^k exceeds tensor budget of " + std::to_string(budget) + " entries");
  CostTensor c{support.size(), k, {}};
  c.entries.resize(ix.count());
  detail::TupleScanner scan(support, k);
  std::uint64_t t = 0;
  do {
    c.entries[t++] = scan.cost();
  } while (scan.advance());
  return c;
}

// Implicit marginal constraint matrix A in {0,1}^{kN x N^k}: row (i, j)
// selects the tuples whose i-th index equals j.
struct MarginalMatrix {
  std::size_t N = 0;
  std::size_t k = 0;

  std::size_t rows() const { return k * N; }
  std::uint64_t cols() const { return TupleIndexer{N, k}.count(); }
  std::size_t row_id(std::size_t i, std::size_t j) const { return i * N + j; }
  bool entry(std::size_t i, std::size_t j, std::uint64_t t) const {
    return TupleIndexer{N, k}.digit(t, i) == j;
  }

  std::vector<std::vector<double>> dense() const {
    std::vector<std::vector<double>> a(rows(), std::vector<double>(cols(), 0.0));
    const TupleIndexer ix{N, k};
    for (std::uint64_t t = 0; t < cols(); ++t)
      for (std::size_t i = 0; i < k; ++i) a[row_id(i, ix.digit(t, i))][t] = 1.0;
    return a;
  }

  // A pi: stacked marginals of a multicoupling.
  std::vector<double> apply(const std::vector<double>& pi) const {
    std::vector<double> out(rows(), 0.0);
    const TupleIndexer ix{N, k};
    for (std::uint64_t t = 0; t < pi.size(); ++t) {
      if (pi[t] == 0.0) continue;
      for (std::size_t i = 0; i < k; ++i) out[row_id(i, ix.digit(t, i))] += pi[t];
    }
    return out;
  }
};

inline MarginalMatrix build_marginal_matrix(std::size_t N, std::size_t k) {
  if (N < 1 || k < 1) fail(Errc::invalid_argument, "marginal matrix needs N, k >= 1");
  return MarginalMatrix{N, k};
}

struct Multicoupling {
  std::size_t N = 0;
  std::size_t k = 0;
  std::vector<double> pi;  // length N^k, row-major tuples
};

// Stacked dual vector u = (u_1,...,u_k), u_i in R^N.
struct DualVector {
  std::size_t N = 0;
  std::size_t k = 0;
  std::vector<double> u;  // length kN

  double at(std::size_t i, std::size_t j) const { return u[i * N + j]; }
  double& at(std::size_t i, std::size_t j) { return u[i * N + j]; }
};

struct SolverStats {
  long iterations = 0;
  long rows_generated = 0;
};

struct MotSolution {
  double value = 0.0;
  std::optional<Multicoupling> coupling;  // absent in lazy mode
  DualVector dual;
  SolverStats stats;
  bool lazy_mode = false;
};

enum class SolveMode { automatic, dense, lazy };

struct MotOptions {
  SolveMode mode = SolveMode::automatic;
  std::uint64_t budget = kDefaultTensorBudget;
  SimplexOptions simplex;
};

namespace detail {

inline bool within_budget(std::size_t N, std::size_t k, std::uint64_t budget) {
  long double size = 1.0L;
  for (std::size_t i = 0; i < k; ++i) {
    size *= static_cast<long double>(N);
    if (size > static_cast<long double>(budget)) return false;
  }
  return true;
}

}  // namespace detail

// Dual constraint family of the MOT program: one row per index tuple t,
// sum_i u_i[t_i] <= c_t, over variables u stacked block-major.
class MotDualFamily final : public ConstraintFamily {
 public:
  MotDualFamily(const SupportSpace& support, std::size_t k)
      : support_(support), k_(k), ix_{support.size(), k} {}

  std::uint64_t row_count() const override { return ix_.count(); }

  FamilyRow row(std::uint64_t id) const override {
    FamilyRow r;
    const auto d = ix_.digits(id);
    r.coeffs.reserve(k_);
    for (std::size_t i = 0; i < k_; ++i)
      r.coeffs.emplace_back(static_cast<int>(i * support_.size() + d[i]), 1.0);
    r.rhs = tuple_cost(d);
    return r;
  }

  std::optional<std::pair<std::uint64_t, double>> most_violated(
      const std::vector<double>& x, double tol) const override {
    detail::TupleScanner scan(support_, k_);
    std::uint64_t t = 0;
    std::optional<std::pair<std::uint64_t, double>> best;
    const std::size_t N = support_.size();
    do {
      const auto& d = scan.digits();
      double act = 0.0;
      for (std::size_t i = 0; i < k_; ++i) act += x[i * N + d[i]];
      const double viol = act - scan.cost();
      if (viol > tol && (!best || viol > best->second)) best = {{t, viol}};
      ++t;
    } while (scan.advance());
    return best;
  }

  std::optional<std::uint64_t> violated_on_ray(const std::vector<double>& ray,
                                               double tol) const override {
    detail::TupleScanner scan(support_, k_);
    std::uint64_t t = 0;
    const std::size_t N = support_.size();
    do {
      const auto& d = scan.digits();
      double act = 0.0;
      for (std::size_t i = 0; i < k_; ++i) act += ray[i * N + d[i]];
      if (act > tol) return t;
      ++t;
    } while (scan.advance());
    return std::nullopt;
  }

  // Diagonal tuples plus all tuples with k-1 coinciding indices; enough
  // structure to keep early lazy iterations bounded in practice.
  std::vector<std::uint64_t> seed_rows() const {
    const std::size_t N = support_.size();
    std::vector<std::uint64_t> ids;
    std::vector<std::uint64_t> pow(k_ + 1, 1);
    for (std::size_t i = 1; i <= k_; ++i) pow[i] = pow[i - 1] * N;
    auto tuple_id = [&](const std::vector<std::size_t>& d) {
      std::uint64_t t = 0;
      for (std::size_t i = 0; i < k_; ++i) t += d[i] * pow[k_ - 1 - i];
      return t;
    };
    std::vector<std::size_t> d(k_);
    for (std::size_t j = 0; j < N; ++j) {
      std::fill(d.begin(), d.end(), j);
      ids.push_back(tuple_id(d));
      for (std::size_t pos = 0; pos < k_; ++pos) {
        for (std::size_t j2 = 0; j2 < N; ++j2) {
          if (j2 == j) continue;
          std::fill(d.begin(), d.end(), j);
          d[pos] = j2;
          ids.push_back(tuple_id(d));
        }
      }
    }
    return ids;
  }

 private:
  double tuple_cost(const std::vector<std::size_t>& d) const {
    const std::size_t dim = support_.dim();
    std::vector<double> S(dim, 0.0);
    double Q = 0.0;
    for (std::size_t i = 0; i < k_; ++i) {
      const Point& p = support_.point(d[i]);
      for (std::size_t t = 0; t < dim; ++t) S[t] += p[t];
      Q += support_.sq_norm(d[i]);
    }
    double s2 = 0.0;
    for (double v : S) s2 += v * v;
    const double kk = static_cast<double>(k_);
    return Q / kk - s2 / (kk * kk);
  }

  const SupportSpace& support_;
  std::size_t k_;
  TupleIndexer ix_;
};

namespace detail {

// Dense primal LP for MOT; the rhs can be swapped between solves.
inline LinearProgram build_mot_primal(const CostTensor& cost,
                                      const std::vector<double>& stacked_mu) {
  const MarginalMatrix A{cost.N, cost.k};
  const TupleIndexer ix{cost.N, cost.k};
  LinearProgram lp;
  lp.objective = cost.entries;
  lp.rows.resize(A.rows());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    lp.rows[r].type = RowType::eq;
    lp.rows[r].rhs = stacked_mu[r];
    lp.rows[r].coeffs.reserve(cost.entries.size() / cost.N);
  }
  for (std::uint64_t t = 0; t < cost.entries.size(); ++t)
    for (std::size_t i = 0; i < cost.k; ++i)
      lp.rows[A.row_id(i, ix.digit(t, i))].coeffs.emplace_back(static_cast<int>(t), 1.0);
  return lp;
}

}  // namespace detail

// Solve the MOT program for a collection. Dense mode materializes the
// primal (N^k variables) and returns value, multicoupling, and a dual
// optimal vector; lazy mode row-generates the dual and returns value and
// dual only, with the lazy flag set.
inline MotSolution solve_mot(const MeasureCollection& collection,
                             const MotOptions& opts = {}) {
  const std::size_t N = collection.support_size();
  const std::size_t k = collection.k();
  bool dense = detail::within_budget(N, k, opts.budget);
  if (opts.mode == SolveMode::dense) {
    if (!dense)
      fail(Errc::budget_exceeded, "dense mode forced but N^k exceeds the budget");
    dense = true;
  } else if (opts.mode == SolveMode::lazy) {
    dense = false;
  }

  MotSolution out;
  if (dense) {
    const CostTensor cost = build_cost_tensor(collection.support(), k, opts.budget);
    const LinearProgram lp = detail::build_mot_primal(cost, collection.stacked());
    const LpSolution sol = solve_dense(lp, opts.simplex);
    if (sol.status != LpStatus::optimal)
      fail(Errc::solver_failure, std::string("MOT primal solve: ") +
                                     lp_status_name(sol.status) + " after " +
                                     std::to_string(sol.iterations) + " iterations");
    out.value = sol.value;
    out.coupling = Multicoupling{N, k, sol.x};
    out.dual = DualVector{N, k, sol.row_duals};
    out.stats.iterations = sol.iterations;
  } else {
    const MotDualFamily family(collection.support(), k);
    LinearProgram base;
    base.maximize = true;
    base.objective = collection.stacked();
    base.domains.assign(k * N, VarDomain::free_var);
    const LpSolution sol = solve_lazy(base, family, family.seed_rows(), {}, opts.simplex);
    if (sol.status != LpStatus::optimal)
      fail(Errc::solver_failure, std::string("MOT lazy dual solve: ") +
                                     lp_status_name(sol.status) + " after " +
                                     std::to_string(sol.iterations) + " iterations");
    out.value = sol.value;
    out.dual = DualVector{N, k, sol.x};
    out.stats.iterations = sol.iterations;
    out.stats.rows_generated = sol.rows_generated;
    out.lazy_mode = true;
  }
  return out;
}

// Squared 2-Wasserstein distance: the k=2 transport LP with cost
// ||x - y||^2 (equals 4 * MOT(mu, nu) under the variance cost).
inline double w2_squared(const Measure& mu, const Measure& nu,
                         const SimplexOptions& simplex = {}) {
  if (!mu.support().same_as(nu.support()))
    fail(Errc::support_mismatch, "w2_squared needs a shared support");
  const std::size_t N = mu.size();
  const SupportSpace& sp = mu.support();
  LinearProgram lp;
  lp.objective.resize(N * N);
  lp.rows.resize(2 * N);
  for (std::size_t r = 0; r < 2 * N; ++r) {
    lp.rows[r].type = RowType::eq;
    lp.rows[r].rhs = r < N ? mu.weight(r) : nu.weight(r - N);
  }
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      const int var = static_cast<int>(i * N + j);
      lp.objective[var] = sp.sq_dist(i, j);
      lp.rows[i].coeffs.emplace_back(var, 1.0);
      lp.rows[N + j].coeffs.emplace_back(var, 1.0);
    }
  }
  const LpSolution sol = solve_dense(lp, simplex);
  if (sol.status != LpStatus::optimal)
    fail(Errc::solver_failure,
         std::string("transport solve: ") + lp_status_name(sol.status));
  return sol.value;
}

// Shift constants between blocks so the first entry of u_2,...,u_k is 0;
// when sum_i u_i = 0 held before, the first entry of u_1 becomes 0 too.
// Dual objective and feasibility are unchanged (shifts cancel in every
// constraint row and against unit-mass marginals).
inline DualVector normalize_dual(const DualVector& in) {
  DualVector out = in;
  double moved = 0.0;
  for (std::size_t i = 1; i < in.k; ++i) {
    const double s = out.at(i, 0);
    for (std::size_t j = 0; j < in.N; ++j) out.at(i, j) -= s;
    moved += s;
  }
  for (std::size_t j = 0; j < in.N; ++j) out.at(0, j) += moved;
  return out;
}

// Regularity predicate: sorted-weight ordering plus the partial-sum
// inequalities; guarantees the multitransportation polytope has no
// degenerate vertices, hence a Gaussian alternative limit.
inline bool check_regularity(const MeasureCollection& collection) {
  const std::size_t k = collection.k();
  const std::size_t N = collection.support_size();
  std::vector<std::vector<double>> sorted(k);
  for (std::size_t i = 0; i < k; ++i) {
    sorted[i] = collection.measure(i).weights();
    std::sort(sorted[i].begin(), sorted[i].end(), std::greater<double>());
  }
  for (std::size_t i = 0; i + 1 < k; ++i)
    if (!(sorted[i][0] < sorted[i + 1][0])) return false;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    double s = sorted[i][N - 1];
    for (std::size_t j = i + 1; j < k; ++j) s += sorted[j][0];
    if (!(s > static_cast<double>(k - i - 1))) return false;
  }
  return true;
}

// Push-forward of the multicoupling by the tuple-mean map; reported as a
// diagnostic (mass-heaviest entries first).
inline std::vector<std::pair<Point, double>> barycenter_pushforward(
    const Multicoupling& coupling, const SupportSpace& support,
    std::size_t max_entries = 32, double mass_floor = 1e-12) {
  const TupleIndexer ix{coupling.N, coupling.k};
  std::vector<std::pair<Point, double>> out;
  for (std::uint64_t t = 0; t < coupling.pi.size(); ++t) {
    const double mass = coupling.pi[t];
    if (mass <= mass_floor) continue;
    Point mean(support.dim(), 0.0);
    for (std::size_t i = 0; i < coupling.k; ++i) {
      const Point& p = support.point(ix.digit(t, i));
      for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += p[c];
    }
    for (double& c : mean) c /= static_cast<double>(coupling.k);
    bool merged = false;
    for (auto& [pt, m] : out) {
      if (pt == mean) {
        m += mass;
        merged = true;
        break;
      }
    }
    if (!merged) out.emplace_back(std::move(mean), mass);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (out.size() > max_entries) out.resize(max_entries);
  return out;
}

}  // namespace mot
