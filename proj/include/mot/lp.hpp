#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "mot/common.hpp"

namespace mot {

enum class RowType { eq, le, ge };
enum class VarDomain { nonneg, free_var };
enum class LpStatus { optimal, infeasible, unbounded, stalled };

inline const char* lp_status_name(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "Optimal";
    case LpStatus::infeasible: return "Infeasible";
    case LpStatus::unbounded: return "Unbounded";
    case LpStatus::stalled: return "Stalled";
  }
  return "?";
}

struct LpRow {
  std::vector<std::pair<int, double>> coeffs;  // sparse (var, value)
  RowType type = RowType::le;
  double rhs = 0.0;
};

// Finite LP in computational form. Variables are nonnegative unless
// declared free in `domains` (missing entries default to nonnegative).
struct LinearProgram {
  bool maximize = false;
  std::vector<double> objective;
  std::vector<VarDomain> domains;
  std::vector<LpRow> rows;

  int n_vars() const { return static_cast<int>(objective.size()); }
  VarDomain domain(int j) const {
    return j < static_cast<int>(domains.size()) ? domains[j] : VarDomain::nonneg;
  }
};

struct LpSolution {
  LpStatus status = LpStatus::stalled;
  double value = 0.0;
  std::vector<double> x;          // primal values, original variables
  std::vector<double> row_duals;  // one multiplier per original row
  std::vector<double> ray;        // unbounded direction (original variables)
  long iterations = 0;
  long rows_generated = 0;  // lazy solves only
  double primal_residual = 0.0;
  double compl_slack_residual = 0.0;
};

struct SimplexOptions {
  double tol = 1e-9;        // reduced-cost / feasibility tolerance
  double pivot_tol = 1e-9;  // smallest admissible pivot element
  long max_iters = 2'000'000;
  long stall_switch = 1000;  // degenerate pivots before Bland's rule
  long refactor_every = 128;
};

namespace detail {

// Internal standard form: min cost'v s.t. Av = b (b >= 0), v >= 0.
struct StandardForm {
  int m = 0;       // rows
  int ncols = 0;   // structural + slack columns (artificials excluded)
  std::vector<std::vector<std::pair<int, double>>> cols;
  std::vector<double> cost;
  std::vector<double> b;
  std::vector<double> row_sign;       // original-row multiplier (ge flips, rhs flips)
  std::vector<int> pos_col, neg_col;  // original var -> internal columns (-1 if none)
  bool negated_objective = false;     // true when the input was a maximization
};

inline StandardForm standardize(const LinearProgram& lp) {
  StandardForm sf;
  const int nv = lp.n_vars();
  sf.m = static_cast<int>(lp.rows.size());
  sf.pos_col.assign(nv, -1);
  sf.neg_col.assign(nv, -1);
  sf.negated_objective = lp.maximize;

  for (int j = 0; j < nv; ++j) {
    sf.pos_col[j] = sf.ncols++;
    if (lp.domain(j) == VarDomain::free_var) sf.neg_col[j] = sf.ncols++;
  }
  const int n_slacks =
      static_cast<int>(std::count_if(lp.rows.begin(), lp.rows.end(),
                                     [](const LpRow& r) { return r.type != RowType::eq; }));
  sf.cols.assign(sf.ncols + n_slacks, {});
  sf.cost.assign(sf.ncols + n_slacks, 0.0);
  for (int j = 0; j < nv; ++j) {
    const double cj = lp.maximize ? -lp.objective[j] : lp.objective[j];
    sf.cost[sf.pos_col[j]] = cj;
    if (sf.neg_col[j] >= 0) sf.cost[sf.neg_col[j]] = -cj;
  }

  sf.b.assign(sf.m, 0.0);
  sf.row_sign.assign(sf.m, 1.0);
  int next_slack = sf.ncols;
  for (int r = 0; r < sf.m; ++r) {
    const LpRow& row = lp.rows[r];
    double sign = row.type == RowType::ge ? -1.0 : 1.0;
    double slack_coef = row.type == RowType::eq ? 0.0 : 1.0;
    double rhs = sign * row.rhs;
    if (rhs < 0.0) {  // keep b >= 0 for the artificial basis
      sign = -sign;
      slack_coef = -slack_coef;
      rhs = -rhs;
    }
    sf.row_sign[r] = sign;
    sf.b[r] = rhs;
    for (const auto& [var, val] : row.coeffs) {
      if (var < 0 || var >= nv) fail(Errc::index_out_of_range, "row coefficient index");
      const double v = sign * val;
      if (v == 0.0) continue;
      sf.cols[sf.pos_col[var]].emplace_back(r, v);
      if (sf.neg_col[var] >= 0) sf.cols[sf.neg_col[var]].emplace_back(r, -v);
    }
    if (row.type != RowType::eq) {
      sf.cols[next_slack].emplace_back(r, slack_coef);
      ++next_slack;
    }
  }
  sf.ncols += n_slacks;
  return sf;
}

// Revised simplex with a dense basis inverse. Column count may be large;
// rows are expected to be few. Artificial columns (ids >= ncols) carry
// the identity start basis.
class Simplex {
 public:
  Simplex(const StandardForm& sf, const SimplexOptions& opt) : sf_(sf), opt_(opt) {
    m_ = sf_.m;
    n_ = sf_.ncols + m_;
    basis_.resize(m_);
    in_basis_.assign(n_, 0);
    banned_.assign(n_, 0);
    binv_.assign(static_cast<std::size_t>(m_) * m_, 0.0);
    xb_ = sf_.b;
    for (int i = 0; i < m_; ++i) {
      basis_[i] = sf_.ncols + i;
      in_basis_[basis_[i]] = 1;
      binv_[static_cast<std::size_t>(i) * m_ + i] = 1.0;
    }
  }

  LpStatus run() {
    // Phase 1: drive artificials to zero.
    cost_.assign(n_, 0.0);
    for (int j = sf_.ncols; j < n_; ++j) cost_[j] = 1.0;
    LpStatus st = iterate(/*phase1=*/true);
    if (st != LpStatus::optimal) return st == LpStatus::unbounded ? LpStatus::stalled : st;
    if (objective() > opt_.tol * (1.0 + bnorm())) return LpStatus::infeasible;

    // Phase 2: artificials stay banned; those basic at ~0 may remain.
    cost_.assign(n_, 0.0);
    for (int j = 0; j < sf_.ncols; ++j) cost_[j] = sf_.cost[j];
    for (int j = sf_.ncols; j < n_; ++j) banned_[j] = 1;
    return iterate(/*phase1=*/false);
  }

  double objective() const {
    double v = 0.0;
    for (int i = 0; i < m_; ++i) v += cost_[basis_[i]] * xb_[i];
    return v;
  }

  // y' = c_B' B^{-1} under the current phase costs.
  std::vector<double> duals() const {
    std::vector<double> y(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      const double cb = cost_[basis_[i]];
      if (cb == 0.0) continue;
      const double* row = &binv_[static_cast<std::size_t>(i) * m_];
      for (int j = 0; j < m_; ++j) y[j] += cb * row[j];
    }
    return y;
  }

  std::vector<double> primal() const {  // internal column values
    std::vector<double> v(sf_.ncols, 0.0);
    for (int i = 0; i < m_; ++i)
      if (basis_[i] < sf_.ncols) v[basis_[i]] = xb_[i];
    return v;
  }

  // Recession direction in internal columns after an unbounded phase 2:
  // the entering column moves by +1, basic columns by -w.
  std::vector<double> ray_direction() const {
    std::vector<double> dir(sf_.ncols, 0.0);
    if (ray_col_ >= 0 && ray_col_ < sf_.ncols) dir[ray_col_] = 1.0;
    for (int i = 0; i < m_; ++i)
      if (basis_[i] < sf_.ncols) dir[basis_[i]] -= ray_w_[i];
    return dir;
  }

  long iterations() const { return iters_; }

 private:
  double bnorm() const {
    double s = 0.0;
    for (double v : sf_.b) s += std::abs(v);
    return s;
  }

  void column_times_binv(int col, std::vector<double>& w) const {
    w.assign(m_, 0.0);
    if (col >= sf_.ncols) {
      const int r = col - sf_.ncols;
      for (int i = 0; i < m_; ++i) w[i] = binv_[static_cast<std::size_t>(i) * m_ + r];
      return;
    }
    for (const auto& [r, v] : sf_.cols[col])
      for (int i = 0; i < m_; ++i) w[i] += binv_[static_cast<std::size_t>(i) * m_ + r] * v;
  }

  double reduced_cost(int col, const std::vector<double>& y) const {
    double d = cost_[col];
    if (col >= sf_.ncols) {
      d -= y[col - sf_.ncols];
    } else {
      for (const auto& [r, v] : sf_.cols[col]) d -= y[r] * v;
    }
    return d;
  }

  bool refactor() {
    // Gauss-Jordan inversion of the basis matrix.
    std::vector<double> a(static_cast<std::size_t>(m_) * 2 * m_, 0.0);
    const int w = 2 * m_;
    for (int i = 0; i < m_; ++i) {
      const int col = basis_[i];
      if (col >= sf_.ncols) {
        a[static_cast<std::size_t>(col - sf_.ncols) * w + i] = 1.0;
      } else {
        for (const auto& [r, v] : sf_.cols[col]) a[static_cast<std::size_t>(r) * w + i] = v;
      }
      a[static_cast<std::size_t>(i) * w + m_ + i] = 1.0;
    }
    for (int p = 0; p < m_; ++p) {
      int best = p;
      for (int i = p + 1; i < m_; ++i)
        if (std::abs(a[static_cast<std::size_t>(i) * w + p]) >
            std::abs(a[static_cast<std::size_t>(best) * w + p]))
          best = i;
      if (std::abs(a[static_cast<std::size_t>(best) * w + p]) < 1e-13) return false;
      if (best != p)
        for (int j = 0; j < w; ++j)
          std::swap(a[static_cast<std::size_t>(p) * w + j],
                    a[static_cast<std::size_t>(best) * w + j]);
      const double piv = a[static_cast<std::size_t>(p) * w + p];
      for (int j = 0; j < w; ++j) a[static_cast<std::size_t>(p) * w + j] /= piv;
      for (int i = 0; i < m_; ++i) {
        if (i == p) continue;
        const double f = a[static_cast<std::size_t>(i) * w + p];
        if (f == 0.0) continue;
        for (int j = 0; j < w; ++j)
          a[static_cast<std::size_t>(i) * w + j] -= f * a[static_cast<std::size_t>(p) * w + j];
      }
    }
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < m_; ++j)
        binv_[static_cast<std::size_t>(i) * m_ + j] = a[static_cast<std::size_t>(i) * w + m_ + j];
    // Recompute x_B = B^{-1} b.
    for (int i = 0; i < m_; ++i) {
      double s = 0.0;
      const double* row = &binv_[static_cast<std::size_t>(i) * m_];
      for (int j = 0; j < m_; ++j) s += row[j] * sf_.b[j];
      xb_[i] = s;
    }
    return true;
  }

  LpStatus iterate(bool phase1) {
    long degen_streak = 0;
    long since_refactor = 0;
    bool fresh_factor = true;  // conclusions require a freshly factored basis
    std::vector<double> w;
    while (true) {
      if (iters_ >= opt_.max_iters) return LpStatus::stalled;
      const std::vector<double> y = duals();

      int enter = -1;
      double best_d = -opt_.tol;
      for (int j = 0; j < n_; ++j) {
        if (in_basis_[j] || banned_[j]) continue;
        const double d = reduced_cost(j, y);
        if (bland_) {
          if (d < -opt_.tol) {
            enter = j;
            break;
          }
        } else if (d < best_d) {
          best_d = d;
          enter = j;
        }
      }
      if (enter < 0) {
        if (fresh_factor) return LpStatus::optimal;
        if (!refactor()) return LpStatus::stalled;
        since_refactor = 0;
        fresh_factor = true;
        continue;
      }

      column_times_binv(enter, w);
      int leave = -1;
      double theta = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m_; ++i) {
        // In phase 2 a basic artificial sits at 0 and must not grow, so a
        // negative pivot entry on its row blocks too (and pivots it out).
        double piv = w[i];
        if (!phase1 && basis_[i] >= sf_.ncols && piv < -opt_.pivot_tol) piv = -piv;
        if (piv > opt_.pivot_tol) {
          const double ratio = std::max(xb_[i], 0.0) / piv;
          if (ratio < theta - 1e-12 * (1.0 + theta) ||
              (std::abs(ratio - theta) <= 1e-12 * (1.0 + theta) &&
               (leave < 0 || basis_[i] < basis_[leave]))) {
            theta = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) {
        if (!fresh_factor) {  // rule out a drifted basis inverse first
          if (!refactor()) return LpStatus::stalled;
          since_refactor = 0;
          fresh_factor = true;
          continue;
        }
        if (phase1) return LpStatus::stalled;  // phase 1 is bounded below
        ray_col_ = enter;
        ray_w_ = w;
        return LpStatus::unbounded;
      }

      ++iters_;
      ++since_refactor;
      fresh_factor = false;
      if (theta <= 1e-12) {
        if (++degen_streak > opt_.stall_switch) bland_ = true;
      } else {
        degen_streak = 0;
      }

      // Pivot: update basis, x_B, and B^{-1} in place.
      const double piv = w[leave];
      for (int i = 0; i < m_; ++i) {
        if (i == leave) continue;
        xb_[i] -= theta * w[i];
        if (xb_[i] < 0.0 && xb_[i] > -1e-11) xb_[i] = 0.0;
      }
      xb_[leave] = theta;
      in_basis_[basis_[leave]] = 0;
      basis_[leave] = enter;
      in_basis_[enter] = 1;
      double* prow = &binv_[static_cast<std::size_t>(leave) * m_];
      for (int j = 0; j < m_; ++j) prow[j] /= piv;
      for (int i = 0; i < m_; ++i) {
        if (i == leave) continue;
        const double f = w[i];
        if (f == 0.0) continue;
        double* row = &binv_[static_cast<std::size_t>(i) * m_];
        for (int j = 0; j < m_; ++j) row[j] -= f * prow[j];
      }
      if (since_refactor >= opt_.refactor_every) {
        since_refactor = 0;
        if (!refactor()) return LpStatus::stalled;
      }
    }
  }

  const StandardForm& sf_;
  const SimplexOptions& opt_;
  int m_ = 0, n_ = 0;
  std::vector<int> basis_;
  std::vector<char> in_basis_, banned_;
  std::vector<double> binv_, xb_, cost_;
  std::vector<double> ray_w_;
  int ray_col_ = -1;
  bool bland_ = false;
  long iters_ = 0;
};

inline std::vector<double> internal_to_original(const LinearProgram& lp,
                                                const StandardForm& sf,
                                                const std::vector<double>& v) {
  std::vector<double> x(lp.n_vars(), 0.0);
  for (int j = 0; j < lp.n_vars(); ++j) {
    x[j] = v[sf.pos_col[j]];
    if (sf.neg_col[j] >= 0) x[j] -= v[sf.neg_col[j]];
  }
  return x;
}

}  // namespace detail

// Dense solve: all constraints materialized. Returns primal values, row
// duals, and the objective; `stalled` is reported (never thrown) when the
// iteration cap is hit. Deterministic: identical inputs produce
// identical pivots and outputs.
inline LpSolution solve_dense(const LinearProgram& lp, const SimplexOptions& opt = {}) {
  const detail::StandardForm sf = detail::standardize(lp);
  detail::Simplex engine(sf, opt);
  const LpStatus st = engine.run();

  LpSolution sol;
  sol.status = st;
  sol.iterations = engine.iterations();
  if (st == LpStatus::unbounded) {
    sol.ray = internal_to_original(lp, sf, engine.ray_direction());
    return sol;
  }
  if (st != LpStatus::optimal) return sol;

  const std::vector<double> v = engine.primal();
  sol.x = internal_to_original(lp, sf, v);
  const std::vector<double> yhat = engine.duals();
  sol.row_duals.resize(lp.rows.size());
  const double flip = lp.maximize ? -1.0 : 1.0;
  for (std::size_t r = 0; r < lp.rows.size(); ++r)
    sol.row_duals[r] = flip * sf.row_sign[r] * yhat[r];
  double obj = 0.0;
  for (int j = 0; j < lp.n_vars(); ++j) obj += lp.objective[j] * sol.x[j];
  sol.value = obj;

  // Residual diagnostics for the Optimal contract.
  double feas = 0.0;
  for (const auto& row : lp.rows) {
    double act = 0.0;
    for (const auto& [var, val] : row.coeffs) act += val * sol.x[var];
    if (row.type == RowType::eq) feas = std::max(feas, std::abs(act - row.rhs));
    else if (row.type == RowType::le) feas = std::max(feas, act - row.rhs);
    else feas = std::max(feas, row.rhs - act);
  }
  for (int j = 0; j < lp.n_vars(); ++j)
    if (lp.domain(j) == VarDomain::nonneg) feas = std::max(feas, -sol.x[j]);
  sol.primal_residual = feas;
  double dual_obj = 0.0;
  for (std::size_t r = 0; r < lp.rows.size(); ++r) dual_obj += sol.row_duals[r] * lp.rows[r].rhs;
  sol.compl_slack_residual = std::abs(dual_obj - sol.value) / (1.0 + std::abs(sol.value));
  return sol;
}

// One inequality row a'x <= rhs from a countable family.
struct FamilyRow {
  std::vector<std::pair<int, double>> coeffs;
  double rhs = 0.0;
};

// Countable family of inequality rows, accessible by enumeration and by
// a most-violated-row query. Ties in the query break toward the lowest
// row id so lazy solves stay deterministic.
class ConstraintFamily {
 public:
  virtual ~ConstraintFamily() = default;
  virtual std::uint64_t row_count() const = 0;
  virtual FamilyRow row(std::uint64_t id) const = 0;

  // Returns a row with violation >= max violation - 1e-10 at x, or
  // nullopt when x satisfies every row within `tol`.
  virtual std::optional<std::pair<std::uint64_t, double>> most_violated(
      const std::vector<double>& x, double tol) const {
    std::optional<std::pair<std::uint64_t, double>> best;
    for (std::uint64_t id = 0; id < row_count(); ++id) {
      const FamilyRow r = row(id);
      double act = 0.0;
      for (const auto& [var, val] : r.coeffs) act += val * x[var];
      const double viol = act - r.rhs;
      if (viol > tol && (!best || viol > best->second)) best = {{id, viol}};
    }
    return best;
  }

  // Lowest-id row with positive activity along an unbounded ray.
  virtual std::optional<std::uint64_t> violated_on_ray(const std::vector<double>& ray,
                                                       double tol) const {
    for (std::uint64_t id = 0; id < row_count(); ++id) {
      const FamilyRow r = row(id);
      double act = 0.0;
      for (const auto& [var, val] : r.coeffs) act += val * ray[var];
      if (act > tol) return id;
    }
    return std::nullopt;
  }
};

// Simple materialized family for tests and small programs.
class MaterializedFamily final : public ConstraintFamily {
 public:
  explicit MaterializedFamily(std::vector<FamilyRow> rows) : rows_(std::move(rows)) {}
  std::uint64_t row_count() const override { return rows_.size(); }
  FamilyRow row(std::uint64_t id) const override { return rows_[id]; }

 private:
  std::vector<FamilyRow> rows_;
};

struct LazyCaps {
  std::uint64_t max_rows = 500'000;
  long max_outer = 100'000;
};

// Row generation: repeatedly solve on the active rows, add the most
// violated family row, stop when no violation exceeds 1e-9. The final
// point is feasible for the whole family. `base` carries the objective,
// variable domains, and any always-on rows (e.g. equalities).
inline LpSolution solve_lazy(const LinearProgram& base, const ConstraintFamily& family,
                             std::vector<std::uint64_t> active, const LazyCaps& caps = {},
                             const SimplexOptions& opt = {}) {
  std::sort(active.begin(), active.end());
  active.erase(std::unique(active.begin(), active.end()), active.end());

  LinearProgram lp = base;
  for (std::uint64_t id : active) {
    const FamilyRow r = family.row(id);
    lp.rows.push_back(LpRow{r.coeffs, RowType::le, r.rhs});
  }

  long total_iters = 0;
  for (long outer = 0; outer < caps.max_outer; ++outer) {
    LpSolution sol = solve_dense(lp, opt);
    total_iters += sol.iterations;
    if (sol.status == LpStatus::unbounded) {
      const auto cut = family.violated_on_ray(sol.ray, opt.tol);
      if (!cut) {
        sol.iterations = total_iters;
        sol.rows_generated = static_cast<long>(active.size());
        return sol;
      }
      const FamilyRow r = family.row(*cut);
      lp.rows.push_back(LpRow{r.coeffs, RowType::le, r.rhs});
      active.push_back(*cut);
    } else if (sol.status == LpStatus::optimal) {
      const auto worst = family.most_violated(sol.x, opt.tol);
      if (!worst) {
        sol.iterations = total_iters;
        sol.rows_generated = static_cast<long>(active.size());
        sol.row_duals.resize(base.rows.size());  // duals reported for base rows only
        return sol;
      }
      const FamilyRow r = family.row(worst->first);
      lp.rows.push_back(LpRow{r.coeffs, RowType::le, r.rhs});
      active.push_back(worst->first);
    } else {
      sol.iterations = total_iters;
      sol.rows_generated = static_cast<long>(active.size());
      return sol;
    }
    if (active.size() > caps.max_rows)
      fail(Errc::row_cap_exceeded,
           "row generation exceeded " + std::to_string(caps.max_rows) + " rows");
  }
  fail(Errc::stalled, "row generation did not converge");
}

}  // namespace mot
