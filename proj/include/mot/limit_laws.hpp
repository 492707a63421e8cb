#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "mot/common.hpp"
#include "mot/lp.hpp"
#include "mot/measure.hpp"
#include "mot/mot.hpp"

namespace mot {

// Scaling rate and limit weights for sample sizes n = (n_1,...,n_k):
//   rho_n = sqrt(prod n_i) / (sqrt(sum n_i))^(k-1),
//   lambda_i = n_i / sum n_j,  a_i = prod_{j != i} lambda_j.
struct RateInfo {
  double rho_n = 0.0;
  std::vector<double> lambda;
  std::vector<double> a;
};

inline RateInfo rate(const std::vector<std::uint64_t>& n) {
  if (n.size() < 2) fail(Errc::invalid_argument, "rate needs k >= 2 sizes");
  double total = 0.0;
  for (std::uint64_t v : n) {
    if (v == 0) fail(Errc::invalid_size, "sample size 0");
    total += static_cast<double>(v);
  }
  RateInfo r;
  double log_rho = 0.0;
  for (std::uint64_t v : n) log_rho += 0.5 * std::log(static_cast<double>(v));
  log_rho -= 0.5 * (static_cast<double>(n.size()) - 1.0) * std::log(total);
  r.rho_n = std::exp(log_rho);
  r.lambda.reserve(n.size());
  for (std::uint64_t v : n) r.lambda.push_back(static_cast<double>(v) / total);
  r.a.assign(n.size(), 1.0);
  for (std::size_t i = 0; i < n.size(); ++i)
    for (std::size_t j = 0; j < n.size(); ++j)
      if (j != i) r.a[i] *= r.lambda[j];
  return r;
}

// k independent Gaussian-limit draws from one measure, in draw order
// g_1,...,g_k (the order replicate streams rely on).
inline std::vector<std::vector<double>> draw_limit_gaussians(const Measure& mu,
                                                             std::size_t k,
                                                             RngStream& rng) {
  std::vector<std::vector<double>> g;
  g.reserve(k);
  for (std::size_t i = 0; i < k; ++i) g.push_back(gaussian_limit_sample(mu, rng).g);
  return g;
}

// Null limit program: max sum_i sqrt(a_i) <u_i, g_i> over
// {sum_i u_i = 0, A'u <= c}. Dense mode solves the transportation-shaped
// LP dual (kN rows); when N^k exceeds the budget the dual orientation is
// row-generated instead. One instance per thread: value() reuses an
// internal program and only swaps the draw-dependent coefficients.
class NullLimitProgram {
 public:
  NullLimitProgram(std::shared_ptr<const SupportSpace> support, std::size_t k,
                   std::vector<double> a, MotOptions opts = {})
      : support_(std::move(support)), k_(k), a_(std::move(a)), opts_(opts) {
    if (k_ < 2) fail(Errc::invalid_argument, "null program needs k >= 2");
    if (a_.size() != k_) fail(Errc::invalid_argument, "weight vector a has wrong length");
    N_ = support_->size();
    dense_ = detail::within_budget(N_, k_, opts_.budget);
    if (opts_.mode == SolveMode::lazy) dense_ = false;
    if (dense_) {
      const CostTensor cost = build_cost_tensor(*support_, k_, opts_.budget);
      const MarginalMatrix A{N_, k_};
      const TupleIndexer ix{N_, k_};
      dual_lp_.objective.assign(cost.entries.begin(), cost.entries.end());
      const int y_base = static_cast<int>(cost.entries.size());
      dual_lp_.objective.resize(cost.entries.size() + N_, 0.0);
      dual_lp_.domains.assign(dual_lp_.objective.size(), VarDomain::nonneg);
      for (std::size_t j = 0; j < N_; ++j)
        dual_lp_.domains[y_base + j] = VarDomain::free_var;
      dual_lp_.rows.resize(A.rows());
      for (std::size_t r = 0; r < A.rows(); ++r) dual_lp_.rows[r].type = RowType::eq;
      for (std::uint64_t t = 0; t < cost.entries.size(); ++t)
        for (std::size_t i = 0; i < k_; ++i)
          dual_lp_.rows[A.row_id(i, ix.digit(t, i))].coeffs.emplace_back(
              static_cast<int>(t), 1.0);
      for (std::size_t i = 0; i < k_; ++i)
        for (std::size_t j = 0; j < N_; ++j)
          dual_lp_.rows[A.row_id(i, j)].coeffs.emplace_back(y_base + static_cast<int>(j),
                                                            1.0);
    }
  }

  std::size_t var_count() const { return k_ * N_; }
  std::size_t equality_rows() const { return N_; }
  std::uint64_t inequality_rows() const { return TupleIndexer{N_, k_}.count(); }
  bool dense_mode() const { return dense_; }

  // Optimal value of the program for one realization g = (g_1,...,g_k).
  double value(const std::vector<std::vector<double>>& g) {
    if (g.size() != k_) fail(Errc::invalid_argument, "needs k Gaussian draws");
    if (dense_) {
      for (std::size_t i = 0; i < k_; ++i) {
        const double s = std::sqrt(a_[i]);
        for (std::size_t j = 0; j < N_; ++j) dual_lp_.rows[i * N_ + j].rhs = s * g[i][j];
      }
      const LpSolution sol = solve_dense(dual_lp_, opts_.simplex);
      if (sol.status != LpStatus::optimal)
        fail(Errc::solver_failure, std::string("null limit solve: ") +
                                       lp_status_name(sol.status));
      return sol.value;
    }
    LinearProgram base;
    base.maximize = true;
    base.objective.resize(k_ * N_);
    base.domains.assign(k_ * N_, VarDomain::free_var);
    for (std::size_t i = 0; i < k_; ++i) {
      const double s = std::sqrt(a_[i]);
      for (std::size_t j = 0; j < N_; ++j) base.objective[i * N_ + j] = s * g[i][j];
    }
    for (std::size_t j = 0; j < N_; ++j) {
      LpRow row;
      row.type = RowType::eq;
      row.rhs = 0.0;
      for (std::size_t i = 0; i < k_; ++i)
        row.coeffs.emplace_back(static_cast<int>(i * N_ + j), 1.0);
      base.rows.push_back(std::move(row));
    }
    const MotDualFamily family(*support_, k_);
    const LpSolution sol = solve_lazy(base, family, family.seed_rows(), {}, opts_.simplex);
    if (sol.status != LpStatus::optimal)
      fail(Errc::solver_failure, std::string("null limit lazy solve: ") +
                                     lp_status_name(sol.status));
    return sol.value;
  }

  double sample(const Measure& mu1, RngStream& rng) {
    return value(draw_limit_gaussians(mu1, k_, rng));
  }

 private:
  std::shared_ptr<const SupportSpace> support_;
  std::size_t k_ = 0, N_ = 0;
  std::vector<double> a_;
  MotOptions opts_;
  bool dense_ = true;
  LinearProgram dual_lp_;
};

// One relaxation row: (u_block)_m - (u_block)_j <= pair_cost(m, j).
struct Ub0Row {
  std::size_t block = 0;
  std::size_t m = 0;
  std::size_t j = 0;
  double rhs = 0.0;
};

// The kN(N-1)-row relaxation of the null program in the (k-1)N variables
// u_2,...,u_k, with u_1 = -sum_{i>=2} u_i substituted. All k constraint
// blocks are kept (the two-index rows per dual block); each row is
// implied by {sum u_i = 0, A'u <= c}, so the optimal value dominates the
// null program pathwise on shared draws, with equality at k = 2.
class Ub0Program {
 public:
  Ub0Program(std::shared_ptr<const SupportSpace> support, std::size_t k,
             SimplexOptions simplex = {})
      : support_(std::move(support)), k_(k), simplex_(simplex) {
    if (k_ < 2) fail(Errc::invalid_argument, "UB0 needs k >= 2");
    N_ = support_->size();
    for (std::size_t b = 0; b < k_; ++b)
      for (std::size_t m = 0; m < N_; ++m)
        for (std::size_t j = 0; j < N_; ++j)
          if (j != m) rows_.push_back(Ub0Row{b, m, j, pair_cost(*support_, k_, m, j)});

    // LP dual of the relaxation: min rhs'lambda over
    // {sum_r lambda_r row_r = q, lambda >= 0}; only q changes per draw.
    dual_lp_.objective.resize(rows_.size());
    dual_lp_.rows.resize(var_count());
    for (auto& row : dual_lp_.rows) row.type = RowType::eq;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      dual_lp_.objective[r] = rows_[r].rhs;
      for (const auto& [var, coef] : direct_row_coeffs(rows_[r]))
        dual_lp_.rows[var].coeffs.emplace_back(static_cast<int>(r), coef);
    }
  }

  std::size_t var_count() const { return (k_ - 1) * N_; }
  const std::vector<Ub0Row>& rows() const { return rows_; }

  // Row lifted to the substituted variables (coefficients on u_2..u_k).
  std::vector<std::pair<std::size_t, double>> direct_row_coeffs(const Ub0Row& r) const {
    std::vector<std::pair<std::size_t, double>> coeffs;
    if (r.block == 0) {
      for (std::size_t i = 1; i < k_; ++i) {
        coeffs.emplace_back((i - 1) * N_ + r.m, -1.0);
        coeffs.emplace_back((i - 1) * N_ + r.j, 1.0);
      }
    } else {
      coeffs.emplace_back((r.block - 1) * N_ + r.m, 1.0);
      coeffs.emplace_back((r.block - 1) * N_ + r.j, -1.0);
    }
    return coeffs;
  }

  // Objective coefficients q with q_{(i-1)N+j} = sqrt(a_i) g_i[j] - sqrt(a_1) g_1[j].
  std::vector<double> objective(const std::vector<double>& a,
                                const std::vector<std::vector<double>>& g) const {
    std::vector<double> q(var_count());
    const double s1 = std::sqrt(a[0]);
    for (std::size_t i = 1; i < k_; ++i) {
      const double si = std::sqrt(a[i]);
      for (std::size_t j = 0; j < N_; ++j)
        q[(i - 1) * N_ + j] = si * g[i][j] - s1 * g[0][j];
    }
    return q;
  }

  double value(const std::vector<double>& a, const std::vector<std::vector<double>>& g) {
    const std::vector<double> q = objective(a, g);
    for (std::size_t v = 0; v < q.size(); ++v) dual_lp_.rows[v].rhs = q[v];
    const LpSolution sol = solve_dense(dual_lp_, simplex_);
    if (sol.status != LpStatus::optimal)
      fail(Errc::solver_failure, std::string("UB0 solve: ") + lp_status_name(sol.status));
    return sol.value;
  }

  // Direct solve of the relaxation itself; used to cross-check the dual
  // route on small instances.
  double direct_value(const std::vector<double>& a,
                      const std::vector<std::vector<double>>& g) const {
    LinearProgram lp;
    lp.maximize = true;
    lp.objective = objective(a, g);
    lp.domains.assign(var_count(), VarDomain::free_var);
    for (const auto& r : rows_) {
      LpRow row;
      row.type = RowType::le;
      row.rhs = r.rhs;
      for (const auto& [var, coef] : direct_row_coeffs(r))
        row.coeffs.emplace_back(static_cast<int>(var), coef);
      lp.rows.push_back(std::move(row));
    }
    const LpSolution sol = solve_dense(lp, simplex_);
    if (sol.status != LpStatus::optimal)
      fail(Errc::solver_failure,
           std::string("UB0 direct solve: ") + lp_status_name(sol.status));
    return sol.value;
  }

  double sample(const std::vector<double>& a, const Measure& mu1, RngStream& rng) {
    return value(a, draw_limit_gaussians(mu1, k_, rng));
  }

 private:
  std::shared_ptr<const SupportSpace> support_;
  std::size_t k_ = 0, N_ = 0;
  SimplexOptions simplex_;
  std::vector<Ub0Row> rows_;
  LinearProgram dual_lp_;
};

inline Ub0Program build_ub0(std::shared_ptr<const SupportSpace> support, std::size_t k) {
  return Ub0Program(std::move(support), k);
}

// Template of the Hadamard-derivative program under the alternative:
// max sum_i sqrt(a_i) <u_i, g_i> over {A'u <= c, <u, mu> = MOT(mu)}.
// Solved through its transportation-shaped dual (kN rows).
class AltLimitProgram {
 public:
  AltLimitProgram(const MeasureCollection& collection, double mot_value,
                  std::vector<double> a, MotOptions opts = {})
      : support_(collection.support_ptr()),
        k_(collection.k()),
        N_(collection.support_size()),
        a_(std::move(a)),
        mot_value_(mot_value),
        opts_(opts) {
    if (!detail::within_budget(N_, k_, opts_.budget))
      fail(Errc::budget_exceeded, "alternative limit program beyond dense budget");
    const CostTensor cost = build_cost_tensor(*support_, k_, opts_.budget);
    const MarginalMatrix A{N_, k_};
    const TupleIndexer ix{N_, k_};
    const std::vector<double> mu = collection.stacked();
    lp_.objective.assign(cost.entries.begin(), cost.entries.end());
    const int tau = static_cast<int>(cost.entries.size());
    lp_.objective.push_back(mot_value_);
    lp_.domains.assign(lp_.objective.size(), VarDomain::nonneg);
    lp_.domains[tau] = VarDomain::free_var;
    lp_.rows.resize(A.rows());
    for (std::size_t r = 0; r < A.rows(); ++r) {
      lp_.rows[r].type = RowType::eq;
      lp_.rows[r].coeffs.emplace_back(tau, mu[r]);
    }
    for (std::uint64_t t = 0; t < cost.entries.size(); ++t)
      for (std::size_t i = 0; i < k_; ++i)
        lp_.rows[A.row_id(i, ix.digit(t, i))].coeffs.emplace_back(static_cast<int>(t),
                                                                  1.0);
  }

  double value(const std::vector<std::vector<double>>& g) {
    for (std::size_t i = 0; i < k_; ++i) {
      const double s = std::sqrt(a_[i]);
      for (std::size_t j = 0; j < N_; ++j) lp_.rows[i * N_ + j].rhs = s * g[i][j];
    }
    const LpSolution sol = solve_dense(lp_, opts_.simplex);
    if (sol.status != LpStatus::optimal)
      fail(Errc::solver_failure,
           std::string("alternative limit solve: ") + lp_status_name(sol.status));
    return sol.value;
  }

 private:
  std::shared_ptr<const SupportSpace> support_;
  std::size_t k_ = 0, N_ = 0;
  std::vector<double> a_;
  double mot_value_ = 0.0;
  MotOptions opts_;
  LinearProgram lp_;
};

// Objective of the limit program at a fixed dual vector:
// sum_i sqrt(a_i) <u_i, g_i>. Always a lower bound on the program value.
inline double fixed_dual_objective(const DualVector& u, const std::vector<double>& a,
                                   const std::vector<std::vector<double>>& g) {
  double v = 0.0;
  for (std::size_t i = 0; i < u.k; ++i) {
    const double s = std::sqrt(a[i]);
    for (std::size_t j = 0; j < u.N; ++j) v += s * u.at(i, j) * g[i][j];
  }
  return v;
}

// sample_x0: one draw from the null limit law, with g_1,...,g_k i.i.d.
// Gaussian limits of mu1.
inline double sample_x0(const Measure& mu1, const std::vector<double>& a, std::size_t k,
                        RngStream& rng, const MotOptions& opts = {}) {
  NullLimitProgram prog(mu1.support_ptr(), k, a, opts);
  return prog.sample(mu1, rng);
}

// sample_ub0: the UB0 value for the same draw mechanism; with shared
// streams the output dominates sample_x0's output.
inline double sample_ub0(const Measure& mu1, const std::vector<double>& a, std::size_t k,
                         RngStream& rng, const MotOptions& opts = {}) {
  Ub0Program prog(mu1.support_ptr(), k, opts.simplex);
  return prog.sample(a, mu1, rng);
}

// Standard deviation of the Normal lower bound at a fixed dual optimum:
// sigma = sqrt(sum_i a_i u_i' Sigma_i u_i), Sigma_i = diag(mu_i) - mu_i mu_i'.
struct NlbSpec {
  double sigma = 0.0;
};

inline NlbSpec nlb_sigma(const DualVector& u_star, const MeasureCollection& collection,
                         const std::vector<double>& a) {
  double var = 0.0;
  for (std::size_t i = 0; i < collection.k(); ++i) {
    const auto& w = collection.measure(i).weights();
    double quad = 0.0, lin = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      quad += w[j] * u_star.at(i, j) * u_star.at(i, j);
      lin += w[j] * u_star.at(i, j);
    }
    var += a[i] * (quad - lin * lin);
  }
  return NlbSpec{std::sqrt(std::max(var, 0.0))};
}

}  // namespace mot
