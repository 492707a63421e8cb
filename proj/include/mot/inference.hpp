#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mot/common.hpp"
#include "mot/limit_laws.hpp"
#include "mot/measure.hpp"
#include "mot/mot.hpp"
#include "mot/parallel.hpp"

namespace mot {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Empirical quantile, inverted-CDF convention: the order statistic at
// ceil(q * B). Cut-off comparisons are order-statistic sensitive, so the
// convention is fixed here once.
inline double empirical_quantile(std::vector<double> v, double q) {
  if (v.empty()) fail(Errc::invalid_argument, "quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = std::ceil(q * static_cast<double>(v.size()));
  std::size_t idx = pos < 1.0 ? 1 : static_cast<std::size_t>(pos);
  if (idx > v.size()) idx = v.size();
  return v[idx - 1];
}

enum class TestMethod { derivative, mn_bootstrap, ub0, permutation };

inline const char* method_name(TestMethod m) {
  switch (m) {
    case TestMethod::derivative: return "derivative";
    case TestMethod::mn_bootstrap: return "mn";
    case TestMethod::ub0: return "ub0";
    case TestMethod::permutation: return "permutation";
  }
  return "?";
}

enum class Hypothesis { H0, Ha };

// Source of the resampled covariance in the derivative bootstrap. The
// first group is the default; pooling across groups is an optional
// deviation, off by default.
enum class NullCovSource { first_group, pooled_all };

struct BootstrapConfig {
  std::uint64_t replicates = 300;   // B
  double subsample_exponent = 0.5;  // p in (0,1); m_i = floor(n_i^p)
  std::uint64_t seed = 0;           // master seed; replicate r uses substream(seed, r)
  bool coupled = false;             // emit paired-draw diagnostics where supported
  int jobs = 1;
  NullCovSource cov_source = NullCovSource::first_group;

  void validate() const {
    if (replicates < 1) fail(Errc::invalid_size, "B must be >= 1");
    if (!(subsample_exponent > 0.0 && subsample_exponent < 1.0))
      fail(Errc::invalid_argument, "subsample exponent must lie in (0,1)");
  }
};

// Replicate draws from one sampling scheme. Failed replicates are
// skipped and counted; value order follows the replicate index, so
// results do not depend on the parallelism level.
struct ReplicateSet {
  std::vector<double> values;
  std::uint64_t failures = 0;
};

namespace detail {

template <typename MakeWorker>
ReplicateSet run_replicates(std::uint64_t B, std::uint64_t seed, int jobs,
                            MakeWorker&& make_worker) {
  std::vector<double> values(B, 0.0);
  std::vector<char> failed(B, 0);
  parallel_chunks(B, jobs, [&](int, std::size_t begin, std::size_t end) {
    auto worker = make_worker();
    for (std::size_t r = begin; r < end; ++r) {
      RngStream stream = RngStream::substream(seed, r);
      try {
        values[r] = worker(r, stream);
      } catch (const Error& e) {
        if (!e.is_solver_failure()) throw;
        failed[r] = 1;
      }
    }
  });
  ReplicateSet out;
  out.values.reserve(B);
  for (std::uint64_t r = 0; r < B; ++r) {
    if (failed[r]) ++out.failures;
    else out.values.push_back(values[r]);
  }
  if (out.values.empty())
    fail(Errc::solver_failure, "every bootstrap replicate failed");
  return out;
}

inline Measure resample_cov_source(const MeasureCollection& data, NullCovSource src,
                                   RngStream& stream) {
  if (src == NullCovSource::first_group) {
    const Measure& mu1 = data.measure(0);
    const std::uint64_t n1 = mu1.sample_size().value_or(0);
    if (n1 == 0) fail(Errc::invalid_argument, "first group has no sample size");
    return multinomial_resample(mu1, n1, stream);
  }
  const auto n = data.sizes();
  std::uint64_t total = 0;
  std::vector<double> pooled(data.support_size(), 0.0);
  for (std::size_t i = 0; i < data.k(); ++i) {
    total += n[i];
    for (std::size_t j = 0; j < pooled.size(); ++j)
      pooled[j] += static_cast<double>(n[i]) * data.measure(i).weight(j);
  }
  for (double& w : pooled) w /= static_cast<double>(total);
  const Measure pooled_mu(data.support_ptr(), std::move(pooled), total);
  return multinomial_resample(pooled_mu, total, stream);
}

}  // namespace detail

// Derivative bootstrap: each replicate resamples the covariance source,
// draws Ghat_i from the resampled covariance, and solves the null limit
// program with the estimated weights a_i.
inline ReplicateSet derivative_bootstrap_null(const MeasureCollection& data,
                                              const BootstrapConfig& cfg,
                                              const MotOptions& opts = {}) {
  cfg.validate();
  const RateInfo ri = rate(data.sizes());
  const std::size_t k = data.k();
  return detail::run_replicates(cfg.replicates, cfg.seed, cfg.jobs, [&]() {
    auto prog = std::make_shared<NullLimitProgram>(data.support_ptr(), k, ri.a, opts);
    return [&, prog](std::uint64_t, RngStream& stream) {
      const Measure mu1s = detail::resample_cov_source(data, cfg.cov_source, stream);
      return prog->value(draw_limit_gaussians(mu1s, k, stream));
    };
  });
}

// Subsample sizes m_i = floor(n_i^p), clamped to at least 1.
inline std::vector<std::uint64_t> mn_sizes(const std::vector<std::uint64_t>& n, double p) {
  std::vector<std::uint64_t> m(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    m[i] = static_cast<std::uint64_t>(
        std::floor(std::pow(static_cast<double>(n[i]), p)));
    if (m[i] < 1) m[i] = 1;
  }
  return m;
}

// m-out-of-n bootstrap (per hypothesis): resample at sizes m_i = n_i^p
// and report rho_m * MOT* under H0, or rho_m * (MOT* - MOT(mu_hat))
// under Ha. `mot_hat` must be supplied under Ha (solved once, cached).
inline ReplicateSet mn_bootstrap(const MeasureCollection& data, const BootstrapConfig& cfg,
                                 Hypothesis hyp,
                                 std::optional<double> mot_hat = std::nullopt,
                                 const MotOptions& opts = {}) {
  cfg.validate();
  const auto n = data.sizes();
  const std::size_t k = data.k();
  const std::vector<std::uint64_t> m = mn_sizes(n, cfg.subsample_exponent);
  const double rho_m = rate(m).rho_n;
  double center = 0.0;
  if (hyp == Hypothesis::Ha) {
    if (!mot_hat) fail(Errc::invalid_argument, "Ha bootstrap needs the cached MOT value");
    center = *mot_hat;
  }

  const bool dense = detail::within_budget(data.support_size(), k, opts.budget);
  std::shared_ptr<const CostTensor> cost;
  if (dense)
    cost = std::make_shared<CostTensor>(
        build_cost_tensor(data.support(), k, opts.budget));

  return detail::run_replicates(cfg.replicates, cfg.seed, cfg.jobs, [&]() {
    std::shared_ptr<LinearProgram> lp;
    if (dense)
      lp = std::make_shared<LinearProgram>(
          detail::build_mot_primal(*cost, std::vector<double>(k * data.support_size(), 0.0)));
    return [&, lp](std::uint64_t, RngStream& stream) {
      std::vector<Measure> resampled;
      resampled.reserve(k);
      for (std::size_t i = 0; i < k; ++i) {
        const Measure& src = hyp == Hypothesis::H0 ? data.measure(0) : data.measure(i);
        resampled.push_back(multinomial_resample(src, m[i], stream));
      }
      double value;
      if (lp) {
        std::size_t r = 0;
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < data.support_size(); ++j)
            lp->rows[r++].rhs = resampled[i].weight(j);
        const LpSolution sol = solve_dense(*lp, opts.simplex);
        if (sol.status != LpStatus::optimal)
          fail(Errc::solver_failure,
               std::string("bootstrap MOT solve: ") + lp_status_name(sol.status));
        value = sol.value;
      } else {
        value = solve_mot(MeasureCollection(std::move(resampled)), opts).value;
      }
      return rho_m * (value - center);
    };
  });
}

// UB0 sampling (fast conservative alternative to the derivative
// bootstrap). Streams and draw order match derivative_bootstrap_null, so
// runs with the same seed are pathwise coupled.
inline ReplicateSet ub0_null(const MeasureCollection& data, const BootstrapConfig& cfg,
                             const MotOptions& opts = {}) {
  cfg.validate();
  const RateInfo ri = rate(data.sizes());
  const std::size_t k = data.k();
  return detail::run_replicates(cfg.replicates, cfg.seed, cfg.jobs, [&]() {
    auto prog = std::make_shared<Ub0Program>(data.support_ptr(), k, opts.simplex);
    return [&, prog](std::uint64_t, RngStream& stream) {
      const Measure mu1s = detail::resample_cov_source(data, cfg.cov_source, stream);
      return prog->value(ri.a, draw_limit_gaussians(mu1s, k, stream));
    };
  });
}

struct TestResult {
  double statistic = 0.0;  // rho_n * MOT(mu_hat)
  double cutoff = 0.0;
  double alpha = 0.0;
  bool reject = false;
  double p_value = 0.0;
  TestMethod method = TestMethod::derivative;
  double mot_value = 0.0;
  double rho_n = 0.0;
  std::vector<double> replicate_values;
  std::uint64_t replicate_failures = 0;
};

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.0;
  bool literal_scaling = false;
};

struct PowerCurvePoint {
  std::uint64_t n = 0;
  double delta = 0.0;
  double bound = 0.0;
};

// Asymptotic test of H0 (derivative / mn / ub0 cut-offs). The cut-off is
// the empirical (1-alpha) quantile of the chosen null sample; reject iff
// statistic >= cutoff.
inline TestResult test_h0(const MeasureCollection& data, double alpha, TestMethod method,
                          const BootstrapConfig& cfg, const MotOptions& opts = {}) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(Errc::invalid_argument, "alpha must be in (0,1)");
  if (method == TestMethod::permutation)
    fail(Errc::invalid_argument,
         "permutation test needs raw samples; use permutation_test");
  TestResult res;
  res.alpha = alpha;
  res.method = method;
  const RateInfo ri = rate(data.sizes());
  res.rho_n = ri.rho_n;
  res.mot_value = solve_mot(data, opts).value;
  res.statistic = ri.rho_n * res.mot_value;

  ReplicateSet draws;
  switch (method) {
    case TestMethod::derivative: draws = derivative_bootstrap_null(data, cfg, opts); break;
    case TestMethod::mn_bootstrap: draws = mn_bootstrap(data, cfg, Hypothesis::H0, {}, opts); break;
    case TestMethod::ub0: draws = ub0_null(data, cfg, opts); break;
    default: break;
  }
  res.replicate_values = draws.values;
  res.replicate_failures = draws.failures;
  res.cutoff = empirical_quantile(draws.values, 1.0 - alpha);
  res.reject = res.statistic >= res.cutoff;
  std::size_t ge = 0;
  for (double v : draws.values)
    if (v >= res.statistic) ++ge;
  res.p_value = static_cast<double>(ge) / static_cast<double>(draws.values.size());
  return res;
}

// Raw observations resolved to support indices, one list per group.
struct PermutationData {
  std::shared_ptr<const SupportSpace> support;
  std::vector<std::vector<std::size_t>> groups;

  MeasureCollection to_collection() const {
    std::vector<Measure> ms;
    for (const auto& g : groups) {
      if (g.empty()) fail(Errc::empty_group, "permutation group with no observations");
      std::vector<double> w(support->size(), 0.0);
      for (std::size_t idx : g) w[idx] += 1.0;
      for (double& v : w) v /= static_cast<double>(g.size());
      ms.emplace_back(support, std::move(w), g.size());
    }
    return MeasureCollection(std::move(ms));
  }
};

// MOT permutation test: relabel pooled observations R times and compare
// permuted MOT values against the observed one;
// p = (1 + #{MOT_r >= MOT_hat}) / (1 + R).
inline TestResult permutation_test(const PermutationData& data, std::uint64_t R,
                                   double alpha, std::uint64_t seed,
                                   const MotOptions& opts = {}, int jobs = 1) {
  if (R < 1) fail(Errc::invalid_size, "permutation test needs R >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(Errc::invalid_argument, "alpha must be in (0,1)");
  const MeasureCollection observed = data.to_collection();
  const std::size_t k = observed.k();
  const std::size_t N = observed.support_size();
  const RateInfo ri = rate(observed.sizes());

  TestResult res;
  res.alpha = alpha;
  res.method = TestMethod::permutation;
  res.rho_n = ri.rho_n;
  res.mot_value = solve_mot(observed, opts).value;
  res.statistic = ri.rho_n * res.mot_value;

  std::vector<std::size_t> pooled;
  for (const auto& g : data.groups) pooled.insert(pooled.end(), g.begin(), g.end());

  const bool dense = detail::within_budget(N, k, opts.budget);
  std::shared_ptr<const CostTensor> cost;
  if (dense)
    cost = std::make_shared<CostTensor>(build_cost_tensor(*data.support, k, opts.budget));

  const ReplicateSet perms =
      detail::run_replicates(R, seed, jobs, [&]() {
        std::shared_ptr<LinearProgram> lp;
        if (dense)
          lp = std::make_shared<LinearProgram>(
              detail::build_mot_primal(*cost, std::vector<double>(k * N, 0.0)));
        return [&, lp](std::uint64_t, RngStream& stream) {
          std::vector<std::size_t> shuffled = pooled;
          stream.shuffle(shuffled);
          std::size_t offset = 0;
          std::vector<Measure> ms;
          ms.reserve(k);
          std::vector<double> stacked;
          stacked.reserve(k * N);
          for (const auto& g : data.groups) {
            std::vector<double> w(N, 0.0);
            for (std::size_t t = 0; t < g.size(); ++t) w[shuffled[offset + t]] += 1.0;
            offset += g.size();
            for (double& v : w) v /= static_cast<double>(g.size());
            stacked.insert(stacked.end(), w.begin(), w.end());
            if (!dense) ms.emplace_back(data.support, std::move(w), g.size());
          }
          if (lp) {
            for (std::size_t r = 0; r < stacked.size(); ++r) lp->rows[r].rhs = stacked[r];
            const LpSolution sol = solve_dense(*lp, opts.simplex);
            if (sol.status != LpStatus::optimal)
              fail(Errc::solver_failure,
                   std::string("permutation MOT solve: ") + lp_status_name(sol.status));
            return sol.value;
          }
          return solve_mot(MeasureCollection(std::move(ms)), opts).value;
        };
      });

  std::size_t ge = 0;
  const double tie_tol = 1e-9 * (1.0 + std::abs(res.mot_value));
  for (double v : perms.values)
    if (v >= res.mot_value - tie_tol) ++ge;
  res.p_value = (1.0 + static_cast<double>(ge)) /
                (1.0 + static_cast<double>(perms.values.size()));
  res.reject = res.p_value <= alpha;
  res.replicate_failures = perms.failures;
  res.replicate_values.reserve(perms.values.size());
  for (double v : perms.values) res.replicate_values.push_back(ri.rho_n * v);
  res.cutoff = empirical_quantile(res.replicate_values, 1.0 - alpha);
  return res;
}

enum class CrMode { standard, literal };

// Confidence region for MOT(mu) under Ha from m-out-of-n draws.
// standard: [MOT - q_{1-a/2}/rho_n, MOT - q_{a/2}/rho_n], clipped at 0.
// literal:  [MOT/rho_n - q_{1-a/2}, MOT/rho_n - q_{a/2}].
inline ConfidenceInterval confidence_region(const MeasureCollection& data, double alpha,
                                            const BootstrapConfig& cfg,
                                            CrMode mode = CrMode::standard,
                                            const MotOptions& opts = {}) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(Errc::invalid_argument, "alpha must be in (0,1)");
  const double mot_hat = solve_mot(data, opts).value;
  const RateInfo ri = rate(data.sizes());
  const ReplicateSet draws = mn_bootstrap(data, cfg, Hypothesis::Ha, mot_hat, opts);
  const double q_lo = empirical_quantile(draws.values, alpha / 2.0);
  const double q_hi = empirical_quantile(draws.values, 1.0 - alpha / 2.0);
  ConfidenceInterval ci;
  ci.level = 1.0 - alpha;
  if (mode == CrMode::standard) {
    ci.lower = std::max(0.0, mot_hat - q_hi / ri.rho_n);
    ci.upper = std::max(0.0, mot_hat - q_lo / ri.rho_n);
  } else {
    ci.literal_scaling = true;
    ci.lower = mot_hat / ri.rho_n - q_hi;
    ci.upper = mot_hat / ri.rho_n - q_lo;
  }
  return ci;
}

// C(X): Euclidean norm of the vector (||x_1 - x_j||^2)_{j=1..N}.
inline double support_constant(const SupportSpace& support) {
  double s = 0.0;
  for (std::size_t j = 0; j < support.size(); ++j) {
    const double d = support.sq_dist(0, j);
    s += d * d;
  }
  return std::sqrt(s);
}

// Universal cut-off bound:
// (sum_i sqrt(a_i)) * ((k-1)/k^2) * C(X) * sqrt(-8 ln(alpha/4)).
inline double cutoff_bound(double alpha, std::size_t k, const std::vector<double>& a,
                           const SupportSpace& support) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(Errc::invalid_argument, "alpha must be in (0,1)");
  double sum_sqrt_a = 0.0;
  for (double ai : a) sum_sqrt_a += std::sqrt(ai);
  const double kk = static_cast<double>(k);
  const double t_alpha = std::sqrt(-8.0 * std::log(alpha / 4.0));
  return sum_sqrt_a * (kk - 1.0) / (kk * kk) * support_constant(support) * t_alpha;
}

// Per-entry dual ranges for k = 2: max |u_1|_j over
// {u_1 + u_2 = 0, A'u <= c} with the first entries pinned to zero (the
// normalization kills the constant-shift ray).
inline std::vector<double> dual_entry_bounds(const SupportSpace& support,
                                             const SimplexOptions& simplex = {}) {
  const std::size_t N = support.size();
  const std::size_t k = 2;
  LinearProgram lp;
  lp.objective.assign(2 * N, 0.0);
  lp.domains.assign(2 * N, VarDomain::free_var);
  for (std::size_t j = 0; j < N; ++j) {
    LpRow row;
    row.type = RowType::eq;
    row.rhs = 0.0;
    row.coeffs = {{static_cast<int>(j), 1.0}, {static_cast<int>(N + j), 1.0}};
    lp.rows.push_back(std::move(row));
  }
  lp.rows.push_back(LpRow{{{0, 1.0}}, RowType::eq, 0.0});
  lp.rows.push_back(LpRow{{{static_cast<int>(N), 1.0}}, RowType::eq, 0.0});
  const CostTensor cost = build_cost_tensor(support, k);
  const TupleIndexer ix{N, k};
  for (std::uint64_t t = 0; t < cost.entries.size(); ++t) {
    LpRow row;
    row.type = RowType::le;
    row.rhs = cost.entries[t];
    row.coeffs = {{static_cast<int>(ix.digit(t, 0)), 1.0},
                  {static_cast<int>(N + ix.digit(t, 1)), 1.0}};
    lp.rows.push_back(std::move(row));
  }

  std::vector<double> bounds(N, 0.0);
  for (std::size_t j = 0; j < N; ++j) {
    for (bool maximize : {true, false}) {
      lp.maximize = maximize;
      std::fill(lp.objective.begin(), lp.objective.end(), 0.0);
      lp.objective[j] = 1.0;
      const LpSolution sol = solve_dense(lp, simplex);
      if (sol.status == LpStatus::unbounded)
        fail(Errc::unbounded_entry, "dual entry " + std::to_string(j) + " unbounded");
      if (sol.status != LpStatus::optimal)
        fail(Errc::solver_failure,
             std::string("dual range solve: ") + lp_status_name(sol.status));
      bounds[j] = std::max(bounds[j], std::abs(sol.value));
    }
  }
  return bounds;
}

// C~(X): norm of the per-entry maxima over the u_1 block.
inline double dual_range(const SupportSpace& support, const SimplexOptions& simplex = {}) {
  const auto bounds = dual_entry_bounds(support, simplex);
  double s = 0.0;
  for (double b : bounds) s += b * b;
  return std::sqrt(s);
}

// Two-sample power lower bound:
// 1 - Phi((4 C~ sqrt(-ln(alpha/4)) - sqrt(n/2) delta) / C~).
inline double power_lower_bound(double c_tilde, std::uint64_t n, double delta,
                                double alpha) {
  if (n < 1) fail(Errc::invalid_size, "power bound needs n >= 1");
  if (!(delta > 0.0)) fail(Errc::invalid_argument, "effect size must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(Errc::invalid_argument, "alpha must be in (0,1)");
  const double arg = (4.0 * c_tilde * std::sqrt(-std::log(alpha / 4.0)) -
                      std::sqrt(static_cast<double>(n)) / std::sqrt(2.0) * delta) /
                     c_tilde;
  return 1.0 - normal_cdf(arg);
}

enum class AlternativeFamily { clustered, sparse };

// Closed-form reference values for clustered / sparse alternatives.
// clustered (two clusters): (1/4) W_2^2(mu_a, mu_b), k divisible by 2;
// sparse: ((k-1)/k^2) W_2^2(mu_a, mu_b).
inline double reference_mot(AlternativeFamily family, const Measure& mu_a,
                            const Measure& mu_b, std::size_t k,
                            std::size_t clusters = 2) {
  if (k < 2) fail(Errc::invalid_argument, "reference_mot needs k >= 2");
  const double w2 = w2_squared(mu_a, mu_b);
  if (family == AlternativeFamily::clustered) {
    if (clusters != 2) fail(Errc::invalid_argument, "two-measure form needs C = 2");
    if (k % clusters != 0)
      fail(Errc::divisibility_violation, "k must be divisible by the cluster count");
    return 0.25 * w2;
  }
  const double kk = static_cast<double>(k);
  return (kk - 1.0) / (kk * kk) * w2;
}

// General clustered form: MOT of one representative per cluster.
inline double reference_mot_clustered(const std::vector<Measure>& representatives,
                                      std::size_t k, const MotOptions& opts = {}) {
  const std::size_t C = representatives.size();
  if (C < 2) fail(Errc::invalid_argument, "need at least two cluster representatives");
  if (k % C != 0)
    fail(Errc::divisibility_violation, "k must be divisible by the cluster count");
  if (C == 2) return 0.25 * w2_squared(representatives[0], representatives[1]);
  return solve_mot(MeasureCollection(representatives), opts).value;
}

}  // namespace mot
