#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mot/common.hpp"
#include "mot/rng.hpp"
#include "mot/support.hpp"

namespace mot {

// Probability weight vector over a shared SupportSpace. Immutable after
// construction; weights must sum to 1 within 1e-12.
class Measure {
 public:
  Measure(std::shared_ptr<const SupportSpace> support, std::vector<double> weights,
          std::optional<std::uint64_t> sample_size = std::nullopt)
      : support_(std::move(support)),
        weights_(std::move(weights)),
        sample_size_(sample_size) {
    if (!support_) fail(Errc::invalid_argument, "measure without support");
    if (weights_.size() != support_->size())
      fail(Errc::invalid_argument, "weight vector length != support size");
    double s = 0.0;
    for (double w : weights_) {
      if (w < 0.0) fail(Errc::invalid_argument, "negative weight");
      s += w;
    }
    if (std::abs(s - 1.0) > kWeightTol)
      fail(Errc::invalid_argument,
           "weights sum to " + std::to_string(s) + ", not 1");
    if (sample_size_ && *sample_size_ == 0)
      fail(Errc::invalid_size, "sample_size = 0");
  }

  const SupportSpace& support() const { return *support_; }
  std::shared_ptr<const SupportSpace> support_ptr() const { return support_; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::size_t j) const { return weights_[j]; }
  std::size_t size() const { return weights_.size(); }
  std::optional<std::uint64_t> sample_size() const { return sample_size_; }

  bool is_point_mass() const {
    for (double w : weights_)
      if (w > 0.0 && w < 1.0) return false;
    return true;
  }

 private:
  std::shared_ptr<const SupportSpace> support_;
  std::vector<double> weights_;
  std::optional<std::uint64_t> sample_size_;
};

// k >= 2 measures over one shared SupportSpace with sample sizes n_i.
class MeasureCollection {
 public:
  explicit MeasureCollection(std::vector<Measure> measures)
      : measures_(std::move(measures)) {
    if (measures_.size() < 2)
      fail(Errc::invalid_argument, "collection needs k >= 2 measures");
    const auto& s0 = measures_[0].support();
    for (const auto& m : measures_)
      if (!m.support().same_as(s0))
        fail(Errc::support_mismatch, "measures use different supports");
  }

  std::size_t k() const { return measures_.size(); }
  std::size_t support_size() const { return measures_[0].size(); }
  const SupportSpace& support() const { return measures_[0].support(); }
  std::shared_ptr<const SupportSpace> support_ptr() const {
    return measures_[0].support_ptr();
  }
  const Measure& measure(std::size_t i) const { return measures_[i]; }
  const std::vector<Measure>& measures() const { return measures_; }

  // Sizes n = (n_1,...,n_k); every measure must carry one.
  std::vector<std::uint64_t> sizes() const {
    std::vector<std::uint64_t> n;
    n.reserve(measures_.size());
    for (const auto& m : measures_) {
      if (!m.sample_size())
        fail(Errc::invalid_argument, "measure without a sample size");
      n.push_back(*m.sample_size());
    }
    return n;
  }

  // Stacked vector (mu_1; ...; mu_k) in R^{kN}.
  std::vector<double> stacked() const {
    std::vector<double> v;
    v.reserve(k() * support_size());
    for (const auto& m : measures_)
      v.insert(v.end(), m.weights().begin(), m.weights().end());
    return v;
  }

 private:
  std::vector<Measure> measures_;
};

// One realization of the multinomial-process Gaussian limit G_i; the
// components sum to zero (rows of Sigma_i sum to zero).
struct GaussianLimitDraw {
  std::vector<double> g;
};

// Empirical measure from raw coordinate rows. Rows must match support
// points exactly (coordinate-wise equality after canonical decimal
// parsing); no tolerance-based merging.
inline Measure empirical_measure(const std::vector<Point>& rows,
                                 std::shared_ptr<const SupportSpace> support) {
  if (rows.empty()) fail(Errc::empty_sample, "no observations");
  std::vector<double> counts(support->size(), 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t j = support->find(rows[r]);
    if (j == SupportSpace::npos)
      fail(Errc::unknown_support_point,
           "row " + std::to_string(r) + " matches no support point");
    counts[j] += 1.0;
  }
  const double n = static_cast<double>(rows.size());
  for (double& c : counts) c /= n;
  return Measure(std::move(support), std::move(counts), rows.size());
}

// One Multinomial(m, mu) draw reported as counts/m.
inline Measure multinomial_resample(const Measure& mu, std::uint64_t m,
                                    RngStream& rng) {
  if (m == 0) fail(Errc::invalid_size, "multinomial resample with m = 0");
  const auto counts = rng.multinomial(m, mu.weights());
  std::vector<double> w(counts.size());
  for (std::size_t j = 0; j < counts.size(); ++j)
    w[j] = static_cast<double>(counts[j]) / static_cast<double>(m);
  return Measure(mu.support_ptr(), std::move(w), m);
}

// One draw of G ~ N(0, diag(mu) - mu mu') via the closed form
//   g = sqrt(mu) ⊙ Z - (sqrt(mu)·Z) mu,   Z ~ N(0, I_N),
// which has exactly the target covariance; no factorization of the
// rank-deficient Sigma is needed. The tiny round-off in sum(g) is
// removed so downstream programs see an exactly centered direction.
inline GaussianLimitDraw gaussian_limit_sample(const Measure& mu, RngStream& rng) {
  const std::size_t n = mu.size();
  std::vector<double> g(n);
  double dot = 0.0;
  std::vector<double> sq(n);
  for (std::size_t j = 0; j < n; ++j) {
    sq[j] = std::sqrt(mu.weight(j));
    g[j] = rng.normal();
    dot += sq[j] * g[j];
  }
  for (std::size_t j = 0; j < n; ++j) g[j] = sq[j] * g[j] - dot * mu.weight(j);
  double s = 0.0;
  for (double v : g) s += v;
  const double shift = s / static_cast<double>(n);
  for (double& v : g) v -= shift;
  return GaussianLimitDraw{std::move(g)};
}

}  // namespace mot
