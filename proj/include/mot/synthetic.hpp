#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "mot/common.hpp"
#include "mot/measure.hpp"
#include "mot/support.hpp"

namespace mot {

// Axis-aligned integer grid support; grid_support({2,2,3}) is the
// 12-point layout used by the synthetic cell-count experiment.
inline std::shared_ptr<const SupportSpace> grid_support(
    const std::vector<std::size_t>& sides) {
  if (sides.empty()) fail(Errc::invalid_argument, "grid needs at least one axis");
  std::vector<Point> pts;
  std::vector<std::size_t> idx(sides.size(), 0);
  while (true) {
    Point p(sides.size());
    for (std::size_t d = 0; d < sides.size(); ++d) p[d] = static_cast<double>(idx[d]);
    pts.push_back(std::move(p));
    std::size_t d = sides.size();
    while (d-- > 0) {
      if (++idx[d] < sides[d]) break;
      idx[d] = 0;
      if (d == 0) return std::make_shared<SupportSpace>(std::move(pts));
    }
  }
}

inline std::shared_ptr<const SupportSpace> experiment3d_support() {
  return grid_support({2, 2, 3});
}

// Two base measures tilted toward opposite corners of the support:
// weights proportional to exp(-+ t * s_j), where s_j is the normalized
// coordinate sum of x_j. separation = 0 gives a common (uniform)
// measure; weights stay strictly positive for any finite separation.
inline std::pair<Measure, Measure> tilted_pair(
    std::shared_ptr<const SupportSpace> support, double separation,
    std::uint64_t sample_size = 1) {
  const std::size_t N = support->size();
  std::vector<double> score(N, 0.0);
  double smin = 0.0, smax = 0.0;
  for (std::size_t j = 0; j < N; ++j) {
    double s = 0.0;
    for (double c : support->point(j)) s += c;
    score[j] = s;
    if (j == 0) smin = smax = s;
    smin = std::min(smin, s);
    smax = std::max(smax, s);
  }
  const double span = smax > smin ? smax - smin : 1.0;
  std::vector<double> wa(N), wb(N);
  double za = 0.0, zb = 0.0;
  for (std::size_t j = 0; j < N; ++j) {
    const double s = (score[j] - smin) / span;  // in [0,1]
    wa[j] = std::exp(-separation * s);
    wb[j] = std::exp(separation * (s - 1.0));
    za += wa[j];
    zb += wb[j];
  }
  double ra = 0.0, rb = 0.0;
  for (std::size_t j = 0; j < N; ++j) {
    wa[j] /= za;
    wb[j] /= zb;
    ra += wa[j];
    rb += wb[j];
  }
  wa[N - 1] += 1.0 - ra;  // pin the float sum exactly
  wb[N - 1] += 1.0 - rb;
  return {Measure(support, std::move(wa), sample_size),
          Measure(support, std::move(wb), sample_size)};
}

// Collection of k true measures for one alternative family.
// clustered: k/2 copies of a then k/2 of b; sparse: k-1 copies of a and
// one b; null: k copies of a.
enum class SyntheticFamily { null_family, clustered, sparse };

inline std::vector<Measure> family_truth(SyntheticFamily family, const Measure& a,
                                         const Measure& b, std::size_t k) {
  if (k < 2) fail(Errc::invalid_argument, "family needs k >= 2");
  if (family == SyntheticFamily::clustered && k % 2 != 0)
    fail(Errc::divisibility_violation, "clustered family needs even k");
  std::vector<Measure> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const bool use_b = (family == SyntheticFamily::clustered && i >= k / 2) ||
                       (family == SyntheticFamily::sparse && i == k - 1);
    out.push_back(use_b ? b : a);
  }
  return out;
}

// Empirical collection: group i is a Multinomial(n, truth_i)/n draw.
inline MeasureCollection sample_collection(const std::vector<Measure>& truth,
                                           std::uint64_t n, std::uint64_t seed) {
  std::vector<Measure> ms;
  ms.reserve(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    RngStream stream = RngStream::substream(seed, i);
    ms.push_back(multinomial_resample(truth[i], n, stream));
  }
  return MeasureCollection(std::move(ms));
}

}  // namespace mot
