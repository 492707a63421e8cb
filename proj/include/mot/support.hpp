#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mot/common.hpp"

namespace mot {

using Point = std::vector<double>;

// Ordered finite ground set {x_1,...,x_N} in R^d. The ordering is fixed
// at construction and index-stable; points must be pairwise distinct
// under exact coordinate equality.
class SupportSpace {
 public:
  explicit SupportSpace(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.empty()) fail(Errc::invalid_argument, "support has no points");
    dim_ = points_[0].size();
    if (dim_ == 0) fail(Errc::invalid_argument, "support points have dimension 0");
    for (const auto& p : points_) {
      if (p.size() != dim_)
        fail(Errc::invalid_argument, "support points have mixed dimensions");
    }
    for (std::size_t i = 0; i < points_.size(); ++i) {
      for (std::size_t j = i + 1; j < points_.size(); ++j) {
        if (points_[i] == points_[j])
          fail(Errc::duplicate_support_point,
               "support points " + std::to_string(i) + " and " +
                   std::to_string(j) + " coincide");
      }
    }
  }

  std::size_t size() const { return points_.size(); }
  std::size_t dim() const { return dim_; }
  const Point& point(std::size_t j) const { return points_[j]; }
  const std::vector<Point>& points() const { return points_; }

  // ||x_i - x_j||^2
  double sq_dist(std::size_t i, std::size_t j) const {
    const Point& a = points_[i];
    const Point& b = points_[j];
    double s = 0.0;
    for (std::size_t t = 0; t < dim_; ++t) {
      const double diff = a[t] - b[t];
      s += diff * diff;
    }
    return s;
  }

  double sq_norm(std::size_t i) const {
    double s = 0.0;
    for (double v : points_[i]) s += v * v;
    return s;
  }

  double sq_diameter() const {
    double d = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = i + 1; j < size(); ++j)
        d = std::max(d, sq_dist(i, j));
    return d;
  }

  // Index of the point exactly equal to `p`, or npos.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t find(const Point& p) const {
    for (std::size_t j = 0; j < points_.size(); ++j)
      if (points_[j] == p) return j;
    return npos;
  }

  bool same_as(const SupportSpace& other) const {
    return this == &other || points_ == other.points_;
  }

 private:
  std::vector<Point> points_;
  std::size_t dim_ = 0;
};

}  // namespace mot
