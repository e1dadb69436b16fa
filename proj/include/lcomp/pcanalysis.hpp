// Copyright 2026 The lcomp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// -----------------------------------------------------------------------------
//
// Point-cloud codec analytics: max-pooled pointwise features, critical point
// sets, rate-accuracy Pareto fronts and Bjontegaard-delta metrics.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lcomp/error.hpp"
#include "lcomp/tensorio.hpp"

namespace lcomp {

struct PointCloud {
  std::vector<std::array<double, 3>> points;

  std::size_t size() const { return points.size(); }

  // Accepts 3 x P, or P x 3 when `points_major` is set.
  static PointCloud from_tensor(const Tensor& t, bool points_major = false) {
    if (t.rank() != 2) throw FormatError("point cloud tensor must be rank 2");
    const std::size_t rows = t.dims[0], cols = t.dims[1];
    const std::size_t p = points_major ? rows : cols;
    if ((points_major ? cols : rows) != 3)
      throw FormatError(points_major ? "point cloud: expected P x 3" : "point cloud: expected 3 x P");
    if (p == 0) throw FormatError("point cloud needs at least one point");
    PointCloud c;
    c.points.resize(p);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t d = 0; d < 3; ++d)
        c.points[i][d] = points_major ? t.data[i * 3 + d] : t.data[d * p + i];
    return c;
  }
};

// N features x P points, row-major. Column i belongs to point i.
class FeatureMap {
 public:
  FeatureMap(std::size_t features, std::size_t points, std::vector<double> values)
      : features_(features), points_(points), values_(std::move(values)) {
    if (features == 0 || points == 0) throw ParameterError("feature map must be non-empty");
    if (values_.size() != features * points)
      throw ParameterError("feature map: " + std::to_string(values_.size()) + " values for " +
                           std::to_string(features) + " x " + std::to_string(points));
  }

  static FeatureMap from_tensor(const Tensor& t) {
    if (t.rank() != 2) throw FormatError("feature map tensor must be rank 2 (N x P)");
    return FeatureMap(t.dims[0], t.dims[1], std::vector<double>(t.data.begin(), t.data.end()));
  }

  std::size_t features() const { return features_; }
  std::size_t points() const { return points_; }
  double at(std::size_t feature, std::size_t point) const {
    return values_[feature * points_ + point];
  }

  FeatureMap restrict_to(std::span<const std::size_t> indices) const {
    if (indices.empty()) throw ParameterError("restriction needs at least one point");
    std::vector<double> v;
    v.reserve(features_ * indices.size());
    for (std::size_t f = 0; f < features_; ++f)
      for (auto i : indices) {
        if (i >= points_) throw ParameterError("point index out of range");
        v.push_back(at(f, i));
      }
    return FeatureMap(features_, indices.size(), std::move(v));
  }

 private:
  std::size_t features_, points_;
  std::vector<double> values_;
};

// Feature map of h(x) = W x for a N x 3 weight matrix W (row-major).
inline FeatureMap linear_features(const PointCloud& cloud, std::span<const double> weights) {
  if (weights.size() % 3 != 0 || weights.empty())
    throw ParameterError("feature weights must be N x 3");
  const std::size_t n = weights.size() / 3, p = cloud.size();
  std::vector<double> v(n * p);
  for (std::size_t f = 0; f < n; ++f)
    for (std::size_t i = 0; i < p; ++i)
      v[f * p + i] = weights[3 * f] * cloud.points[i][0] + weights[3 * f + 1] * cloud.points[i][1] +
                     weights[3 * f + 2] * cloud.points[i][2];
  return FeatureMap(n, p, std::move(v));
}

inline std::vector<double> max_pool_features(const FeatureMap& fmap) {
  std::vector<double> out(fmap.features());
  for (std::size_t f = 0; f < fmap.features(); ++f) {
    double m = fmap.at(f, 0);
    for (std::size_t i = 1; i < fmap.points(); ++i) m = std::max(m, fmap.at(f, i));
    out[f] = m;
  }
  return out;
}

// Union over features of every index attaining that feature's maximum,
// ascending. Keeping all tied indices preserves restriction invariance.
inline std::vector<std::size_t> critical_point_set(const FeatureMap& fmap) {
  const auto pooled = max_pool_features(fmap);
  std::vector<bool> hit(fmap.points(), false);
  for (std::size_t f = 0; f < fmap.features(); ++f)
    for (std::size_t i = 0; i < fmap.points(); ++i)
      if (fmap.at(f, i) == pooled[f]) hit[i] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < hit.size(); ++i)
    if (hit[i]) out.push_back(i);
  return out;
}

// A rate (bits) / accuracy (percent) pair.
struct RAPoint {
  double rate = 0.0;
  double accuracy = 0.0;
  friend bool operator==(const RAPoint&, const RAPoint&) = default;
};

// Points not dominated by any other (lower-or-equal rate and higher-or-equal
// accuracy, one strictly), sorted by rate. Exact duplicates collapse to one.
inline std::vector<RAPoint> pareto_front(std::span<const RAPoint> points) {
  if (points.empty()) throw ParameterError("pareto_front: no points");
  for (const auto& p : points)
    if (!std::isfinite(p.rate) || !std::isfinite(p.accuracy))
      throw ParameterError("pareto_front: non-finite point");
  std::vector<RAPoint> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const RAPoint& a, const RAPoint& b) {
    return a.rate != b.rate ? a.rate < b.rate : a.accuracy > b.accuracy;
  });
  std::vector<RAPoint> front;
  for (const auto& p : sorted)
    if (front.empty() || p.accuracy > front.back().accuracy) front.push_back(p);
  return front;
}

// ---------------------------------------------------------------------------
// Bjontegaard-delta metrics.

enum class BdMode { kRate, kQuality };

namespace detail {

// Monotone piecewise cubic Hermite interpolant (Fritsch-Carlson slopes);
// two or three nodes fall back to piecewise linear.
class Pchip {
 public:
  Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      h[i] = x_[i + 1] - x_[i];
      delta[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    d_.assign(n, 0.0);
    if (n < 4) {
      linear_ = true;
      return;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (delta[i - 1] * delta[i] <= 0.0) continue;
      const double w1 = 2 * h[i] + h[i - 1], w2 = h[i] + 2 * h[i - 1];
      d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
    d_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  }

  double operator()(double t) const {
    const std::size_t n = x_.size();
    std::size_t i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), t) - x_.begin());
    i = std::clamp<std::size_t>(i, 1, n - 1) - 1;
    const double h = x_[i + 1] - x_[i], s = (t - x_[i]) / h;
    if (linear_) return y_[i] + s * (y_[i + 1] - y_[i]);
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y_[i] + (s3 - 2 * s2 + s) * h * d_[i] +
           (-2 * s3 + 3 * s2) * y_[i + 1] + (s3 - s2) * h * d_[i + 1];
  }

  // Exact integral over [a, b] inside the node range: three-point
  // Gauss-Legendre on every cubic piece.
  double integrate(double a, double b) const {
    std::vector<double> cuts{a};
    for (double x : x_)
      if (x > a && x < b) cuts.push_back(x);
    cuts.push_back(b);
    static constexpr double kNode = 0.7745966692414834;  // sqrt(3/5)
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double m = 0.5 * (cuts[k] + cuts[k + 1]), r = 0.5 * (cuts[k + 1] - cuts[k]);
      total += r * (5.0 / 9.0 * (*this)(m - r * kNode) + 8.0 / 9.0 * (*this)(m) +
                    5.0 / 9.0 * (*this)(m + r * kNode));
    }
    return total;
  }

 private:
  static double end_slope(double h0, double h1, double d0, double d1) {
    double d = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (d * d0 <= 0.0) return 0.0;
    if (d0 * d1 <= 0.0 && std::abs(d) > std::abs(3 * d0)) return 3 * d0;
    return d;
  }

  std::vector<double> x_, y_, d_;
  bool linear_ = false;
};

// (independent, dependent) pairs sorted by the independent variable.
inline Pchip bd_fit(std::span<const CurvePoint> curve, BdMode mode, const char* name) {
  if (curve.size() < 2)
    throw ParameterError(std::string(name) + " curve needs at least 2 points");
  std::vector<std::pair<double, double>> xy;
  for (const auto& p : curve) {
    if (!(p.rate > 0.0)) throw ParameterError(std::string(name) + " curve: rates must be > 0");
    const double lr = std::log2(p.rate);
    xy.push_back(mode == BdMode::kRate ? std::pair{p.quality, lr} : std::pair{lr, p.quality});
  }
  std::sort(xy.begin(), xy.end());
  std::vector<double> x, y;
  for (const auto& [a, b] : xy) {
    if (!x.empty() && a == x.back())
      throw ParameterError(std::string(name) + " curve: repeated " +
                           (mode == BdMode::kRate ? "quality" : "rate") + " value");
    x.push_back(a);
    y.push_back(b);
  }
  return Pchip(std::move(x), std::move(y));
}

inline std::pair<double, double> bd_range(std::span<const CurvePoint> curve, BdMode mode) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& p : curve) {
    const double v = mode == BdMode::kRate ? p.quality : std::log2(p.rate);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

}  // namespace detail

// kRate: percent rate change of `test` vs `anchor` at equal quality.
// kQuality: mean quality difference at equal log2 rate.
inline double bd_metric(std::span<const CurvePoint> anchor, std::span<const CurvePoint> test,
                        BdMode mode = BdMode::kRate) {
  const auto fa = detail::bd_fit(anchor, mode, "anchor");
  const auto fb = detail::bd_fit(test, mode, "test");
  const auto [alo, ahi] = detail::bd_range(anchor, mode);
  const auto [blo, bhi] = detail::bd_range(test, mode);
  const double lo = std::max(alo, blo), hi = std::min(ahi, bhi);
  if (!(lo < hi)) throw ParameterError("disjoint quality ranges");
  const double mean_diff = (fb.integrate(lo, hi) - fa.integrate(lo, hi)) / (hi - lo);
  return mode == BdMode::kRate ? (std::exp2(mean_diff) - 1.0) * 100.0 : mean_diff;
}

}  // namespace lcomp
