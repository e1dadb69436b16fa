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
// Discrete encoding distributions on unit-width integer-centred bins, the
// information measures over them, and discretized Gaussian / GMM densities.
// All rates are in bits.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcomp/error.hpp"
#include "lcomp/tensorio.hpp"

namespace lcomp {

// Smallest mass any bin may carry once a distribution is handed to the coder.
inline constexpr double kProbabilityFloor = 1.0 / 65536.0;
inline constexpr double kMassTolerance = 1e-9;

// Bin i (0-based) is centred on y_min + i.
struct Support {
  int y_min = 0;
  std::size_t bins = 1;

  int y_max() const { return y_min + static_cast<int>(bins) - 1; }
  int center(std::size_t i) const { return y_min + static_cast<int>(i); }
  bool contains(double y) const { return y >= y_min && y <= y_max(); }
  friend bool operator==(const Support&, const Support&) = default;
};

class DiscreteDistribution {
 public:
  // Masses must be nonnegative and sum to one within kMassTolerance.
  DiscreteDistribution(int y_min, std::vector<double> masses)
      : support_{y_min, masses.size()}, masses_(std::move(masses)) {
    if (masses_.empty()) throw ParameterError("distribution needs at least one bin");
    double sum = 0.0;
    for (double m : masses_) {
      if (!(m >= 0.0) || !std::isfinite(m))
        throw ParameterError("distribution masses must be finite and >= 0");
      sum += m;
    }
    if (std::abs(sum - 1.0) > kMassTolerance)
      throw ParameterError("distribution masses sum to " + detail::format_double(sum) +
                           ", expected 1");
  }

  // Scales nonnegative weights to unit sum.
  static DiscreteDistribution normalized(int y_min, std::vector<double> weights) {
    double sum = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w))
        throw ParameterError("weights must be finite and >= 0");
      sum += w;
    }
    if (!(sum > 0.0)) throw ParameterError("weights sum to zero");
    for (double& w : weights) w /= sum;
    return DiscreteDistribution(y_min, std::move(weights));
  }

  static DiscreteDistribution uniform(Support s) {
    return DiscreteDistribution(s.y_min, std::vector<double>(s.bins, 1.0 / s.bins));
  }

  const Support& support() const { return support_; }
  int y_min() const { return support_.y_min; }
  std::size_t bins() const { return support_.bins; }
  std::span<const double> masses() const { return masses_; }
  double operator[](std::size_t i) const { return masses_[i]; }

  // Index of the bin centred on integer `value`, if it is on the support.
  std::optional<std::size_t> index_of(int value) const {
    if (value < support_.y_min || value > support_.y_max()) return std::nullopt;
    return static_cast<std::size_t>(value - support_.y_min);
  }

  friend bool operator==(const DiscreteDistribution&, const DiscreteDistribution&) = default;

 private:
  Support support_;
  std::vector<double> masses_;
};

namespace detail {

inline void require_same_support(const DiscreteDistribution& p,
                                 const DiscreteDistribution& q) {
  if (!(p.support() == q.support()))
    throw MismatchError("support mismatch: [" + std::to_string(p.y_min()) + ", +" +
                        std::to_string(p.bins()) + ") vs [" + std::to_string(q.y_min()) +
                        ", +" + std::to_string(q.bins()) + ")");
}

// Standard normal CDF and its complement, both accurate in the far tails.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

// P(lo < Z <= hi) without cancellation when both bounds sit in one tail.
inline double normal_interval(double lo, double hi) {
  if (lo >= 0.0) return normal_sf(lo) - normal_sf(hi);
  return normal_cdf(hi) - normal_cdf(lo);
}

}  // namespace detail

inline double entropy_bits(const DiscreteDistribution& p) {
  double h = 0.0;
  for (double m : p.masses())
    if (m > 0.0) h -= m * std::log2(m);
  return h;
}

inline double cross_entropy_bits(const DiscreteDistribution& p,
                                 const DiscreteDistribution& q) {
  detail::require_same_support(p, q);
  double ce = 0.0;
  for (std::size_t i = 0; i < p.bins(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0)
      throw InfiniteRateError("infinite rate: bin " + std::to_string(p.support().center(i)) +
                              " has p > 0 but q = 0");
    ce -= p[i] * std::log2(q[i]);
  }
  return ce;
}

inline double kl_bits(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  detail::require_same_support(p, q);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.bins(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0)
      throw InfiniteRateError("infinite rate: bin " + std::to_string(p.support().center(i)) +
                              " has p > 0 but q = 0");
    kl += p[i] * std::log2(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

// Clamps every mass to at least `floor` and renormalizes.
inline DiscreteDistribution with_probability_floor(const DiscreteDistribution& p,
                                                   double floor = kProbabilityFloor) {
  std::vector<double> m(p.masses().begin(), p.masses().end());
  for (double& v : m) v = std::max(v, floor);
  return DiscreteDistribution::normalized(p.y_min(), std::move(m));
}

// Binned area under N(mu, sigma^2). Mass beyond the outer bin edges is folded
// into the first/last bin, so the result always sums to one.
inline DiscreteDistribution discretize_gaussian(double mu, double sigma, Support support) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw ParameterError("sigma must be > 0, got " + detail::format_double(sigma));
  if (!std::isfinite(mu)) throw ParameterError("mu must be finite");
  if (support.bins == 0) throw ParameterError("support needs at least one bin");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> m(support.bins);
  for (std::size_t i = 0; i < support.bins; ++i) {
    const double b = support.center(i);
    const double lo = i == 0 ? -inf : (b - 0.5 - mu) / sigma;
    const double hi = i + 1 == support.bins ? inf : (b + 0.5 - mu) / sigma;
    m[i] = std::max(detail::normal_interval(lo, hi), 0.0);
  }
  return DiscreteDistribution::normalized(support.y_min, std::move(m));
}

struct GaussianComponent {
  double weight = 1.0;
  double mean = 0.0;
  double scale = 1.0;
  friend bool operator==(const GaussianComponent&, const GaussianComponent&) = default;
};

struct GaussianMixtureParams {
  std::vector<GaussianComponent> components;

  void validate() const {
    if (components.empty()) throw ParameterError("mixture needs at least one component");
    double sum = 0.0;
    for (const auto& c : components) {
      if (!(c.scale > 0.0)) throw ParameterError("mixture scale must be > 0");
      if (!(c.weight >= 0.0)) throw ParameterError("mixture weight must be >= 0");
      sum += c.weight;
    }
    if (std::abs(sum - 1.0) > kMassTolerance)
      throw ParameterError("mixture weights sum to " + detail::format_double(sum));
  }
  friend bool operator==(const GaussianMixtureParams&, const GaussianMixtureParams&) = default;
};

inline DiscreteDistribution discretize_gmm(const GaussianMixtureParams& params,
                                           Support support) {
  params.validate();
  std::vector<double> m(support.bins, 0.0);
  for (const auto& c : params.components) {
    if (c.weight == 0.0) continue;
    auto comp = discretize_gaussian(c.mean, c.scale, support);
    for (std::size_t i = 0; i < support.bins; ++i) m[i] += c.weight * comp[i];
  }
  return DiscreteDistribution::normalized(support.y_min, std::move(m));
}

// Distribution <-> TensorFile (rank 1) plus "<path>.json" sidecar {y_min, B}.
inline void save_distribution(const DiscreteDistribution& p,
                              const std::filesystem::path& path) {
  Tensor t({static_cast<std::uint32_t>(p.bins())}, {});
  t.data.reserve(p.bins());
  for (double m : p.masses()) t.data.push_back(static_cast<float>(m));
  write_tensor(t, path);
  nlohmann::json side = {{"y_min", p.y_min()}, {"B", p.bins()}};
  const std::string text = side.dump() + "\n";
  detail::write_file(std::filesystem::path(path.string() + ".json"),
                     std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                               text.size()));
}

inline DiscreteDistribution load_distribution(const std::filesystem::path& path) {
  Tensor t = read_tensor(path);
  if (t.rank() != 1) throw FormatError(path.string() + ": distribution must be rank 1");
  const auto side_path = std::filesystem::path(path.string() + ".json");
  auto bytes = detail::read_file(side_path);
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(side_path.string() + ": " + e.what());
  }
  if (!side.contains("y_min") || !side.contains("B"))
    throw FormatError(side_path.string() + ": needs keys y_min and B");
  if (side["B"].get<std::size_t>() != t.dims[0])
    throw FormatError(side_path.string() + ": B does not match tensor length");
  std::vector<double> m(t.data.begin(), t.data.end());
  // float32 storage loses the last bits of the unit-sum constraint.
  return DiscreteDistribution::normalized(side["y_min"].get<int>(), std::move(m));
}

}  // namespace lcomp
