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
// Per-channel histograms of latent values and the rate gradients that flow
// back through them.
//
// The soft histogram places a triangular kernel max(0, 1 - |u|) on every bin
// centre, so each sample splits its unit mass linearly between the two bins
// that bracket it. The hard histogram uses a rectangular kernel (nearest bin).
// The straight-through variant returns the hard masses with the soft Jacobian.
//
// Bin width is fixed at 1 and the normalization constant is N, the number of
// samples in the channel.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "lcomp/dist.hpp"
#include "lcomp/error.hpp"
#include "lcomp/tensorio.hpp"

namespace lcomp {

class LatentChannel {
 public:
  LatentChannel(std::vector<double> values, Support support)
      : values_(std::move(values)), support_(support) {
    if (values_.empty()) throw ParameterError("latent channel needs at least one value");
    if (support_.bins == 0) throw ParameterError("support needs at least one bin");
    for (std::size_t k = 0; k < values_.size(); ++k)
      if (!std::isfinite(values_[k]) || !support_.contains(values_[k]))
        throw ParameterError("value " + detail::format_double(values_[k]) + " at index " +
                             std::to_string(k) + " lies outside support [" +
                             std::to_string(support_.y_min) + ", " +
                             std::to_string(support_.y_max()) + "]");
  }

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  const Support& support() const { return support_; }

 private:
  std::vector<double> values_;
  Support support_;
};

// M channels sharing an H_y x W_y grid, produced from an input downscaled by s.
class LatentTensor {
 public:
  LatentTensor(std::size_t channels, std::size_t height, std::size_t width,
               std::vector<double> values, std::uint32_t downscale = 1)
      : channels_(channels), height_(height), width_(width), downscale_(downscale),
        values_(std::move(values)) {
    if (channels_ == 0 || height_ == 0 || width_ == 0)
      throw ParameterError("latent tensor dims must be >= 1");
    if (values_.size() != channels_ * height_ * width_)
      throw MismatchError("latent tensor value count does not match dims");
    if (downscale_ == 0) throw ParameterError("downscale factor must be >= 1");
  }

  // rank 3 -> [M, H, W]; rank 2 -> [M, N]; rank 1 -> one channel.
  static LatentTensor from_tensor(const Tensor& t, std::uint32_t downscale = 1) {
    std::vector<double> v(t.data.begin(), t.data.end());
    switch (t.rank()) {
      case 1: return LatentTensor(1, 1, t.dims[0], std::move(v), downscale);
      case 2: return LatentTensor(t.dims[0], 1, t.dims[1], std::move(v), downscale);
      case 3: return LatentTensor(t.dims[0], t.dims[1], t.dims[2], std::move(v), downscale);
      default: throw FormatError("latent tensor must have rank 1, 2 or 3");
    }
  }

  Tensor to_tensor() const {
    Tensor t({static_cast<std::uint32_t>(channels_), static_cast<std::uint32_t>(height_),
              static_cast<std::uint32_t>(width_)},
             {});
    t.data.assign(values_.begin(), values_.end());
    return t;
  }

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t elements_per_channel() const { return height_ * width_; }
  std::uint32_t downscale() const { return downscale_; }

  std::span<const double> channel_values(std::size_t j) const {
    return std::span(values_).subspan(j * height_ * width_, height_ * width_);
  }

  LatentChannel channel(std::size_t j, Support support) const {
    auto v = channel_values(j);
    return LatentChannel(std::vector<double>(v.begin(), v.end()), support);
  }

  // Rounds to the nearest integer and clamps into the support.
  LatentChannel quantized_channel(std::size_t j, Support support) const {
    std::vector<double> v;
    v.reserve(elements_per_channel());
    for (double x : channel_values(j))
      v.push_back(std::clamp(std::nearbyint(x), double(support.y_min), double(support.y_max())));
    return LatentChannel(std::move(v), support);
  }

 private:
  std::size_t channels_, height_, width_;
  std::uint32_t downscale_;
  std::vector<double> values_;
};

namespace detail {

// Bracketing bins of y: floor index, fractional offset alpha in [0, 1).
struct Bracket {
  std::size_t floor;
  double alpha;
};

inline Bracket bracket(double y, const Support& s) {
  const double u = y - s.y_min;
  double f = std::floor(u);
  // y == y_max lands on the last bin with alpha == 0.
  if (f >= static_cast<double>(s.bins - 1)) f = static_cast<double>(s.bins - 1);
  return {static_cast<std::size_t>(f), u - f};
}

}  // namespace detail

inline DiscreteDistribution soft_histogram(const LatentChannel& ch) {
  const auto& s = ch.support();
  std::vector<double> m(s.bins, 0.0);
  const double inv_n = 1.0 / static_cast<double>(ch.size());
  for (double y : ch.values()) {
    auto [f, a] = detail::bracket(y, s);
    m[f] += (1.0 - a) * inv_n;
    if (a > 0.0) m[f + 1] += a * inv_n;
  }
  return DiscreteDistribution::normalized(s.y_min, std::move(m));
}

// Nearest-bin counts; a sample exactly halfway between two centres goes to the
// lower bin.
inline DiscreteDistribution hard_histogram(const LatentChannel& ch) {
  const auto& s = ch.support();
  std::vector<double> counts(s.bins, 0.0);
  for (double y : ch.values()) {
    auto [f, a] = detail::bracket(y, s);
    counts[a > 0.5 ? f + 1 : f] += 1.0;
  }
  return DiscreteDistribution::normalized(s.y_min, std::move(counts));
}

// d p_i / d y_k, stored sample-major: row(k)[i].
class HistogramJacobian {
 public:
  HistogramJacobian(std::size_t samples, std::size_t bins)
      : samples_(samples), bins_(bins), values_(samples * bins, 0.0) {}

  std::size_t samples() const { return samples_; }
  std::size_t bins() const { return bins_; }
  double at(std::size_t sample, std::size_t bin) const { return values_[sample * bins_ + bin]; }
  double& at(std::size_t sample, std::size_t bin) { return values_[sample * bins_ + bin]; }
  std::span<const double> row(std::size_t sample) const {
    return std::span(values_).subspan(sample * bins_, bins_);
  }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const HistogramJacobian&, const HistogramJacobian&) = default;

 private:
  std::size_t samples_, bins_;
  std::vector<double> values_;
};

namespace detail {

// The (lower, upper) bin pair whose kernels are active around y. At a bin
// centre the left-limit pair is used; at the first centre, where no left limit
// exists on the support, the right-limit pair.
inline std::pair<std::size_t, std::size_t> active_pair(double y, const Support& s) {
  auto [f, a] = bracket(y, s);
  if (a > 0.0) return {f, f + 1};
  if (f > 0) return {f - 1, f};
  return {0, s.bins > 1 ? 1 : 0};
}

}  // namespace detail

inline HistogramJacobian soft_histogram_jacobian(const LatentChannel& ch) {
  const auto& s = ch.support();
  HistogramJacobian jac(ch.size(), s.bins);
  if (s.bins == 1) return jac;
  const double g = 1.0 / static_cast<double>(ch.size());
  for (std::size_t k = 0; k < ch.size(); ++k) {
    auto [lo, hi] = detail::active_pair(ch.values()[k], s);
    jac.at(k, lo) = -g;
    jac.at(k, hi) = g;
  }
  return jac;
}

struct SteHistogram {
  DiscreteDistribution forward;
  HistogramJacobian backward;
};

inline SteHistogram ste_histogram(const LatentChannel& ch) {
  return {hard_histogram(ch), soft_histogram_jacobian(ch)};
}

enum class HistogramKind { kHard, kSoft };

// (H W / s^2) * CE(histogram(ch), phat). Requires H W / s^2 == N.
inline double rate_bits(const LatentChannel& ch, const DiscreteDistribution& phat,
                        std::size_t height, std::size_t width, std::uint32_t s,
                        HistogramKind kind = HistogramKind::kHard) {
  if (s == 0) throw ParameterError("downscale factor must be >= 1");
  const std::size_t s2 = std::size_t{s} * s;
  if ((height * width) % s2 != 0 || (height * width) / s2 != ch.size())
    throw MismatchError("dimension error: H*W/s^2 = " +
                        detail::format_double(double(height * width) / double(s2)) +
                        " but channel has N = " + std::to_string(ch.size()));
  const auto p = kind == HistogramKind::kHard ? hard_histogram(ch) : soft_histogram(ch);
  return static_cast<double>(ch.size()) * cross_entropy_bits(p, phat);
}

inline double rate_bits(const LatentChannel& ch, const DiscreteDistribution& phat,
                        HistogramKind kind = HistogramKind::kHard) {
  return rate_bits(ch, phat, 1, ch.size(), 1, kind);
}

// Which bin's code length is weighted by alpha = y - b_floor.
//   kNearestWeighted: -( (1-alpha) log p_floor + alpha log p_ceil )
//   kAsWritten:       -( alpha log p_floor + (1-alpha) log p_ceil )
// Only kNearestWeighted has d/dy equal to the ceil-minus-floor code-length
// gradient and sums to the soft-histogram rate.
enum class Interpolation { kNearestWeighted, kAsWritten };

inline double element_rate_bits(double y, const DiscreteDistribution& phat,
                                Interpolation orient = Interpolation::kNearestWeighted) {
  const auto& s = phat.support();
  if (!std::isfinite(y) || !s.contains(y))
    throw ParameterError("value " + detail::format_double(y) + " outside support");
  auto [f, a] = detail::bracket(y, s);
  const std::size_t c = a > 0.0 ? f + 1 : f;
  auto code_length = [&](std::size_t i) {
    if (phat[i] == 0.0)
      throw InfiniteRateError("infinite rate: bin " + std::to_string(s.center(i)) +
                              " has zero probability");
    return -std::log2(phat[i]);
  };
  const double w_floor = orient == Interpolation::kNearestWeighted ? 1.0 - a : a;
  double r = 0.0;
  if (w_floor != 0.0) r += w_floor * code_length(f);
  if (1.0 - w_floor != 0.0) r += (1.0 - w_floor) * code_length(c);
  return r;
}

enum class GradientPoint : std::uint8_t {
  kInterior,
  kBinCenter,     // kink of the triangular kernel: one-sided limit used
  kHalfInteger,   // hard assignment flips here: forward rate is discontinuous
};

struct RateGradient {
  // -(log2 phat_ceil - log2 phat_floor): exact gradient of the soft rate with
  // phat held fixed.
  std::vector<double> simplified;
  // -([p/(phat ln2) + log2 phat]_ceil - [...]_floor): exact when phat moves with
  // p, i.e. d phat / dy == d p / dy.
  std::vector<double> unsimplified;
  std::vector<GradientPoint> points;
};

// Per-sample dR_y/dy_k in bits per unit, R_y = (HW/s^2) sum_i -p_i log2 phat_i,
// with p the soft histogram of `ch`.
inline RateGradient rate_grad(const LatentChannel& ch, const DiscreteDistribution& phat) {
  const auto& s = ch.support();
  if (!(s == phat.support())) throw MismatchError("support mismatch between channel and phat");
  const auto p = soft_histogram(ch);
  std::vector<double> log_q(s.bins), bracket_term(s.bins);
  for (std::size_t i = 0; i < s.bins; ++i) {
    if (phat[i] == 0.0) {
      log_q[i] = -std::numeric_limits<double>::infinity();
      bracket_term[i] = log_q[i];
      continue;
    }
    log_q[i] = std::log2(phat[i]);
    bracket_term[i] = p[i] / phat[i] / std::numbers::ln2 + log_q[i];
  }
  RateGradient out;
  out.simplified.reserve(ch.size());
  out.unsimplified.reserve(ch.size());
  out.points.reserve(ch.size());
  for (double y : ch.values()) {
    auto [lo, hi] = detail::active_pair(y, s);
    if (lo != hi && (!std::isfinite(log_q[lo]) || !std::isfinite(log_q[hi])))
      throw InfiniteRateError("infinite rate: phat is zero next to value " +
                              detail::format_double(y));
    out.simplified.push_back(lo == hi ? 0.0 : -(log_q[hi] - log_q[lo]));
    out.unsimplified.push_back(lo == hi ? 0.0 : -(bracket_term[hi] - bracket_term[lo]));
    const double frac = y - std::floor(y);
    out.points.push_back(frac == 0.0   ? GradientPoint::kBinCenter
                         : frac == 0.5 ? GradientPoint::kHalfInteger
                                       : GradientPoint::kInterior);
  }
  return out;
}

}  // namespace lcomp
