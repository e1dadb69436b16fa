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
// Static factorized entropy bottleneck.
//
// The scalar CDF c(y) is a sigmoid over a 1-3-3-3-3-1 network:
//
//   z_l = softplus(H_l) x_{l-1} + b_l
//   x_l = z_l + tanh(a_l) * tanh(z_l)      (hidden layers only)
//   c(y) = sigmoid(z_4)
//
// softplus keeps every matrix entry positive and the gated tanh has derivative
// 1 + tanh(a) (1 - tanh(z)^2) >= 0, so c is nondecreasing for every parameter
// value. The density f = dc/dy is propagated in forward mode alongside the
// values; parameter gradients for fitting come from a reverse pass.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcomp/dist.hpp"
#include "lcomp/error.hpp"
#include "lcomp/histogram.hpp"

namespace lcomp {

namespace detail {

inline double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}
inline double inverse_softplus(double y) { return std::log(std::expm1(y)); }
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
// sigmoid'(x) = sigmoid(x) sigmoid(-x), stable for large |x|.
inline double sigmoid_slope(double x) { return sigmoid(x) * sigmoid(-x); }

// Parameter block offsets into the flat parameter vector of a 5-layer model.
struct CdfLayout {
  std::array<std::size_t, 5> matrix{}, bias{}, factor{};
  std::size_t total = 0;
};

constexpr CdfLayout cdf_layout(const std::array<std::size_t, 6>& widths) {
  CdfLayout lay;
  std::size_t at = 0;
  for (std::size_t l = 0; l < 5; ++l) {
    const std::size_t in = widths[l], out = widths[l + 1];
    lay.matrix[l] = at;
    at += in * out;
    lay.bias[l] = at;
    at += out;
    lay.factor[l] = at;
    if (l + 1 < 5) at += out;
  }
  lay.total = at;
  return lay;
}

}  // namespace detail

class MonotoneCdfModel {
 public:
  static constexpr std::array<std::size_t, 6> kWidths = {1, 3, 3, 3, 3, 1};
  static constexpr std::size_t kLayers = 5;

  using Layout = detail::CdfLayout;
  static constexpr Layout layout() { return detail::cdf_layout(kWidths); }
  static constexpr std::size_t kParameterCount = detail::cdf_layout(kWidths).total;

  MonotoneCdfModel() : params_(kParameterCount, 0.0) { refresh(); }

  explicit MonotoneCdfModel(std::vector<double> raw) : params_(std::move(raw)) {
    if (params_.size() != kParameterCount)
      throw ParameterError("bottleneck model needs " + std::to_string(kParameterCount) +
                           " parameters, got " + std::to_string(params_.size()));
    for (double v : params_)
      if (!std::isfinite(v)) throw ParameterError("bottleneck parameters must be finite");
    refresh();
  }

  // Overall slope ~ 1/init_scale (a logistic CDF of that scale), biases drawn
  // uniformly from (-0.5, 0.5), gating factors zero.
  static MonotoneCdfModel initial(double init_scale = 10.0, std::uint64_t seed = 0) {
    if (!(init_scale > 0.0)) throw ParameterError("init_scale must be > 0");
    constexpr Layout lay = layout();
    std::vector<double> p(kParameterCount, 0.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> bias(-0.5, 0.5);
    const double scale = std::pow(init_scale, 1.0 / kLayers);
    for (std::size_t l = 0; l < kLayers; ++l) {
      const std::size_t in = kWidths[l], out = kWidths[l + 1];
      const double init = detail::inverse_softplus(1.0 / scale / static_cast<double>(out));
      for (std::size_t i = 0; i < in * out; ++i) p[lay.matrix[l] + i] = init;
      for (std::size_t i = 0; i < out; ++i) p[lay.bias[l] + i] = bias(rng);
    }
    return MonotoneCdfModel(std::move(p));
  }

  std::span<const double> parameters() const { return params_; }

  // params -= step * direction. Returns false (model unchanged) if any updated
  // parameter would be non-finite.
  bool descend(std::span<const double> direction, double step) {
    std::vector<double> next(params_);
    for (std::size_t i = 0; i < next.size(); ++i) {
      next[i] -= step * direction[i];
      if (!std::isfinite(next[i])) return false;
    }
    params_ = std::move(next);
    refresh();
    return true;
  }

  // Pre-sigmoid value and its derivative with respect to y.
  struct Logit {
    double value;
    double slope;
  };

  Logit logit(double y) const {
    constexpr Layout lay = layout();
    std::array<double, 3> x{y}, dx{1.0};
    std::size_t width = 1;
    for (std::size_t l = 0; l < kLayers; ++l) {
      const std::size_t out = kWidths[l + 1];
      std::array<double, 3> z{}, dz{};
      for (std::size_t o = 0; o < out; ++o) {
        double acc = params_[lay.bias[l] + o], dacc = 0.0;
        for (std::size_t i = 0; i < width; ++i) {
          const double w = weight_[lay.matrix[l] + o * width + i];
          acc += w * x[i];
          dacc += w * dx[i];
        }
        z[o] = acc;
        dz[o] = dacc;
      }
      if (l + 1 == kLayers) return {z[0], dz[0]};
      for (std::size_t o = 0; o < out; ++o) {
        const double t = gate_[lay.factor[l] + o];
        const double th = std::tanh(z[o]);
        x[o] = z[o] + t * th;
        dx[o] = dz[o] * (1.0 + t * (1.0 - th * th));
      }
      width = out;
    }
    return {x[0], dx[0]};
  }

  double cdf(double y) const { return detail::sigmoid(logit(y).value); }

  // f(y) = dc/dy.
  double density(double y) const {
    auto lg = logit(y);
    return detail::sigmoid_slope(lg.value) * lg.slope;
  }

  // Activations of one forward pass, kept for the reverse pass.
  struct Trace {
    std::array<std::array<double, 3>, kLayers + 1> x{};
    std::array<std::array<double, 3>, kLayers> tanh_z{};
    double logit() const { return x[kLayers][0]; }
  };

  Trace trace(double y) const {
    constexpr Layout lay = layout();
    Trace tr;
    tr.x[0][0] = y;
    std::size_t width = 1;
    for (std::size_t l = 0; l < kLayers; ++l) {
      const std::size_t out = kWidths[l + 1];
      for (std::size_t o = 0; o < out; ++o) {
        double acc = params_[lay.bias[l] + o];
        for (std::size_t i = 0; i < width; ++i)
          acc += weight_[lay.matrix[l] + o * width + i] * tr.x[l][i];
        if (l + 1 < kLayers) {
          tr.tanh_z[l][o] = std::tanh(acc);
          acc += gate_[lay.factor[l] + o] * tr.tanh_z[l][o];
        }
        tr.x[l + 1][o] = acc;
      }
      width = out;
    }
    return tr;
  }

  // Accumulates d(loss)/d(params) into `grad` given the forward trace at some y
  // and d(loss)/d(logit(y)) = upstream.
  void backward(const Trace& tr, double upstream, std::span<double> grad) const {
    constexpr Layout lay = layout();
    std::array<double, 3> gx{upstream};
    for (std::size_t l = kLayers; l-- > 0;) {
      const std::size_t in = kWidths[l], out = kWidths[l + 1];
      std::array<double, 3> gz{};
      for (std::size_t o = 0; o < out; ++o) {
        if (l + 1 < kLayers) {
          const double t = gate_[lay.factor[l] + o], th = tr.tanh_z[l][o];
          gz[o] = gx[o] * (1.0 + t * (1.0 - th * th));
          grad[lay.factor[l] + o] += gx[o] * th * (1.0 - t * t);
        } else {
          gz[o] = gx[o];
        }
        grad[lay.bias[l] + o] += gz[o];
      }
      std::array<double, 3> gin{};
      for (std::size_t o = 0; o < out; ++o)
        for (std::size_t i = 0; i < in; ++i) {
          const std::size_t k = lay.matrix[l] + o * in + i;
          grad[k] += gz[o] * tr.x[l][i] * weight_slope_[k];
          gin[i] += gz[o] * weight_[k];
        }
      gx = gin;
    }
  }

  nlohmann::json to_json() const {
    constexpr Layout lay = layout();
    nlohmann::json j;
    j["widths"] = kWidths;
    j["matrices"] = nlohmann::json::array();
    j["biases"] = nlohmann::json::array();
    j["factors"] = nlohmann::json::array();
    for (std::size_t l = 0; l < kLayers; ++l) {
      const std::size_t in = kWidths[l], out = kWidths[l + 1];
      j["matrices"].push_back(std::vector<double>(params_.begin() + lay.matrix[l],
                                                  params_.begin() + lay.matrix[l] + in * out));
      j["biases"].push_back(std::vector<double>(params_.begin() + lay.bias[l],
                                                params_.begin() + lay.bias[l] + out));
      if (l + 1 < kLayers)
        j["factors"].push_back(std::vector<double>(params_.begin() + lay.factor[l],
                                                   params_.begin() + lay.factor[l] + out));
    }
    return j;
  }

  static MonotoneCdfModel from_json(const nlohmann::json& j) {
    constexpr Layout lay = layout();
    try {
      if (j.at("widths").get<std::vector<std::size_t>>() !=
          std::vector<std::size_t>(kWidths.begin(), kWidths.end()))
        throw FormatError("bottleneck model: widths must be [1,3,3,3,3,1]");
      const auto& mats = j.at("matrices");
      const auto& biases = j.at("biases");
      const auto& factors = j.at("factors");
      if (mats.size() != kLayers || biases.size() != kLayers || factors.size() != kLayers - 1)
        throw FormatError("bottleneck model: wrong number of layer arrays");
      std::vector<double> p(kParameterCount, 0.0);
      auto copy = [&](const nlohmann::json& arr, std::size_t offset, std::size_t n,
                      const char* field) {
        auto v = arr.get<std::vector<double>>();
        if (v.size() != n)
          throw FormatError(std::string("bottleneck model: ") + field + " has wrong length");
        std::copy(v.begin(), v.end(), p.begin() + offset);
      };
      for (std::size_t l = 0; l < kLayers; ++l) {
        const std::size_t in = kWidths[l], out = kWidths[l + 1];
        copy(mats[l], lay.matrix[l], in * out, "matrices");
        copy(biases[l], lay.bias[l], out, "biases");
        if (l + 1 < kLayers) copy(factors[l], lay.factor[l], out, "factors");
      }
      return MonotoneCdfModel(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bottleneck model: ") + e.what());
    }
  }

  friend bool operator==(const MonotoneCdfModel& a, const MonotoneCdfModel& b) {
    return a.params_ == b.params_;
  }

 private:
  void refresh() {
    constexpr Layout lay = layout();
    weight_.assign(kParameterCount, 0.0);
    weight_slope_.assign(kParameterCount, 0.0);
    gate_.assign(kParameterCount, 0.0);
    for (std::size_t l = 0; l < kLayers; ++l) {
      const std::size_t n = kWidths[l] * kWidths[l + 1];
      for (std::size_t i = 0; i < n; ++i) {
        weight_[lay.matrix[l] + i] = detail::softplus(params_[lay.matrix[l] + i]);
        weight_slope_[lay.matrix[l] + i] = detail::sigmoid(params_[lay.matrix[l] + i]);
      }
      if (l + 1 < kLayers)
        for (std::size_t o = 0; o < kWidths[l + 1]; ++o)
          gate_[lay.factor[l] + o] = std::tanh(params_[lay.factor[l] + o]);
    }
  }

  std::vector<double> params_;
  // Derived from params_: softplus(H), softplus'(H), tanh(a).
  std::vector<double> weight_, weight_slope_, gate_;
};

namespace detail {

// c(y + 1/2) - c(y - 1/2) evaluated on whichever side of the sigmoid keeps
// the subtraction away from 1 - 1.
struct BinLikelihood {
  double p;
  double dp_dupper;  // d p / d logit(y + 1/2)
  double dp_dlower;  // d p / d logit(y - 1/2)
};

inline BinLikelihood bin_likelihood(double upper, double lower) {
  const double sign = (upper + lower) > 0.0 ? -1.0 : 1.0;
  const double p = std::abs(sigmoid(sign * upper) - sigmoid(sign * lower));
  return {p, sigmoid_slope(upper), -sigmoid_slope(lower)};
}

}  // namespace detail

inline double likelihood(const MonotoneCdfModel& model, double y) {
  if (!std::isfinite(y)) throw ParameterError("likelihood needs a finite value");
  return detail::bin_likelihood(model.logit(y + 0.5).value, model.logit(y - 0.5).value).p;
}

// likelihood() clamped to the coder's probability floor.
inline double coding_likelihood(const MonotoneCdfModel& model, double y) {
  return std::max(likelihood(model, y), kProbabilityFloor);
}

inline double rate_bits_static(const MonotoneCdfModel& model, const LatentChannel& ch) {
  double r = 0.0;
  for (double y : ch.values()) {
    const double p = likelihood(model, y);
    if (p <= 0.0)
      throw InfiniteRateError("infinite rate: model likelihood underflows at " +
                              detail::format_double(y));
    r -= std::log2(p);
  }
  return r;
}

// dR/dy_k = -(1/p(y_k)) [f(y_k + 1/2) - f(y_k - 1/2)] / ln 2, in bits per unit.
inline std::vector<double> rate_grad_static(const MonotoneCdfModel& model,
                                            const LatentChannel& ch) {
  std::vector<double> g;
  g.reserve(ch.size());
  for (double y : ch.values()) {
    const double p = likelihood(model, y);
    if (p <= 0.0)
      throw InfiniteRateError("infinite rate: model likelihood underflows at " +
                              detail::format_double(y));
    g.push_back(-(model.density(y + 0.5) - model.density(y - 0.5)) / p / std::numbers::ln2);
  }
  return g;
}

// The model's pmf on a finite support, outer tails folded into the edge bins.
inline DiscreteDistribution model_distribution(const MonotoneCdfModel& model, Support s) {
  std::vector<double> m(s.bins);
  double prev = 0.0;
  for (std::size_t i = 0; i < s.bins; ++i) {
    const double upper = i + 1 == s.bins ? 1.0 : model.cdf(s.center(i) + 0.5);
    m[i] = std::max(upper - prev, 0.0);
    prev = upper;
  }
  return DiscreteDistribution::normalized(s.y_min, std::move(m));
}

struct FitOptions {
  std::size_t steps = 1000;
  double learning_rate = 1.0;
  std::uint64_t seed = 0;
  double init_scale = 10.0;
};

// Minimizes the mean of -log2 p(y_i + u_i), u_i ~ U(-1/2, 1/2) redrawn every
// step, by full-batch gradient descent.
inline MonotoneCdfModel fit(std::span<const double> samples, const FitOptions& opt = {}) {
  if (samples.size() < 100)
    throw ParameterError("fit needs at least 100 samples, got " +
                         std::to_string(samples.size()));
  for (double y : samples)
    if (!std::isfinite(y)) throw ParameterError("fit samples must be finite");
  if (!(opt.learning_rate > 0.0)) throw ParameterError("learning_rate must be > 0");

  auto model = MonotoneCdfModel::initial(opt.init_scale, opt.seed);
  std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> noise(-0.5, 0.5);
  std::vector<double> grad(MonotoneCdfModel::kParameterCount);
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  constexpr double kLikelihoodBound = 1e-9;

  for (std::size_t step = 0; step < opt.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (double y : samples) {
      const double t = y + noise(rng);
      const auto upper = model.trace(t + 0.5);
      const auto lower = model.trace(t - 0.5);
      auto bl = detail::bin_likelihood(upper.logit(), lower.logit());
      // Gradient passes through the lower bound unchanged.
      const double p = std::max(bl.p, kLikelihoodBound);
      loss -= std::log2(p) * inv_n;
      const double dloss_dp = -inv_n / (p * std::numbers::ln2);
      model.backward(upper, dloss_dp * bl.dp_dupper, grad);
      model.backward(lower, dloss_dp * bl.dp_dlower, grad);
    }
    if (!std::isfinite(loss) || !model.descend(grad, opt.learning_rate))
      throw FitError("bottleneck fit diverged at step " + std::to_string(step));
  }
  return model;
}

}  // namespace lcomp
