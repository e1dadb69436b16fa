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
// Seeded synthetic data: Laplacian latent sets, smooth textured frames, point
// clouds with pointwise features, and rate-accuracy point sets.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "lcomp/histogram.hpp"
#include "lcomp/motion.hpp"
#include "lcomp/pcanalysis.hpp"

namespace lcomp::synth {

struct LaplacianDatasetOptions {
  std::size_t inputs = 100;
  std::size_t channels = 8;
  std::size_t height = 32, width = 32;  // N = height * width per channel
  std::vector<double> scales{1.0, 8.0};
  std::uint32_t downscale = 16;
  std::uint64_t seed = 0;
};

// Each input draws one Laplacian scale uniformly from `scales`; every channel
// of that input holds i.i.d. zero-mean Laplacian samples at that scale.
inline std::vector<LatentTensor> laplacian_dataset(const LaplacianDatasetOptions& opt) {
  if (opt.scales.empty()) throw ParameterError("laplacian_dataset: no scales");
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<std::size_t> pick(0, opt.scales.size() - 1);
  std::exponential_distribution<double> expo(1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<LatentTensor> out;
  out.reserve(opt.inputs);
  const std::size_t n = opt.height * opt.width;
  for (std::size_t k = 0; k < opt.inputs; ++k) {
    const double b = opt.scales[pick(rng)];
    std::vector<double> v(opt.channels * n);
    for (double& x : v) x = (sign(rng) ? b : -b) * expo(rng);
    out.emplace_back(opt.channels, opt.height, opt.width, std::move(v), opt.downscale);
  }
  return out;
}

// Sum of plane waves with periods in [min_period, max_period] pixels.
class Texture {
 public:
  struct Wave {
    double amplitude, kx, ky, phase;
  };

  static Texture random(std::uint64_t seed, int waves = 12, double min_period = 12.0,
                        double max_period = 64.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Texture t;
    for (int i = 0; i < waves; ++i) {
      const double period = min_period * std::pow(max_period / min_period, unit(rng));
      const double angle = 2.0 * std::numbers::pi * unit(rng);
      const double k = 2.0 * std::numbers::pi / period;
      t.waves_.push_back({0.5 + unit(rng), k * std::cos(angle), k * std::sin(angle),
                          2.0 * std::numbers::pi * unit(rng)});
    }
    return t;
  }

  double operator()(double x, double y) const {
    double s = 0.0;
    for (const auto& w : waves_) s += w.amplitude * std::sin(w.kx * x + w.ky * y + w.phase);
    return s;
  }

  // Frame with value(p - shift) at every pixel p.
  Frame render(std::size_t height, std::size_t width, double shift_x = 0.0,
               double shift_y = 0.0) const {
    Frame f = Frame::zeros(1, height, width);
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) f.at(0, y, x) = (*this)(x - shift_x, y - shift_y);
    return f;
  }

  // Frame with value(T^{-1}(p)), i.e. the texture moved by the affine map.
  Frame render(std::size_t height, std::size_t width, const AffineParams& params) const {
    const auto t = Affine2::from(params, height, width);
    Frame f = Frame::zeros(1, height, width);
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        const auto [sx, sy] = t.inverse(double(x), double(y));
        f.at(0, y, x) = (*this)(sx, sy);
      }
    return f;
  }

 private:
  std::vector<Wave> waves_;
};

// Uniform draws over the affine ranges used for the latent-motion sweep:
// translation +-32 px, scale 0.95..1.05, shear +-5 deg, rotation +-10 deg.
inline AffineParams random_affine(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> t(-32.0, 32.0), s(0.95, 1.05), sh(-5.0, 5.0),
      r(-10.0, 10.0);
  AffineParams p;
  p.tx = t(rng);
  p.ty = t(rng);
  p.sx = s(rng);
  p.sy = s(rng);
  p.shear_x = sh(rng);
  p.shear_y = sh(rng);
  p.rot = r(rng);
  return p;
}

inline PointCloud random_point_cloud(std::size_t points, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointCloud c;
  c.points.resize(points);
  for (auto& p : c.points) p = {u(rng), u(rng), u(rng)};
  return c;
}

// Pointwise features h(x) = W2 tanh(W1 x + b1) with Gaussian weights.
inline FeatureMap mlp_features(const PointCloud& cloud, std::size_t features, std::size_t hidden,
                               std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> w1(hidden * 3), b1(hidden), w2(features * hidden);
  for (double& v : w1) v = g(rng);
  for (double& v : b1) v = g(rng);
  for (double& v : w2) v = g(rng) / std::sqrt(double(hidden));
  const std::size_t p = cloud.size();
  std::vector<double> out(features * p, 0.0), h(hidden);
  for (std::size_t i = 0; i < p; ++i) {
    const auto& x = cloud.points[i];
    for (std::size_t j = 0; j < hidden; ++j)
      h[j] = std::tanh(w1[3 * j] * x[0] + w1[3 * j + 1] * x[1] + w1[3 * j + 2] * x[2] + b1[j]);
    for (std::size_t f = 0; f < features; ++f) {
      double s = 0.0;
      for (std::size_t j = 0; j < hidden; ++j) s += w2[f * hidden + j] * h[j];
      out[f * p + i] = s;
    }
  }
  return FeatureMap(features, p, std::move(out));
}

inline std::vector<RAPoint> random_ra_points(std::size_t count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> rate(1e3, 1e5), acc(0.0, 100.0);
  std::vector<RAPoint> pts(count);
  for (auto& p : pts) p = {rate(rng), acc(rng)};
  return pts;
}

}  // namespace lcomp::synth
