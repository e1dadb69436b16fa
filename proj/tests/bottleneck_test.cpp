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

#include "lcomp/bottleneck.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lcomp/dist.hpp"
#include "lcomp/histogram.hpp"

namespace lcomp {
namespace {

MonotoneCdfModel RandomModel(std::mt19937_64& rng, double spread = 2.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<double> p(MonotoneCdfModel::kParameterCount);
  for (double& v : p) v = u(rng);
  return MonotoneCdfModel(std::move(p));
}

std::vector<double> RoundedSamples(std::size_t n, std::uint64_t seed,
                                   const std::function<double(std::mt19937_64&)>& draw) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = std::nearbyint(draw(rng));
  return v;
}

FitOptions Quick() {
  FitOptions o;
  o.steps = 1000;
  o.seed = 3;
  return o;
}

TEST(MonotoneCdfModelTest, HasFiftyEightParameters) {
  EXPECT_EQ(MonotoneCdfModel::kParameterCount, 58u);
  EXPECT_THROW(MonotoneCdfModel(std::vector<double>(57, 0.0)), ParameterError);
  EXPECT_THROW(MonotoneCdfModel(std::vector<double>(58, NAN)), ParameterError);
}

TEST(MonotoneCdfModelTest, MonotoneAndBoundedForRandomParameters) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> y(-50.0, 50.0);
  for (int draw = 0; draw < 10000; ++draw) {
    const auto m = RandomModel(rng);
    double a = y(rng), b = y(rng);
    if (a > b) std::swap(a, b);
    const double ca = m.cdf(a), cb = m.cdf(b);
    ASSERT_LE(ca, cb) << "draw " << draw;
    ASSERT_GE(ca, 0.0);
    ASSERT_LE(cb, 1.0);
    if (draw % 100 == 0) {
      EXPECT_LT(m.cdf(-1e4), 1e-6);
      EXPECT_GT(m.cdf(1e4), 1.0 - 1e-6);
    }
  }
}

TEST(MonotoneCdfModelTest, InitialModelIsBroadLogistic) {
  const auto m = MonotoneCdfModel::initial(10.0, 0);
  // Slope of the logit is 1/10 everywhere when the gates are zero.
  EXPECT_NEAR(m.logit(3.0).slope, 0.1, 1e-12);
  EXPECT_GT(likelihood(m, 0.0), 0.02);
}

TEST(MonotoneCdfModelTest, DensityMatchesFiniteDifferenceOfCdf) {
  std::mt19937_64 rng(2);
  for (int draw = 0; draw < 50; ++draw) {
    const auto m = RandomModel(rng, 1.0);
    for (double y : {-3.0, -0.7, 0.0, 1.3, 4.0}) {
      const double h = 1e-5;
      const double fd = (m.cdf(y + h) - m.cdf(y - h)) / (2 * h);
      EXPECT_NEAR(m.density(y), fd, 1e-7 + 1e-5 * std::abs(fd));
    }
  }
}

TEST(MonotoneCdfModelTest, ParameterGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  const auto m = RandomModel(rng, 1.0);
  const double y = 0.37;
  std::vector<double> grad(MonotoneCdfModel::kParameterCount, 0.0);
  m.backward(m.trace(y), 1.0, grad);
  const auto base = m.parameters();
  for (std::size_t k = 0; k < base.size(); ++k) {
    const double h = 1e-6;
    std::vector<double> up(base.begin(), base.end()), dn = up;
    up[k] += h;
    dn[k] -= h;
    const double fd =
        (MonotoneCdfModel(up).logit(y).value - MonotoneCdfModel(dn).logit(y).value) / (2 * h);
    EXPECT_NEAR(grad[k], fd, 1e-6 * std::max(1.0, std::abs(fd))) << "param " << k;
  }
  EXPECT_DOUBLE_EQ(m.trace(y).logit(), m.logit(y).value);
}

TEST(MonotoneCdfModelTest, JsonRoundTrip) {
  std::mt19937_64 rng(4);
  const auto m = RandomModel(rng);
  EXPECT_EQ(MonotoneCdfModel::from_json(m.to_json()), m);
  auto j = m.to_json();
  j["widths"] = {1, 2, 1};
  EXPECT_THROW(MonotoneCdfModel::from_json(j), FormatError);
  j = m.to_json();
  j.erase("biases");
  EXPECT_THROW(MonotoneCdfModel::from_json(j), FormatError);
}

TEST(LikelihoodTest, NonnegativeWithSubUnitMass) {
  std::mt19937_64 rng(5);
  for (int draw = 0; draw < 200; ++draw) {
    const auto m = RandomModel(rng);
    double total = 0.0;
    for (int y = -200; y <= 200; ++y) {
      const double p = likelihood(m, y);
      ASSERT_GE(p, 0.0);
      total += p;
    }
    EXPECT_LE(total, 1.0 + 1e-6);
  }
  EXPECT_THROW(likelihood(MonotoneCdfModel::initial(), INFINITY), ParameterError);
}

TEST(LikelihoodTest, CodingLikelihoodIsFloored) {
  const auto m = MonotoneCdfModel::initial(0.1, 0);
  EXPECT_LT(likelihood(m, 500.0), kProbabilityFloor);
  EXPECT_EQ(coding_likelihood(m, 500.0), kProbabilityFloor);
}

TEST(StaticRateTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  const auto m = RandomModel(rng, 1.0);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::vector<double> ys(100);
  for (double& y : ys) y = u(rng);
  const Support s{-10, 21};
  const auto g = rate_grad_static(m, LatentChannel(ys, s));
  for (std::size_t k = 0; k < ys.size(); ++k) {
    const double h = 1e-5;
    auto up = ys, dn = ys;
    up[k] += h;
    dn[k] -= h;
    const double fd =
        (rate_bits_static(m, LatentChannel(up, s)) - rate_bits_static(m, LatentChannel(dn, s))) / (2 * h);
    EXPECT_NEAR(g[k], fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(StaticRateTest, SymmetricModelHasZeroGradientAtCentre) {
  const auto lay = MonotoneCdfModel::layout();
  const auto init = MonotoneCdfModel::initial(4.0, 9);
  std::vector<double> p(init.parameters().begin(), init.parameters().end());
  for (std::size_t l = 0; l < MonotoneCdfModel::kLayers; ++l)
    for (std::size_t o = 0; o < MonotoneCdfModel::kWidths[l + 1]; ++o) p[lay.bias[l] + o] = 0.0;
  const MonotoneCdfModel m(p);
  EXPECT_NEAR(rate_grad_static(m, LatentChannel({0.0}, {-3, 7}))[0], 0.0, 1e-12);
  EXPECT_NEAR(m.cdf(0.0), 0.5, 1e-12);
}

TEST(StaticRateTest, FarTailMassKeepsPrecision) {
  // Both logits deep in the upper tail: 1 - 1 cancellation would give 0.
  const auto bl = detail::bin_likelihood(40.0, 39.0);
  const double oracle = std::exp(-39.0) / (1 + std::exp(-39.0)) - std::exp(-40.0) / (1 + std::exp(-40.0));
  EXPECT_NEAR(bl.p / oracle, 1.0, 1e-12);
  const auto mid = detail::bin_likelihood(1e9, -1e9);
  EXPECT_NEAR(mid.p, 1.0, 1e-12);
}

TEST(FitTest, UnitGaussianMatchesDiscretizedMass) {
  std::normal_distribution<double> g(0.0, 1.0);
  const auto ys = RoundedSamples(2000, 11, [&](auto& r) { return g(r); });
  const auto m = fit(ys, Quick());
  EXPECT_NEAR(likelihood(m, 0.0), 0.3829, 0.1 * 0.3829);
  // Unimodal: rate falls when moving toward the mode.
  EXPECT_LT(rate_grad_static(m, LatentChannel({-2.0}, {-5, 11}))[0], 0.0);
  EXPECT_GT(rate_grad_static(m, LatentChannel({2.0}, {-5, 11}))[0], 0.0);
}

TEST(FitTest, DegenerateDataConcentratesMass) {
  const std::vector<double> zeros(500, 0.0);
  EXPECT_GT(likelihood(fit(zeros, Quick()), 0.0), 0.9);
}

TEST(FitTest, WideGaussianRateNearEntropy) {
  std::normal_distribution<double> g(0.0, 3.0);
  const auto ys = RoundedSamples(2000, 12, [&](auto& r) { return g(r); });
  const auto m = fit(ys, Quick());
  const double h = entropy_bits(discretize_gaussian(0.0, 3.0, {-40, 81}));
  const double rate = rate_bits_static(m, LatentChannel(ys, {-40, 81})) / ys.size();
  EXPECT_NEAR(rate, h, 0.2);
}

TEST(FitTest, UnitLaplacianRateNearEntropy) {
  std::exponential_distribution<double> e(1.0);
  std::bernoulli_distribution sign(0.5);
  const auto ys = RoundedSamples(2000, 13, [&](auto& r) { return (sign(r) ? 1 : -1) * e(r); });
  // Oracle: masses of a rounded unit Laplacian.
  std::vector<double> m(81);
  auto cdf = [](double x) { return x < 0 ? 0.5 * std::exp(x) : 1.0 - 0.5 * std::exp(-x); };
  for (int i = 0; i < 81; ++i) {
    const double b = i - 40.0;
    m[i] = (i == 80 ? 1.0 : cdf(b + 0.5)) - (i == 0 ? 0.0 : cdf(b - 0.5));
  }
  const double h = entropy_bits(DiscreteDistribution::normalized(-40, m));
  const auto model = fit(ys, Quick());
  EXPECT_NEAR(rate_bits_static(model, LatentChannel(ys, {-40, 81})) / ys.size(), h, 0.1);
}

TEST(FitTest, DeterministicForASeed) {
  std::normal_distribution<double> g(0.0, 2.0);
  const auto ys = RoundedSamples(300, 14, [&](auto& r) { return g(r); });
  FitOptions o;
  o.steps = 100;
  o.seed = 7;
  EXPECT_EQ(fit(ys, o), fit(ys, o));
  o.seed = 8;
  EXPECT_FALSE(fit(ys, o) == fit(ys, FitOptions{100, 1.0, 7, 10.0}));
}

TEST(FitTest, RejectsTooFewSamplesAndBadOptions) {
  EXPECT_THROW(fit(std::vector<double>(99, 0.0)), ParameterError);
  FitOptions o;
  o.learning_rate = 0.0;
  EXPECT_THROW(fit(std::vector<double>(100, 0.0), o), ParameterError);
}

TEST(FitTest, StaticModelPaysTheAmortizationGap) {
  // Two "inputs" with different scales share one fitted model.
  std::exponential_distribution<double> e(1.0);
  std::bernoulli_distribution sign(0.5);
  const auto narrow = RoundedSamples(1000, 15, [&](auto& r) { return (sign(r) ? 1 : -1) * e(r); });
  const auto wide = RoundedSamples(1000, 16, [&](auto& r) { return (sign(r) ? 4 : -4) * e(r); });
  std::vector<double> pooled = narrow;
  pooled.insert(pooled.end(), wide.begin(), wide.end());
  const auto model = fit(pooled, Quick());
  const Support s{-80, 161};
  const auto q = model_distribution(model, s);
  double mean_excess = 0.0, mean_kl = 0.0;
  for (const auto* set : {&narrow, &wide}) {
    const LatentChannel ch(*set, s);
    const auto p = hard_histogram(ch);
    const double ce = rate_bits_static(model, ch) / set->size();
    EXPECT_GE(ce, entropy_bits(p));
    mean_excess += (ce - entropy_bits(p)) / 2;
    mean_kl += kl_bits(p, q) / 2;
  }
  EXPECT_GT(mean_kl, 0.1);
  EXPECT_NEAR(mean_excess, mean_kl, 0.02 * mean_kl);
}

}  // namespace
}  // namespace lcomp
