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

#include "lcomp/pcanalysis.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lcomp/synth.hpp"

namespace lcomp {
namespace {

// O(n^2) dominance check.
std::vector<RAPoint> ParetoOracle(const std::vector<RAPoint>& pts) {
  std::vector<RAPoint> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      const auto& a = pts[j];
      const auto& b = pts[i];
      dominated = a.rate <= b.rate && a.accuracy >= b.accuracy &&
                  (a.rate < b.rate || a.accuracy > b.accuracy);
    }
    if (!dominated && std::find(out.begin(), out.end(), pts[i]) == out.end()) out.push_back(pts[i]);
  }
  std::sort(out.begin(), out.end(), [](auto& a, auto& b) { return a.rate < b.rate; });
  return out;
}

std::vector<CurvePoint> Curve(std::vector<double> rates, std::vector<double> q) {
  std::vector<CurvePoint> c;
  for (std::size_t i = 0; i < rates.size(); ++i) c.push_back({rates[i], q[i]});
  return c;
}

TEST(PointCloudTest, FromTensorBothLayouts) {
  const Tensor cm({3, 2}, {1, 2, 3, 4, 5, 6});
  const auto a = PointCloud::from_tensor(cm);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a.points[1], (std::array<double, 3>{2, 4, 6}));
  const Tensor pm({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto b = PointCloud::from_tensor(pm, true);
  EXPECT_EQ(b.points[1], (std::array<double, 3>{4, 5, 6}));
  EXPECT_THROW(PointCloud::from_tensor(pm), FormatError);
}

TEST(MaxPoolTest, MatchesBruteForce) {
  std::mt19937_64 rng(1);
  const auto cloud = synth::random_point_cloud(200, rng);
  const auto fmap = synth::mlp_features(cloud, 16, 32, rng);
  const auto pooled = max_pool_features(fmap);
  for (std::size_t f = 0; f < 16; ++f) {
    double m = -INFINITY;
    for (std::size_t i = 0; i < 200; ++i) m = std::max(m, fmap.at(f, i));
    EXPECT_EQ(pooled[f], m);
  }
}

TEST(CriticalPointsTest, HandWorkedExample) {
  // Feature 0 peaks at point 2, feature 1 at point 0.
  const FeatureMap f(2, 4, {0.1, 0.5, 0.9, 0.2, 3.0, 1.0, 2.0, -1.0});
  EXPECT_EQ(critical_point_set(f), (std::vector<std::size_t>{0, 2}));
  const std::vector<double> w{1, 0, 0, 0, 1, 0};
  PointCloud c;
  c.points = {{0, 0, 0}, {2, -1, 0}, {1, 3, 0}};
  EXPECT_EQ(critical_point_set(linear_features(c, w)), (std::vector<std::size_t>{1, 2}));
}

TEST(CriticalPointsTest, TiesKeepEveryIndex) {
  const FeatureMap f(1, 4, {1.0, 2.0, 2.0, 0.0});
  EXPECT_EQ(critical_point_set(f), (std::vector<std::size_t>{1, 2}));
}

TEST(CriticalPointsTest, RestrictingToCriticalSetPreservesPooledFeatures) {
  std::mt19937_64 rng(2);
  for (int draw = 0; draw < 50; ++draw) {
    const auto cloud = synth::random_point_cloud(100 + draw, rng);
    const auto fmap = synth::mlp_features(cloud, 1 + draw % 20, 16, rng);
    const auto crit = critical_point_set(fmap);
    ASSERT_LE(crit.size(), fmap.features());
    const auto sub = fmap.restrict_to(crit);
    EXPECT_EQ(max_pool_features(sub), max_pool_features(fmap));
    // The restricted map has the same critical set (by position).
    const auto again = critical_point_set(sub);
    EXPECT_EQ(again.size(), crit.size());
  }
}

TEST(CriticalPointsTest, InvariantToPointOrder) {
  std::mt19937_64 rng(3);
  const auto cloud = synth::random_point_cloud(64, rng);
  std::vector<double> w(8 * 3);
  std::normal_distribution<double> g;
  for (double& v : w) v = g(rng);
  const auto base = critical_point_set(linear_features(cloud, w));
  std::vector<std::size_t> perm(64);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  PointCloud shuffled;
  for (auto i : perm) shuffled.points.push_back(cloud.points[i]);
  std::vector<std::size_t> mapped;
  for (auto i : critical_point_set(linear_features(shuffled, w))) mapped.push_back(perm[i]);
  std::sort(mapped.begin(), mapped.end());
  EXPECT_EQ(mapped, base);
}

TEST(ParetoTest, SmallExample) {
  const std::vector<RAPoint> pts{{100, 50}, {200, 40}, {150, 70}, {300, 90}, {150, 70}, {50, 10}};
  EXPECT_EQ(pareto_front(pts),
            (std::vector<RAPoint>{{50, 10}, {100, 50}, {150, 70}, {300, 90}}));
}

TEST(ParetoTest, MatchesQuadraticOracle) {
  std::mt19937_64 rng(4);
  for (int draw = 0; draw < 200; ++draw) {
    auto pts = synth::random_ra_points(1 + draw % 80, rng);
    // Coarse values force rate and accuracy ties.
    if (draw % 2)
      for (auto& p : pts) p = {std::round(p.rate / 1e4), std::round(p.accuracy / 10)};
    ASSERT_EQ(pareto_front(pts), ParetoOracle(pts)) << "draw " << draw;
  }
}

TEST(ParetoTest, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(pareto_front(std::vector<RAPoint>{}), ParameterError);
  EXPECT_THROW(pareto_front(std::vector<RAPoint>{{NAN, 1}}), ParameterError);
}

TEST(PchipTest, MatchesReferenceImplementation) {
  // Reference values from an independent PCHIP implementation.
  const detail::Pchip p({30, 32, 35, 37, 40},
                        {std::log2(1000.0), std::log2(1500.0), std::log2(2600.0),
                         std::log2(3900.0), std::log2(6100.0)});
  EXPECT_NEAR(p(30.5), 10.116460162594226, 1e-12);
  EXPECT_NEAR(p(33.0), 10.818421685097729, 1e-12);
  EXPECT_NEAR(p(36.2), 11.704739586206033, 1e-12);
  EXPECT_NEAR(p(39.9), 12.557534060566995, 1e-12);
  EXPECT_NEAR(p.integrate(31, 39), 90.86729695928321, 1e-10);
}

TEST(PchipTest, IntegralMatchesDenseQuadrature) {
  const detail::Pchip p({0, 1, 3, 4, 7, 8}, {0, 2, 2.5, 5, 5.2, 9});
  double simpson = 0.0;
  const int n = 20000;
  const double a = 0.3, b = 7.6, h = (b - a) / n;
  for (int i = 0; i <= n; ++i) simpson += (i == 0 || i == n ? 1 : i % 2 ? 4 : 2) * p(a + i * h);
  simpson *= h / 3;
  EXPECT_NEAR(p.integrate(a, b), simpson, 1e-9);
}

TEST(BdRateTest, IdenticalCurvesGiveZero) {
  const auto c = Curve({1000, 1500, 2600, 3900}, {30, 32, 35, 37});
  EXPECT_NEAR(bd_metric(c, c), 0.0, 1e-12);
  EXPECT_NEAR(bd_metric(c, c, BdMode::kQuality), 0.0, 1e-12);
}

TEST(BdRateTest, HalvedRatesGiveMinusFiftyPercent) {
  const auto a = Curve({1000, 1500, 2600, 3900, 6100}, {30, 32, 35, 37, 40});
  const auto b = Curve({500, 750, 1300, 1950, 3050}, {30, 32, 35, 37, 40});
  EXPECT_NEAR(bd_metric(a, b), -50.0, 1e-9);
  EXPECT_NEAR(bd_metric(b, a), 100.0, 1e-9);
}

TEST(BdRateTest, ShiftedQualityGivesTheShift) {
  const auto a = Curve({1000, 1500, 2600, 3900}, {30, 32, 35, 37});
  const auto b = Curve({1000, 1500, 2600, 3900}, {31.5, 33.5, 36.5, 38.5});
  EXPECT_NEAR(bd_metric(a, b, BdMode::kQuality), 1.5, 1e-9);
}

TEST(BdRateTest, LinearFallbackForShortCurves) {
  // Two-point curves are straight lines; the log2-rate gap falls from 1 to 0.
  const auto a = Curve({1000, 4000}, {30, 40});
  const auto b = Curve({2000, 4000}, {30, 40});
  EXPECT_NEAR(bd_metric(a, b), (std::exp2(0.5) - 1) * 100, 1e-9);
}

TEST(BdRateTest, Errors) {
  const auto a = Curve({1000, 2000, 3000}, {30, 32, 34});
  const auto far = Curve({1000, 2000, 3000}, {40, 42, 44});
  EXPECT_THROW(bd_metric(a, far), ParameterError);
  EXPECT_THROW(bd_metric(a, Curve({1000}, {30})), ParameterError);
  EXPECT_THROW(bd_metric(a, Curve({1000, 0}, {30, 33})), ParameterError);
  EXPECT_THROW(bd_metric(a, Curve({1000, 2000}, {31, 31})), ParameterError);
}

}  // namespace
}  // namespace lcomp
