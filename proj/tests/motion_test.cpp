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

#include "lcomp/motion.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lcomp/synth.hpp"

namespace lcomp {
namespace {

using Channels = std::vector<std::size_t>;

Frame RandomFrame(std::size_t c, std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Frame f = Frame::zeros(c, h, w);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) f.at(k, y, x) = u(rng);
  return f;
}

// tgt(p) = ref(p - v) for integer v; out-of-frame pixels are 0.
Frame Shift(const Frame& ref, int vx, int vy) {
  Frame t = Frame::zeros(ref.channels(), ref.height(), ref.width());
  for (std::size_t c = 0; c < ref.channels(); ++c)
    for (int y = 0; y < int(ref.height()); ++y)
      for (int x = 0; x < int(ref.width()); ++x) {
        const int sy = y - vy, sx = x - vx;
        if (sy >= 0 && sx >= 0 && sy < int(ref.height()) && sx < int(ref.width()))
          t.at(c, y, x) = ref.at(c, sy, sx);
      }
  return t;
}

// Exhaustive search with the same tie order, one position at a time.
std::pair<int, int> BruteForceMatch(const Frame& ref, const Frame& tgt, int y, int x, int block,
                                    int range) {
  const int half = block / 2, H = ref.height(), W = ref.width();
  double best = INFINITY;
  std::pair<int, int> arg{0, 0};
  std::tuple<int, int, int> best_key{INT32_MAX, 0, 0};
  for (int vy = -range; vy <= range; ++vy)
    for (int vx = -range; vx <= range; ++vx) {
      if (y - vy - half < 0 || y - vy + half >= H || x - vx - half < 0 || x - vx + half >= W)
        continue;
      double s = 0.0;
      for (std::size_t c = 0; c < ref.channels(); ++c)
        for (int dy = -half; dy <= half; ++dy)
          for (int dx = -half; dx <= half; ++dx) {
            const double d = tgt.at(c, y + dy, x + dx) - ref.at(c, y + dy - vy, x + dx - vx);
            s += d * d;
          }
      const std::tuple<int, int, int> key{vx * vx + vy * vy, vy, vx};
      if (s < best || (s == best && key < best_key)) {
        best = s;
        best_key = key;
        arg = {vx, vy};
      }
    }
  return arg;
}

TEST(BlockMatchTest, IdenticalFramesGiveZeroMotion) {
  std::mt19937_64 rng(1);
  const auto f = RandomFrame(2, 20, 24, rng);
  const auto m = block_match(f, f, 5, 3);
  for (std::size_t i = 0; i < m.vx.size(); ++i) {
    EXPECT_EQ(m.vx[i], 0.0);
    EXPECT_EQ(m.vy[i], 0.0);
  }
  EXPECT_FALSE(m.valid[m.index(0, 0)]);
  EXPECT_TRUE(m.valid[m.index(2, 2)]);
  EXPECT_FALSE(m.valid[m.index(19, 10)]);
}

TEST(BlockMatchTest, RecoversIntegerShift) {
  std::mt19937_64 rng(2);
  const auto ref = RandomFrame(1, 32, 32, rng);
  const auto tgt = Shift(ref, 3, -2);
  const auto m = block_match(ref, tgt, 5, 4);
  for (int y = 8; y < 24; ++y)
    for (int x = 8; x < 24; ++x) {
      EXPECT_EQ(m.vx[m.index(y, x)], 3.0);
      EXPECT_EQ(m.vy[m.index(y, x)], -2.0);
    }
}

TEST(BlockMatchTest, MatchesBruteForceEverywhere) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> level(0, 2);
  Frame ref = Frame::zeros(1, 14, 15), tgt = ref;
  // Few grey levels so many candidates tie.
  for (std::size_t y = 0; y < 14; ++y)
    for (std::size_t x = 0; x < 15; ++x) {
      ref.at(0, y, x) = level(rng);
      tgt.at(0, y, x) = level(rng);
    }
  const auto m = block_match(ref, tgt, 3, 3);
  for (int y = 1; y < 13; ++y)
    for (int x = 1; x < 14; ++x) {
      const auto [vx, vy] = BruteForceMatch(ref, tgt, y, x, 3, 3);
      ASSERT_EQ(m.vx[m.index(y, x)], vx) << y << "," << x;
      ASSERT_EQ(m.vy[m.index(y, x)], vy) << y << "," << x;
    }
}

TEST(BlockMatchTest, AcceptsLargeBlocksAndRejectsBadOnes) {
  std::mt19937_64 rng(4);
  const auto f = RandomFrame(1, 64, 64, rng);
  EXPECT_NO_THROW(block_match(f, f, 31, 11));
  EXPECT_THROW(block_match(f, f, 4, 1), ParameterError);
  EXPECT_THROW(block_match(f, f, 65, 1), ParameterError);
  EXPECT_THROW(block_match(f, RandomFrame(1, 64, 63, rng), 3, 1), MismatchError);
}

TEST(ScaleMotionTest, DividesByPoolFactor) {
  const auto f = MotionField::constant(16, 16, 8.0, 4.0);
  const auto s = scale_motion(f, 2, 2);
  EXPECT_EQ(s.height, 4u);
  EXPECT_EQ(s.width, 4u);
  EXPECT_EQ(s.domain, MotionDomain::kLatent);
  for (std::size_t i = 0; i < s.vx.size(); ++i) {
    EXPECT_EQ(s.vx[i], 2.0);
    EXPECT_EQ(s.vy[i], 1.0);
  }
  const auto same = scale_motion(f, 2, 0);
  EXPECT_EQ(same.vx, f.vx);
  EXPECT_EQ(same.height, 16u);
  EXPECT_THROW(scale_motion(f, 0, 1), ParameterError);
}

TEST(ScaleMotionTest, SamplesAtCellCentres) {
  MotionField f = MotionField::constant(8, 8, 0.0, 0.0);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) f.vx[f.index(y, x)] = 10.0 * y + x;
  // Cell (1, 2) of the 2x grid is centred at input (2.5, 4.5), read from (3, 5).
  const auto s = scale_motion(f, 2, 1);
  EXPECT_EQ(s.vx[s.index(1, 2)], (10.0 * 3 + 5) / 2);
  const auto g = scale_motion(f, 2, 1, 2, 2, {4.0, 10.0, 0.0});
  EXPECT_FALSE(g.valid[g.index(0, 0)]);
}

TEST(WarpTest, ZeroFieldIsIdentity) {
  std::mt19937_64 rng(5);
  const auto f = RandomFrame(2, 9, 11, rng);
  const auto p = warp(f, MotionField::constant(9, 11, 0.0, 0.0));
  EXPECT_EQ(p.frame.data().size(), f.data().size());
  for (std::size_t i = 0; i < f.data().size(); ++i) EXPECT_EQ(p.frame.data()[i], f.data()[i]);
  EXPECT_EQ(std::count(p.mask.begin(), p.mask.end(), 1), 99);
}

TEST(WarpTest, IntegerShiftMatchesShiftedFrame) {
  std::mt19937_64 rng(6);
  const auto ref = RandomFrame(1, 12, 12, rng);
  const auto tgt = Shift(ref, 2, 1);
  const auto p = warp(ref, MotionField::constant(12, 12, 2.0, 1.0));
  for (std::size_t y = 0; y < 12; ++y)
    for (std::size_t x = 0; x < 12; ++x) {
      const bool inside = y >= 1 && x >= 2;
      EXPECT_EQ(bool(p.mask[y * 12 + x]), inside);
      if (inside) EXPECT_EQ(p.frame.at(0, y, x), tgt.at(0, y, x));
    }
  EXPECT_EQ(nrmse(tgt, p.frame, p.mask), 0.0);
}

TEST(WarpTest, HalfPixelShiftOfRampIsExact) {
  Frame ramp = Frame::zeros(1, 4, 8);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 8; ++x) ramp.at(0, y, x) = 3.0 * x + y;
  const auto p = warp(ramp, MotionField::constant(4, 8, 0.5, 0.0));
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 1; x < 8; ++x) EXPECT_DOUBLE_EQ(p.frame.at(0, y, x), 3.0 * (x - 0.5) + y);
  EXPECT_FALSE(p.mask[0]);
}

TEST(WarpTest, CompensationReducesError) {
  const auto tex = synth::Texture::random(7);
  const auto ref = tex.render(48, 48);
  const auto tgt = tex.render(48, 48, 2.0, -1.0);
  const auto m = block_match(ref, tgt, 7, 3);
  const auto p = warp(ref, m);
  const Mask all(48 * 48, 1);
  EXPECT_LT(nrmse(tgt, p.frame, p.mask), 0.1 * nrmse(tgt, ref, all));
}

TEST(NrmseTest, WorkedExamples) {
  const Frame a(1, 1, 2, {0.0, 1.0});
  const Frame b(1, 1, 2, {1.0, 0.0});
  EXPECT_DOUBLE_EQ(nrmse(a, a, Mask{1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(nrmse(a, b, Mask{1, 1}), 1.0);
  const Frame c(1, 1, 2, {0.5, 1.5});
  EXPECT_NEAR(nrmse(a, c, Mask{1, 1}), 0.5, 1e-15);
  const Frame d(1, 2, 2, {0.0, 1.0, 0.0, 1.0});
  const Frame e(1, 2, 2, {1.0, 1.0, 0.0, 1.0});
  EXPECT_NEAR(nrmse(d, e, Mask{1, 1, 1, 1}), 0.5, 1e-15);
  EXPECT_NEAR(nrmse(d, e, Mask{1, 1, 0, 0}), std::sqrt(0.5), 1e-15);
  EXPECT_THROW(nrmse(a, a, Mask{0, 0}), ParameterError);
  EXPECT_THROW(nrmse(Frame(1, 1, 2, {1.0, 1.0}), a, Mask{1, 1}), ParameterError);
}

TEST(NrmseTest, InvariantToAffineIntensityChange) {
  std::mt19937_64 rng(8);
  const auto a = RandomFrame(2, 10, 10, rng);
  const auto b = RandomFrame(2, 10, 10, rng);
  Frame a2 = a, b2 = b;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t y = 0; y < 10; ++y)
      for (std::size_t x = 0; x < 10; ++x) {
        a2.at(c, y, x) = 7.0 * a.at(c, y, x) - 3.0;
        b2.at(c, y, x) = 7.0 * b.at(c, y, x) - 3.0;
      }
  const Mask all(100, 1);
  EXPECT_NEAR(nrmse(a2, b2, all), nrmse(a, b, all), 1e-12);
}

TEST(NrmseTest, PsnrAnchors) {
  EXPECT_NEAR(psnr_to_nrmse(27.0), 0.0444939, 1e-7);
  EXPECT_NEAR(psnr_to_nrmse(41.0), 0.0088777, 1e-7);
  EXPECT_GT(psnr_to_nrmse(27.0), psnr_to_nrmse(41.0));
}

TEST(AffineTest, IdentityAndTranslation) {
  const auto id = affine_field({}, 10, 12);
  for (std::size_t i = 0; i < id.vx.size(); ++i) {
    EXPECT_NEAR(id.vx[i], 0.0, 1e-12);
    EXPECT_NEAR(id.vy[i], 0.0, 1e-12);
  }
  AffineParams t;
  t.tx = 3.5;
  t.ty = -2.0;
  const auto tr = affine_field(t, 10, 12);
  for (std::size_t i = 0; i < tr.vx.size(); ++i) {
    EXPECT_NEAR(tr.vx[i], 3.5, 1e-12);
    EXPECT_NEAR(tr.vy[i], -2.0, 1e-12);
  }
}

TEST(AffineTest, RotationMagnitudeGrowsWithRadius) {
  AffineParams r;
  r.rot = 10.0;
  const std::size_t H = 41, W = 41;
  const auto f = affine_field(r, H, W);
  const double theta = 10.0 * std::numbers::pi / 180.0;
  for (std::size_t y = 0; y < H; y += 5)
    for (std::size_t x = 0; x < W; x += 5) {
      const double radius = std::hypot(x - 20.0, y - 20.0);
      const std::size_t i = f.index(y, x);
      EXPECT_NEAR(std::hypot(f.vx[i], f.vy[i]), 2 * radius * std::sin(theta / 2), 1e-9);
    }
}

TEST(AffineTest, InverseUndoesApply) {
  std::mt19937_64 rng(9);
  for (int draw = 0; draw < 100; ++draw) {
    const auto t = Affine2::from(synth::random_affine(rng), 64, 80);
    const auto [u, v] = t.apply(13.0, 51.0);
    const auto [x, y] = t.inverse(u, v);
    EXPECT_NEAR(x, 13.0, 1e-9);
    EXPECT_NEAR(y, 51.0, 1e-9);
  }
}

TEST(AffineTest, WarpWithAffineFieldReproducesRenderedTexture) {
  const auto tex = synth::Texture::random(10);
  AffineParams p;
  p.tx = 1.5;
  p.rot = 3.0;
  const auto ref = tex.render(64, 64);
  const auto tgt = tex.render(64, 64, p);
  const auto pred = warp(ref, affine_field(p, 64, 64));
  // Only bilinear interpolation error remains.
  EXPECT_LT(nrmse(tgt, pred.frame, pred.mask), 0.02);
}

TEST(ConvStackTest, IdentityStageKeepsFrame) {
  std::mt19937_64 rng(11);
  const auto f = RandomFrame(1, 8, 8, rng);
  ConvStackSpec spec;
  spec.stages.push_back(ConvStage{});
  const auto out = run_conv_stack(f, spec);
  EXPECT_EQ(out.latent.height(), 8u);
  for (std::size_t i = 0; i < f.data().size(); ++i) EXPECT_EQ(out.latent.data()[i], f.data()[i]);
  EXPECT_EQ(out.geometry.scale, 1.0);
}

TEST(ConvStackTest, GeometryTracksKernelsAndPools) {
  std::mt19937_64 rng(12);
  const auto f = RandomFrame(1, 32, 32, rng);
  const auto spec = random_conv_stack(1, 1, Channels{2, 3}, 3, Nonlinearity::kRelu, PoolKind::kMean, 2);
  const auto out = run_conv_stack(f, spec);
  // 32 -> conv 30 -> pool 15 -> conv 13 -> pool 6.
  EXPECT_EQ(out.latent.height(), 6u);
  EXPECT_EQ(out.latent.channels(), 3u);
  EXPECT_EQ(out.geometry.scale, 4.0);
  EXPECT_EQ(out.total_scale, 4.0);
  // 1 + 0.5 + 2 * 1 + 2 * 0.5.
  EXPECT_DOUBLE_EQ(out.geometry.offset_x, 4.5);
  EXPECT_EQ(ConvStackSpec::from_json(spec.to_json()).to_json(), spec.to_json());
}

TEST(ConvStackTest, DownsampleTakesTopLeftSample) {
  std::mt19937_64 rng(13);
  const auto f = RandomFrame(1, 6, 6, rng);
  ConvStackSpec spec;
  ConvStage s;
  s.pool = PoolKind::kDownsample;
  s.pool_size = 2;
  spec.stages.push_back(s);
  const auto out = run_conv_stack(f, spec);
  EXPECT_EQ(out.latent.at(0, 1, 2), f.at(0, 2, 4));
  EXPECT_EQ(out.geometry.offset_y, 0.0);
  EXPECT_EQ(out.geometry.scale, 2.0);
}

TEST(ConvStackTest, MaxPoolAndMeanPoolValues) {
  const Frame f(1, 2, 2, {1.0, 4.0, -2.0, 3.0});
  ConvStackSpec spec;
  ConvStage s;
  s.pool = PoolKind::kMax;
  s.pool_size = 2;
  spec.stages = {s};
  EXPECT_EQ(run_conv_stack(f, spec).latent.at(0, 0, 0), 4.0);
  spec.stages[0].pool = PoolKind::kMean;
  EXPECT_EQ(run_conv_stack(f, spec).latent.at(0, 0, 0), 1.5);
}

TEST(ConvStackTest, RejectsBadStacks) {
  std::mt19937_64 rng(14);
  const auto f = RandomFrame(1, 4, 4, rng);
  EXPECT_THROW(run_conv_stack(f, random_conv_stack(1, 1, Channels{2}, 5, Nonlinearity::kRelu,
                                                   PoolKind::kNone, 1)),
               ParameterError);
  EXPECT_THROW(run_conv_stack(f, random_conv_stack(1, 2, Channels{2}, 3, Nonlinearity::kRelu,
                                                   PoolKind::kNone, 1)),
               MismatchError);
  nlohmann::json j = random_conv_stack(1, 1, Channels{2}, 3, Nonlinearity::kRelu, PoolKind::kNone, 1).to_json();
  j["bogus"] = 1;
  EXPECT_THROW(ConvStackSpec::from_json(j), FormatError);
}

TEST(LatentMotionTest, ScaledFieldPredictsLatentOfShiftedFrame) {
  const auto tex = synth::Texture::random(7);
  const auto spec = random_conv_stack(3, 1, Channels{4, 4}, 3, Nonlinearity::kRelu, PoolKind::kMean, 2);
  const auto ref = run_conv_stack(tex.render(96, 96), spec);
  const auto tgt = run_conv_stack(tex.render(96, 96, 8.0, -4.0), spec);
  const auto field = MotionField::constant(96, 96, 8.0, -4.0);
  const auto lf = scale_motion(field, 2, 2, ref.latent.height(), ref.latent.width(), ref.geometry);
  EXPECT_EQ(lf.vx[0], 2.0);
  EXPECT_EQ(lf.vy[0], -1.0);
  const auto p = warp(ref.latent, lf);
  EXPECT_LT(nrmse(tgt.latent, p.frame, p.mask), 1e-9);
}

}  // namespace
}  // namespace lcomp
