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
// Motion in input and latent space: block matching, scaling of motion by the
// cumulative pooling factor, bilinear motion compensation and NRMSE, affine
// motion fields and a small fixed conv stack to produce latents.
//
// Displacement convention: a field v predicts tgt(p) = ref(p - v), so content
// that moves right by 3 pixels has v_x = +3. Positions are (x, y) = (column,
// row); pixel centres sit on integer coordinates.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcomp/error.hpp"
#include "lcomp/tensorio.hpp"

namespace lcomp {

// C x H x W, channel-major.
class Frame {
 public:
  Frame(std::size_t height, std::size_t width, std::vector<double> data)
      : Frame(1, height, width, std::move(data)) {}
  Frame(std::size_t channels, std::size_t height, std::size_t width, std::vector<double> data)
      : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    if (channels == 0 || height == 0 || width == 0)
      throw ParameterError("frame dims must be >= 1");
    if (data_.size() != channels * height * width)
      throw ParameterError("frame: " + std::to_string(data_.size()) + " values for " +
                           std::to_string(channels) + "x" + std::to_string(height) + "x" +
                           std::to_string(width));
  }
  static Frame zeros(std::size_t channels, std::size_t height, std::size_t width) {
    return Frame(channels, height, width, std::vector<double>(channels * height * width, 0.0));
  }

  // Rank 2 is H x W, rank 3 is C x H x W.
  static Frame from_tensor(const Tensor& t) {
    std::vector<double> v(t.data.begin(), t.data.end());
    if (t.rank() == 2) return Frame(t.dims[0], t.dims[1], std::move(v));
    if (t.rank() == 3) return Frame(t.dims[0], t.dims[1], t.dims[2], std::move(v));
    throw FormatError("frame tensor must be rank 2 or 3, got rank " + std::to_string(t.rank()));
  }
  Tensor to_tensor() const {
    std::vector<std::uint32_t> dims;
    if (channels_ > 1) dims.push_back(static_cast<std::uint32_t>(channels_));
    dims.push_back(static_cast<std::uint32_t>(height_));
    dims.push_back(static_cast<std::uint32_t>(width_));
    return Tensor(std::move(dims), std::vector<float>(data_.begin(), data_.end()));
  }

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t plane() const { return height_ * width_; }
  std::span<const double> data() const { return data_; }

  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * height_ + y) * width_ + x];
  }
  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * height_ + y) * width_ + x];
  }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::size_t channels_, height_, width_;
  std::vector<double> data_;
};

// H x W validity flags, row-major.
using Mask = std::vector<std::uint8_t>;

enum class MotionDomain { kInput, kLatent };

struct MotionField {
  std::size_t height = 0, width = 0;
  std::vector<double> vx, vy;
  Mask valid;
  MotionDomain domain = MotionDomain::kInput;

  static MotionField constant(std::size_t height, std::size_t width, double vx, double vy,
                              MotionDomain domain = MotionDomain::kInput) {
    const std::size_t n = height * width;
    return {height, width, std::vector<double>(n, vx), std::vector<double>(n, vy), Mask(n, 1),
            domain};
  }

  std::size_t index(std::size_t y, std::size_t x) const { return y * width + x; }

  // 3 x H x W: v_x, v_y, valid.
  Tensor to_tensor() const {
    std::vector<float> d;
    d.reserve(3 * vx.size());
    d.insert(d.end(), vx.begin(), vx.end());
    d.insert(d.end(), vy.begin(), vy.end());
    for (auto m : valid) d.push_back(m ? 1.0f : 0.0f);
    return Tensor({3, static_cast<std::uint32_t>(height), static_cast<std::uint32_t>(width)},
                  std::move(d));
  }
  static MotionField from_tensor(const Tensor& t, MotionDomain domain = MotionDomain::kInput) {
    if (t.rank() != 3 || t.dims[0] != 3)
      throw FormatError("motion field tensor must be 3 x H x W");
    MotionField f;
    f.height = t.dims[1];
    f.width = t.dims[2];
    const std::size_t n = f.height * f.width;
    f.vx.assign(t.data.begin(), t.data.begin() + n);
    f.vy.assign(t.data.begin() + n, t.data.begin() + 2 * n);
    for (std::size_t i = 0; i < n; ++i) f.valid.push_back(t.data[2 * n + i] != 0.0f);
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isfinite(f.vx[i]) || !std::isfinite(f.vy[i]))
        throw FormatError("motion field has non-finite entries");
    f.domain = domain;
    return f;
  }
};

// ---------------------------------------------------------------------------
// Block matching.

// Per-position displacement minimizing the SSD between the block around p in
// `tgt` and the block around p - v in `ref`, over |v_x|, |v_y| <= range. SSD is
// summed over channels. Ties go to the smallest |v|, then (v_y, v_x)
// lexicographically. Positions whose block leaves the frame are invalid;
// candidates whose reference block leaves the frame are skipped.
inline MotionField block_match(const Frame& ref, const Frame& tgt, int block, int range) {
  if (ref.channels() != tgt.channels() || ref.height() != tgt.height() ||
      ref.width() != tgt.width())
    throw MismatchError("block_match: ref and tgt shapes differ");
  const int H = static_cast<int>(ref.height()), W = static_cast<int>(ref.width());
  if (block < 1 || block % 2 == 0) throw ParameterError("block size must be odd and >= 1");
  if (block > std::min(H, W))
    throw ParameterError("block size " + std::to_string(block) + " exceeds frame dims " +
                         std::to_string(H) + "x" + std::to_string(W));
  if (range < 0) throw ParameterError("search range must be >= 0");
  const int half = block / 2;
  const int C = static_cast<int>(ref.channels());

  MotionField field = MotionField::constant(ref.height(), ref.width(), 0.0, 0.0);
  std::vector<double> best(static_cast<std::size_t>(H) * W, std::numeric_limits<double>::infinity());
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      field.valid[field.index(y, x)] =
          y >= half && y < H - half && x >= half && x < W - half;

  std::vector<std::pair<int, int>> candidates;  // (vy, vx)
  for (int vy = -range; vy <= range; ++vy)
    for (int vx = -range; vx <= range; ++vx) candidates.emplace_back(vy, vx);
  std::stable_sort(candidates.begin(), candidates.end(), [](auto a, auto b) {
    const int ma = a.first * a.first + a.second * a.second;
    const int mb = b.first * b.first + b.second * b.second;
    return ma != mb ? ma < mb : a < b;
  });

  std::vector<double> diff, colsum;
  for (auto [vy, vx] : candidates) {
    // Block centres where both blocks fit.
    const int y0 = std::max(half, half + vy), y1 = std::min(H - half, H - half + vy);
    const int x0 = std::max(half, half + vx), x1 = std::min(W - half, W - half + vx);
    if (y0 >= y1 || x0 >= x1) continue;
    const int ry0 = y0 - half, ry1 = y1 + half, rx0 = x0 - half, rx1 = x1 + half;
    const int rw = rx1 - rx0, rh = ry1 - ry0;
    diff.assign(static_cast<std::size_t>(rw) * rh, 0.0);
    for (int c = 0; c < C; ++c)
      for (int y = ry0; y < ry1; ++y)
        for (int x = rx0; x < rx1; ++x) {
          const double d = tgt.at(c, y, x) - ref.at(c, y - vy, x - vx);
          diff[(y - ry0) * rw + (x - rx0)] += d * d;
        }
    // Separable box sums, each window summed directly.
    const int ch = y1 - y0;
    colsum.assign(static_cast<std::size_t>(ch) * rw, 0.0);
    for (int yc = 0; yc < ch; ++yc)
      for (int dy = 0; dy < block; ++dy)
        for (int x = 0; x < rw; ++x) colsum[yc * rw + x] += diff[(yc + dy) * rw + x];
    for (int yc = 0; yc < ch; ++yc)
      for (int xc = 0; xc < x1 - x0; ++xc) {
        double s = 0.0;
        for (int dx = 0; dx < block; ++dx) s += colsum[yc * rw + xc + dx];
        const std::size_t i = field.index(y0 + yc, x0 + xc);
        if (s < best[i]) {
          best[i] = s;
          field.vx[i] = vx;
          field.vy[i] = vy;
        }
      }
  }
  return field;
}

// ---------------------------------------------------------------------------
// Latent geometry and motion scaling.

// Latent position (i, j) sits over input coordinate offset + scale * (i, j).
struct LatentGeometry {
  double scale = 1.0;
  double offset_y = 0.0, offset_x = 0.0;
};

// Divides every vector by n^k and resamples the field by nearest neighbour
// onto a latent grid of `latent_h` x `latent_w` placed per `geometry`.
inline MotionField scale_motion(const MotionField& field, int n, int k, std::size_t latent_h,
                                std::size_t latent_w, const LatentGeometry& geometry) {
  if (n < 1) throw ParameterError("n must be >= 1");
  if (k < 0) throw ParameterError("k must be >= 0");
  if (latent_h == 0 || latent_w == 0) throw ParameterError("latent dims must be >= 1");
  const double factor = std::pow(static_cast<double>(n), k);
  MotionField out = MotionField::constant(latent_h, latent_w, 0.0, 0.0, MotionDomain::kLatent);
  for (std::size_t i = 0; i < latent_h; ++i)
    for (std::size_t j = 0; j < latent_w; ++j) {
      const double sy = std::floor(geometry.offset_y + geometry.scale * i + 0.5);
      const double sx = std::floor(geometry.offset_x + geometry.scale * j + 0.5);
      const std::size_t o = out.index(i, j);
      if (sy < 0 || sx < 0 || sy >= field.height || sx >= field.width) {
        out.valid[o] = 0;
        continue;
      }
      const std::size_t src = field.index(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
      out.vx[o] = field.vx[src] / factor;
      out.vy[o] = field.vy[src] / factor;
      out.valid[o] = field.valid[src];
    }
  return out;
}

// Plain n^k pooling grid: floor(H / n^k) x floor(W / n^k), cells centred over
// their input pixels.
inline MotionField scale_motion(const MotionField& field, int n, int k) {
  if (n < 1) throw ParameterError("n must be >= 1");
  if (k < 0) throw ParameterError("k must be >= 0");
  const double f = std::pow(static_cast<double>(n), k);
  const auto lh = std::max<std::size_t>(1, static_cast<std::size_t>(field.height / f));
  const auto lw = std::max<std::size_t>(1, static_cast<std::size_t>(field.width / f));
  return scale_motion(field, n, k, lh, lw, {f, (f - 1) / 2, (f - 1) / 2});
}

// ---------------------------------------------------------------------------
// Motion compensation and error.

struct Prediction {
  Frame frame;
  Mask mask;
};

// pred(p) = ref(p - v(p)) by bilinear sampling. The mask is false where the
// source position leaves the frame or the field is invalid; such positions
// predict 0.
inline Prediction warp(const Frame& ref, const MotionField& field) {
  if (field.height != ref.height() || field.width != ref.width())
    throw MismatchError("warp: field is " + std::to_string(field.height) + "x" +
                        std::to_string(field.width) + ", frame is " +
                        std::to_string(ref.height()) + "x" + std::to_string(ref.width()));
  const std::size_t H = ref.height(), W = ref.width();
  Prediction out{Frame::zeros(ref.channels(), H, W), Mask(H * W, 0)};
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const std::size_t i = field.index(y, x);
      if (!field.valid[i]) continue;
      const double sy = y - field.vy[i], sx = x - field.vx[i];
      if (!(sy >= 0.0 && sx >= 0.0 && sy <= H - 1.0 && sx <= W - 1.0)) continue;
      const auto y0 = std::min(static_cast<std::size_t>(sy), H - 1);
      const auto x0 = std::min(static_cast<std::size_t>(sx), W - 1);
      const std::size_t y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
      const double ay = sy - y0, ax = sx - x0;
      for (std::size_t c = 0; c < ref.channels(); ++c)
        out.frame.at(c, y, x) =
            (1 - ay) * ((1 - ax) * ref.at(c, y0, x0) + ax * ref.at(c, y0, x1)) +
            ay * ((1 - ax) * ref.at(c, y1, x0) + ax * ref.at(c, y1, x1));
      out.mask[i] = 1;
    }
  return out;
}

// (1/R) sqrt(mean of squared error over masked positions and all channels),
// R = max - min of `actual` over the mask.
inline double nrmse(const Frame& actual, const Frame& predicted, const Mask& mask) {
  if (actual.channels() != predicted.channels() || actual.height() != predicted.height() ||
      actual.width() != predicted.width())
    throw MismatchError("nrmse: frame shapes differ");
  if (mask.size() != actual.plane()) throw MismatchError("nrmse: mask shape differs");
  double lo = INFINITY, hi = -INFINITY, sse = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < actual.channels(); ++c)
    for (std::size_t y = 0; y < actual.height(); ++y)
      for (std::size_t x = 0; x < actual.width(); ++x) {
        if (!mask[y * actual.width() + x]) continue;
        const double a = actual.at(c, y, x), d = predicted.at(c, y, x) - a;
        lo = std::min(lo, a);
        hi = std::max(hi, a);
        sse += d * d;
        ++count;
      }
  if (count == 0) throw ParameterError("nrmse: empty mask");
  if (!(hi > lo)) throw ParameterError("zero dynamic range");
  return std::sqrt(sse / count) / (hi - lo);
}

inline double psnr_to_nrmse(double psnr_db) {
  if (!std::isfinite(psnr_db)) throw ParameterError("psnr must be finite");
  return std::sqrt(255.0 * 255.0 / std::pow(10.0, psnr_db / 10.0)) / 256.0;
}

// ---------------------------------------------------------------------------
// Affine motion.

// Angles in degrees. The map is T(x) = A (x - c) + c + t about the frame
// centre c, with A = Rot(rot) * Shear(shear_x, shear_y) * Scale(sx, sy).
struct AffineParams {
  double tx = 0.0, ty = 0.0;
  double sx = 1.0, sy = 1.0;
  double shear_x = 0.0, shear_y = 0.0;
  double rot = 0.0;
};

struct Affine2 {
  double a, b, c, d;  // [[a, b], [c, d]]
  double tx, ty;
  double cx, cy;

  static Affine2 from(const AffineParams& p, std::size_t height, std::size_t width) {
    for (double v : {p.tx, p.ty, p.sx, p.sy, p.shear_x, p.shear_y, p.rot})
      if (!std::isfinite(v)) throw ParameterError("affine parameters must be finite");
    const double deg = std::numbers::pi / 180.0;
    const double cr = std::cos(p.rot * deg), sr = std::sin(p.rot * deg);
    const double hx = std::tan(p.shear_x * deg), hy = std::tan(p.shear_y * deg);
    // Shear * Scale = [[sx, hx sy], [hy sx, sy]].
    const double m00 = p.sx, m01 = hx * p.sy, m10 = hy * p.sx, m11 = p.sy;
    Affine2 t{cr * m00 - sr * m10, cr * m01 - sr * m11, sr * m00 + cr * m10,
              sr * m01 + cr * m11, p.tx,  p.ty,
              (width - 1.0) / 2,   (height - 1.0) / 2};
    if (std::abs(t.a * t.d - t.b * t.c) < 1e-12) throw ParameterError("affine map is singular");
    return t;
  }

  std::pair<double, double> apply(double x, double y) const {
    const double u = x - cx, v = y - cy;
    return {a * u + b * v + cx + tx, c * u + d * v + cy + ty};
  }
  std::pair<double, double> inverse(double x, double y) const {
    const double det = a * d - b * c;
    const double u = x - cx - tx, v = y - cy - ty;
    return {(d * u - b * v) / det + cx, (-c * u + a * v) / det + cy};
  }
};

// v(p) = p - T^{-1}(p), so warp(ref, v) samples ref at T^{-1}(p).
inline MotionField affine_field(const AffineParams& params, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw ParameterError("field dims must be >= 1");
  const auto t = Affine2::from(params, height, width);
  MotionField f = MotionField::constant(height, width, 0.0, 0.0);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const auto [sx, sy] = t.inverse(double(x), double(y));
      f.vx[f.index(y, x)] = x - sx;
      f.vy[f.index(y, x)] = y - sy;
    }
  return f;
}

// ---------------------------------------------------------------------------
// Conv stack.

enum class Nonlinearity { kIdentity, kRelu };
enum class PoolKind { kNone, kMax, kMean, kDownsample };

struct ConvStage {
  // out_channels x in_channels x k x k, applied as valid cross-correlation.
  std::size_t out_channels = 1, in_channels = 1, kernel = 1;
  std::vector<double> weights{1.0};
  std::vector<double> bias;  // empty or out_channels
  Nonlinearity nonlinearity = Nonlinearity::kIdentity;
  PoolKind pool = PoolKind::kNone;
  int pool_size = 1;

  double weight(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
    return weights[((o * in_channels + i) * kernel + ky) * kernel + kx];
  }
  void validate() const {
    if (out_channels == 0 || in_channels == 0 || kernel == 0)
      throw ParameterError("conv stage dims must be >= 1");
    if (weights.size() != out_channels * in_channels * kernel * kernel)
      throw ParameterError("conv stage: weight count does not match dims");
    if (!bias.empty() && bias.size() != out_channels)
      throw ParameterError("conv stage: bias count does not match out_channels");
    if (pool != PoolKind::kNone && pool_size < 1) throw ParameterError("pool size must be >= 1");
  }
};

struct ConvStackSpec {
  std::vector<ConvStage> stages;

  // Product of pooling factors.
  double total_scale() const {
    double s = 1.0;
    for (const auto& st : stages)
      if (st.pool != PoolKind::kNone) s *= st.pool_size;
    return s;
  }

  nlohmann::json to_json() const;
  static ConvStackSpec from_json(const nlohmann::json& j);
};

namespace detail {

inline const char* to_string(Nonlinearity n) { return n == Nonlinearity::kRelu ? "relu" : "identity"; }

inline const char* to_string(PoolKind p) {
  switch (p) {
    case PoolKind::kMax: return "max";
    case PoolKind::kMean: return "mean";
    case PoolKind::kDownsample: return "downsample";
    default: return "none";
  }
}

}  // namespace detail

inline nlohmann::json ConvStackSpec::to_json() const {
  nlohmann::json stages_json = nlohmann::json::array();
  for (const auto& s : stages) {
    nlohmann::json j = {{"out_channels", s.out_channels}, {"in_channels", s.in_channels},
                        {"kernel", s.kernel},             {"weights", s.weights},
                        {"nonlinearity", detail::to_string(s.nonlinearity)},
                        {"pool", {{"type", detail::to_string(s.pool)}, {"n", s.pool_size}}}};
    if (!s.bias.empty()) j["bias"] = s.bias;
    stages_json.push_back(std::move(j));
  }
  return {{"stages", stages_json}};
}

inline ConvStackSpec ConvStackSpec::from_json(const nlohmann::json& j) {
  ConvStackSpec spec;
  try {
    if (!j.is_object()) throw FormatError("conv stack must be a JSON object");
    for (const auto& [key, _] : j.items())
      if (key != "stages") throw FormatError("conv stack: unknown key \"" + key + "\"");
    for (const auto& s : j.at("stages")) {
      for (const auto& [key, _] : s.items())
        if (key != "out_channels" && key != "in_channels" && key != "kernel" && key != "weights" &&
            key != "bias" && key != "nonlinearity" && key != "pool")
          throw FormatError("conv stage: unknown key \"" + key + "\"");
      ConvStage st;
      st.out_channels = s.value("out_channels", std::size_t{1});
      st.in_channels = s.value("in_channels", std::size_t{1});
      st.kernel = s.at("kernel").get<std::size_t>();
      st.weights = s.at("weights").get<std::vector<double>>();
      st.bias = s.value("bias", std::vector<double>{});
      const auto nl = s.value("nonlinearity", std::string("identity"));
      if (nl == "identity") st.nonlinearity = Nonlinearity::kIdentity;
      else if (nl == "relu") st.nonlinearity = Nonlinearity::kRelu;
      else throw FormatError("conv stage: unknown nonlinearity \"" + nl + "\"");
      if (s.contains("pool")) {
        const auto type = s["pool"].value("type", std::string("none"));
        st.pool_size = s["pool"].value("n", 1);
        if (type == "none") st.pool = PoolKind::kNone;
        else if (type == "max") st.pool = PoolKind::kMax;
        else if (type == "mean") st.pool = PoolKind::kMean;
        else if (type == "downsample") st.pool = PoolKind::kDownsample;
        else throw FormatError("conv stage: unknown pool type \"" + type + "\"");
      }
      st.validate();
      spec.stages.push_back(std::move(st));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("conv stack: ") + e.what());
  } catch (const ParameterError& e) {
    throw FormatError(std::string("conv stack: ") + e.what());
  }
  return spec;
}

// Seeded random stack: per stage a k x k conv to channels[s] with weights
// N(0, 1/(c_in k^2)), small positive bias, the given nonlinearity, then a
// pool of `pool_size` (or none when pool_size == 1).
inline ConvStackSpec random_conv_stack(std::uint64_t seed, std::size_t in_channels,
                                       std::span<const std::size_t> channels, std::size_t kernel,
                                       Nonlinearity nonlinearity, PoolKind pool, int pool_size) {
  std::mt19937_64 rng(seed);
  ConvStackSpec spec;
  std::size_t c_in = in_channels;
  for (auto c_out : channels) {
    ConvStage st;
    st.out_channels = c_out;
    st.in_channels = c_in;
    st.kernel = kernel;
    std::normal_distribution<double> w(0.0, 1.0 / std::sqrt(double(c_in * kernel * kernel)));
    st.weights.resize(c_out * c_in * kernel * kernel);
    for (double& v : st.weights) v = w(rng);
    std::uniform_real_distribution<double> b(0.0, 0.1);
    st.bias.resize(c_out);
    for (double& v : st.bias) v = b(rng);
    st.nonlinearity = nonlinearity;
    st.pool = pool_size > 1 ? pool : PoolKind::kNone;
    st.pool_size = pool_size;
    spec.stages.push_back(std::move(st));
    c_in = c_out;
  }
  return spec;
}

struct ConvStackOutput {
  Frame latent;
  LatentGeometry geometry;
  double total_scale = 1.0;
};

inline ConvStackOutput run_conv_stack(const Frame& frame, const ConvStackSpec& spec) {
  Frame cur = frame;
  LatentGeometry g;
  for (std::size_t si = 0; si < spec.stages.size(); ++si) {
    const auto& st = spec.stages[si];
    st.validate();
    if (st.in_channels != cur.channels())
      throw MismatchError("conv stage " + std::to_string(si) + " expects " +
                          std::to_string(st.in_channels) + " channels, got " +
                          std::to_string(cur.channels()));
    if (st.kernel > cur.height() || st.kernel > cur.width())
      throw ParameterError("conv stage " + std::to_string(si) + ": kernel " +
                           std::to_string(st.kernel) + " larger than input " +
                           std::to_string(cur.height()) + "x" + std::to_string(cur.width()));
    const std::size_t k = st.kernel, oh = cur.height() - k + 1, ow = cur.width() - k + 1;
    Frame out = Frame::zeros(st.out_channels, oh, ow);
    for (std::size_t o = 0; o < st.out_channels; ++o) {
      const double bias = st.bias.empty() ? 0.0 : st.bias[o];
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          double acc = bias;
          for (std::size_t i = 0; i < st.in_channels; ++i)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx)
                acc += st.weight(o, i, ky, kx) * cur.at(i, y + ky, x + kx);
          if (st.nonlinearity == Nonlinearity::kRelu) acc = std::max(acc, 0.0);
          out.at(o, y, x) = acc;
        }
    }
    g.offset_y += g.scale * (k - 1) / 2.0;
    g.offset_x += g.scale * (k - 1) / 2.0;

    if (st.pool != PoolKind::kNone && st.pool_size > 1) {
      const auto n = static_cast<std::size_t>(st.pool_size);
      const std::size_t ph = out.height() / n, pw = out.width() / n;
      if (ph == 0 || pw == 0)
        throw ParameterError("conv stage " + std::to_string(si) + ": pool larger than input");
      Frame pooled = Frame::zeros(out.channels(), ph, pw);
      for (std::size_t c = 0; c < out.channels(); ++c)
        for (std::size_t y = 0; y < ph; ++y)
          for (std::size_t x = 0; x < pw; ++x) {
            if (st.pool == PoolKind::kDownsample) {
              pooled.at(c, y, x) = out.at(c, y * n, x * n);
              continue;
            }
            double acc = st.pool == PoolKind::kMax ? -INFINITY : 0.0;
            for (std::size_t dy = 0; dy < n; ++dy)
              for (std::size_t dx = 0; dx < n; ++dx) {
                const double v = out.at(c, y * n + dy, x * n + dx);
                acc = st.pool == PoolKind::kMax ? std::max(acc, v) : acc + v;
              }
            pooled.at(c, y, x) = st.pool == PoolKind::kMean ? acc / double(n * n) : acc;
          }
      if (st.pool != PoolKind::kDownsample) {
        g.offset_y += g.scale * (n - 1) / 2.0;
        g.offset_x += g.scale * (n - 1) / 2.0;
      }
      g.scale *= n;
      out = std::move(pooled);
    }
    cur = std::move(out);
  }
  return {std::move(cur), g, spec.total_scale()};
}

}  // namespace lcomp
