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
// Rate accounting for input-adaptive encoding distributions sent as side
// information, and the amortization gap a static distribution leaves behind.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lcomp/coder.hpp"
#include "lcomp/dist.hpp"
#include "lcomp/error.hpp"
#include "lcomp/histogram.hpp"

namespace lcomp {

struct Dims {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t pixels() const { return height * width; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

// Ratio of trained-upon to target input area.
inline double lambda_q(Dims trained, Dims target) {
  if (trained.pixels() == 0 || target.pixels() == 0)
    throw ParameterError("lambda_q: dims must be positive");
  return static_cast<double>(trained.pixels()) / static_cast<double>(target.pixels());
}

struct RateReport {
  double r_y_bits = 0.0;
  double r_q_bits = 0.0;
  double lambda_q = 1.0;
  double lambda_x = 0.0;
  std::optional<double> distortion;
  double total = 0.0;
  // Present when the input pixel count is known.
  std::optional<double> bpp_y, bpp_q, bpp_total;
};

// total = R_y + lambda_q R_q (+ lambda_x D).
inline RateReport make_rate_report(double r_y, double r_q, double lambda_q_value,
                                   double lambda_x = 0.0,
                                   std::optional<double> distortion = std::nullopt,
                                   std::optional<Dims> pixels = std::nullopt) {
  if (!(r_y >= 0.0) || !(r_q >= 0.0)) throw ParameterError("rates must be >= 0");
  RateReport r{r_y, r_q, lambda_q_value, lambda_x, distortion, 0.0, {}, {}, {}};
  r.total = r_y + lambda_q_value * r_q + (distortion ? lambda_x * *distortion : 0.0);
  if (pixels && pixels->pixels() > 0) {
    const double n = static_cast<double>(pixels->pixels());
    r.bpp_y = r_y / n;
    r.bpp_q = r_q / n;
    r.bpp_total = (r_y + lambda_q_value * r_q) / n;
  }
  return r;
}

struct GapReport {
  std::vector<double> channel_kl_bits;
  // (HW/s^2)/(HW) * sum_j KL(p_j || default_j), in bits per input pixel.
  double delta_r_max_bpp = 0.0;
};

inline GapReport potential_savings(std::span<const DiscreteDistribution> true_dists,
                                   std::span<const DiscreteDistribution> default_dists,
                                   Dims dims, std::uint32_t s) {
  if (true_dists.size() != default_dists.size())
    throw MismatchError("potential_savings: " + std::to_string(true_dists.size()) +
                        " true channels vs " + std::to_string(default_dists.size()) +
                        " default channels");
  if (dims.pixels() == 0 || s == 0) throw ParameterError("potential_savings: bad dims or s");
  GapReport g;
  double sum = 0.0;
  for (std::size_t j = 0; j < true_dists.size(); ++j) {
    g.channel_kl_bits.push_back(kl_bits(true_dists[j], default_dists[j]));
    sum += g.channel_kl_bits.back();
  }
  const double latent_per_pixel =
      (static_cast<double>(dims.pixels()) / (double(s) * double(s))) /
      static_cast<double>(dims.pixels());
  g.delta_r_max_bpp = latent_per_pixel * sum;
  return g;
}

// sum over channels and elements of -log2 p_j(q).
inline double side_rate_q(std::span<const DiscreteDistribution> dists,
                          std::span<const std::vector<int>> q_values) {
  if (dists.size() != q_values.size())
    throw MismatchError("side_rate_q: channel count mismatch");
  double bits = 0.0;
  for (std::size_t j = 0; j < dists.size(); ++j) {
    for (int q : q_values[j]) {
      auto idx = dists[j].index_of(q);
      if (!idx)
        throw ParameterError("side_rate_q: value " + std::to_string(q) + " in channel " +
                             std::to_string(j) + " outside support");
      const double p = dists[j][*idx];
      if (p == 0.0)
        throw InfiniteRateError("infinite rate: value " + std::to_string(q) + " in channel " +
                                std::to_string(j) + " has zero probability");
      bits -= std::log2(p);
    }
  }
  return bits;
}

// ---------------------------------------------------------------------------
// GMM side-information codec: per channel a K-Gaussian fit of the hard
// histogram, every parameter but the last (implied) weight sent as one byte.

inline constexpr double kGmmMinScale = 0.05;
inline constexpr int kGmmIterations = 50;

// 8-bit grids: w on [0,1], mu on [y_min, y_max], sigma log-spaced on [0.05, B].
struct GmmGrid {
  Support support;

  static std::uint8_t to_byte(double t) {
    return static_cast<std::uint8_t>(std::clamp(std::nearbyint(t * 255.0), 0.0, 255.0));
  }

  std::uint8_t weight_code(double w) const { return to_byte(w); }
  static double weight(std::uint8_t q) { return q / 255.0; }

  std::uint8_t mean_code(double mu) const {
    const double span = support.y_max() - support.y_min;
    return span == 0.0 ? 0 : to_byte((mu - support.y_min) / span);
  }
  double mean(std::uint8_t q) const {
    return support.y_min + (support.y_max() - support.y_min) * (q / 255.0);
  }

  double log_lo() const { return std::log(kGmmMinScale); }
  double log_hi() const { return std::log(static_cast<double>(support.bins)); }
  std::uint8_t scale_code(double sigma) const {
    return to_byte((std::log(std::max(sigma, kGmmMinScale)) - log_lo()) / (log_hi() - log_lo()));
  }
  double scale(std::uint8_t q) const {
    return std::exp(log_lo() + (log_hi() - log_lo()) * (q / 255.0));
  }
};

namespace detail {

inline double normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace detail

// EM over the histogram's bin centres weighted by their masses. Means start at
// the (k + 1/2)/K quantiles of the sorted samples, scales at the global
// standard deviation, weights uniform.
inline GaussianMixtureParams fit_gmm(const DiscreteDistribution& hist, int K,
                                     int iterations = kGmmIterations) {
  if (K < 1 || K > 3) throw ParameterError("K must be in [1, 3], got " + std::to_string(K));
  const auto& s = hist.support();
  double mean = 0.0, var = 0.0;
  for (std::size_t i = 0; i < s.bins; ++i) mean += hist[i] * s.center(i);
  for (std::size_t i = 0; i < s.bins; ++i) var += hist[i] * std::pow(s.center(i) - mean, 2);
  const double sd = std::max(std::sqrt(var), kGmmMinScale);

  GaussianMixtureParams gmm;
  double cum = 0.0;
  std::size_t i = 0;
  for (int k = 0; k < K; ++k) {
    const double target = (k + 0.5) / K;
    while (i + 1 < s.bins && cum + hist[i] < target) cum += hist[i++];
    gmm.components.push_back({1.0 / K, double(s.center(i)), sd});
  }

  std::vector<double> resp(s.bins * K);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t b = 0; b < s.bins; ++b) {
      if (hist[b] == 0.0) continue;
      double z = 0.0;
      for (int k = 0; k < K; ++k) {
        const auto& c = gmm.components[k];
        resp[b * K + k] = c.weight * detail::normal_pdf(s.center(b), c.mean, c.scale);
        z += resp[b * K + k];
      }
      for (int k = 0; k < K; ++k) resp[b * K + k] = z > 0.0 ? resp[b * K + k] / z : 1.0 / K;
    }
    for (int k = 0; k < K; ++k) {
      double nk = 0.0, mk = 0.0;
      for (std::size_t b = 0; b < s.bins; ++b) {
        nk += hist[b] * resp[b * K + k];
        mk += hist[b] * resp[b * K + k] * s.center(b);
      }
      auto& c = gmm.components[k];
      if (nk < 1e-12) {
        c.weight = 0.0;
        continue;
      }
      c.weight = nk;
      c.mean = mk / nk;
      double vk = 0.0;
      for (std::size_t b = 0; b < s.bins; ++b)
        vk += hist[b] * resp[b * K + k] * std::pow(s.center(b) - c.mean, 2);
      c.scale = std::max(std::sqrt(vk / nk), kGmmMinScale);
    }
    double wsum = 0.0;
    for (const auto& c : gmm.components) wsum += c.weight;
    for (auto& c : gmm.components) c.weight /= wsum;
  }
  return gmm;
}

struct GmmSideInfo {
  int K = 1;
  Support support;
  // Per channel 3K - 1 bytes: w_1..w_{K-1}, mu_1..mu_K, sigma_1..sigma_K.
  std::vector<std::vector<std::uint8_t>> codes;

  std::size_t side_bits() const {
    return static_cast<std::size_t>(3 * K - 1) * codes.size() * 8;
  }
};

inline std::vector<std::uint8_t> quantize_gmm(const GaussianMixtureParams& gmm, const GmmGrid& grid) {
  const int K = static_cast<int>(gmm.components.size());
  std::vector<std::uint8_t> code;
  code.reserve(3 * K - 1);
  int used = 0;
  for (int k = 0; k + 1 < K; ++k) {
    const int q = std::min<int>(grid.weight_code(gmm.components[k].weight), 255 - used);
    used += q;
    code.push_back(static_cast<std::uint8_t>(q));
  }
  for (const auto& c : gmm.components) code.push_back(grid.mean_code(c.mean));
  for (const auto& c : gmm.components) code.push_back(grid.scale_code(c.scale));
  return code;
}

inline GaussianMixtureParams dequantize_gmm(std::span<const std::uint8_t> code, int K,
                                            const GmmGrid& grid) {
  if (code.size() != static_cast<std::size_t>(3 * K - 1))
    throw FormatError("gmm code must have 3K-1 bytes");
  GaussianMixtureParams gmm;
  int used = 0;
  for (int k = 0; k < K; ++k) {
    double w;
    if (k + 1 < K) {
      used += code[k];
      w = GmmGrid::weight(code[k]);
    } else {
      if (used > 255) throw FormatError("gmm code: weights exceed 1");
      w = (255 - used) / 255.0;
    }
    gmm.components.push_back({w, grid.mean(code[K - 1 + k]), grid.scale(code[2 * K - 1 + k])});
  }
  return gmm;
}

inline GmmSideInfo gmm_side_codec_encode(std::span<const LatentChannel> channels, int K) {
  if (K < 1 || K > 3) throw ParameterError("K must be in [1, 3], got " + std::to_string(K));
  if (channels.empty()) throw ParameterError("gmm side codec needs at least one channel");
  GmmSideInfo out{K, channels.front().support(), {}};
  const GmmGrid grid{out.support};
  for (const auto& ch : channels) {
    if (!(ch.support() == out.support))
      throw MismatchError("gmm side codec: channels must share one support");
    const auto hist = hard_histogram(ch);
    const bool degenerate =
        std::count_if(hist.masses().begin(), hist.masses().end(), [](double m) { return m > 0; }) == 1;
    GaussianMixtureParams gmm;
    if (degenerate) {
      const double v = ch.values().front();
      for (int k = 0; k < K; ++k) gmm.components.push_back({k == 0 ? 1.0 : 0.0, v, kGmmMinScale});
    } else {
      gmm = fit_gmm(hist, K);
    }
    out.codes.push_back(quantize_gmm(gmm, grid));
  }
  return out;
}

inline std::vector<GaussianMixtureParams> gmm_side_codec_decode(const GmmSideInfo& side) {
  const GmmGrid grid{side.support};
  std::vector<GaussianMixtureParams> out;
  for (const auto& code : side.codes) out.push_back(dequantize_gmm(code, side.K, grid));
  return out;
}

// Encoding distributions the decoder reconstructs: discretized mixture with
// the coder's probability floor.
inline std::vector<DiscreteDistribution> gmm_encoding_distributions(const GmmSideInfo& side) {
  std::vector<DiscreteDistribution> out;
  for (const auto& gmm : gmm_side_codec_decode(side))
    out.push_back(with_probability_floor(discretize_gmm(gmm, side.support)));
  return out;
}

// Pass-through codec: the hard histogram itself at 16-bit frequency precision,
// costing B x 16 bits per channel.
struct HistogramSideInfo {
  std::vector<FrequencyTable> tables;
  std::size_t side_bits() const {
    std::size_t bits = 0;
    for (const auto& t : tables) bits += t.bins() * 16;
    return bits;
  }
};

inline HistogramSideInfo histogram_side_codec_encode(std::span<const LatentChannel> channels) {
  HistogramSideInfo out;
  for (const auto& ch : channels) out.tables.push_back(quantize_distribution(hard_histogram(ch)));
  return out;
}

struct AdaptiveComparison {
  RateReport static_rate;
  RateReport adaptive_rate;
  bool adaptive_wins = false;
};

// Static: every channel coded with its default distribution, no side cost.
// Adaptive: coded with the distributions carried by `side`, paying
// lambda_q * side_bits.
inline AdaptiveComparison adaptive_total_rate(std::span<const LatentChannel> channels,
                                              std::span<const DiscreteDistribution> adaptive_dists,
                                              double side_bits,
                                              std::span<const DiscreteDistribution> default_dists,
                                              Dims dims, std::uint32_t s, double lambda_q_value) {
  if (channels.size() != default_dists.size() || channels.size() != adaptive_dists.size())
    throw MismatchError("adaptive_total_rate: channel counts differ");
  double r_static = 0.0, r_adaptive = 0.0;
  for (std::size_t j = 0; j < channels.size(); ++j) {
    r_static += rate_bits(channels[j], default_dists[j], dims.height, dims.width, s);
    r_adaptive += rate_bits(channels[j], adaptive_dists[j], dims.height, dims.width, s);
  }
  AdaptiveComparison c;
  c.static_rate = make_rate_report(r_static, 0.0, lambda_q_value, 0.0, std::nullopt, dims);
  c.adaptive_rate = make_rate_report(r_adaptive, side_bits, lambda_q_value, 0.0, std::nullopt, dims);
  c.adaptive_wins = c.adaptive_rate.total < c.static_rate.total;
  return c;
}

inline AdaptiveComparison adaptive_total_rate(std::span<const LatentChannel> channels,
                                              const GmmSideInfo& side,
                                              std::span<const DiscreteDistribution> default_dists,
                                              Dims dims, std::uint32_t s, double lambda_q_value) {
  const auto dists = gmm_encoding_distributions(side);
  return adaptive_total_rate(channels, dists, static_cast<double>(side.side_bits()),
                             default_dists, dims, s, lambda_q_value);
}

// ---------------------------------------------------------------------------
// Dataset-level amortization-gap analysis.

struct GapAnalysisOptions {
  Dims dims;
  std::uint32_t s = 16;
  double lambda_q = 1.0;
  int K = 3;
  Support support;
};

struct GapAnalysis {
  // Per-channel static distributions: the pooled hard histogram over the
  // dataset, with the probability floor applied.
  std::vector<DiscreteDistribution> default_dists;
  std::vector<GapReport> per_input;
  double mean_delta_r_max_bpp = 0.0;
  // Mean over (input, channel) of N * KL(p || default).
  double mean_channel_kl_bits = 0.0;
  // Payload bits of the per-channel rANS streams carrying the whole dataset
  // under the default tables, and the matching sum of N * H(p).
  double coded_static_bits = 0.0;
  double entropy_bits_total = 0.0;
  // (coded_static_bits - entropy_bits_total) / (#inputs * #channels).
  double measured_excess_per_channel_bits = 0.0;
  std::vector<AdaptiveComparison> gmm;
  std::vector<AdaptiveComparison> histogram;
  double mean_static_total = 0.0, mean_gmm_total = 0.0, mean_histogram_total = 0.0;
};

inline GapAnalysis analyze_gap(std::span<const LatentTensor> dataset, const GapAnalysisOptions& opt) {
  if (dataset.empty()) throw ParameterError("analyze_gap: empty dataset");
  const std::size_t channels = dataset.front().channels();
  for (const auto& t : dataset)
    if (t.channels() != channels || t.elements_per_channel() != dataset.front().elements_per_channel())
      throw MismatchError("analyze_gap: inputs must share channel count and grid");

  std::vector<std::vector<LatentChannel>> chans(dataset.size());
  std::vector<std::vector<double>> pooled(channels, std::vector<double>(opt.support.bins, 0.0));
  for (std::size_t n = 0; n < dataset.size(); ++n)
    for (std::size_t j = 0; j < channels; ++j) {
      chans[n].push_back(dataset[n].quantized_channel(j, opt.support));
      const auto h = hard_histogram(chans[n].back());
      for (std::size_t i = 0; i < opt.support.bins; ++i) pooled[j][i] += h[i];
    }

  GapAnalysis out;
  for (auto& w : pooled)
    out.default_dists.push_back(
        with_probability_floor(DiscreteDistribution::normalized(opt.support.y_min, std::move(w))));

  const double inputs = static_cast<double>(dataset.size());
  const double n_elem = static_cast<double>(dataset.front().elements_per_channel());
  for (std::size_t n = 0; n < dataset.size(); ++n) {
    std::vector<DiscreteDistribution> truth;
    for (const auto& ch : chans[n]) truth.push_back(hard_histogram(ch));
    out.per_input.push_back(potential_savings(truth, out.default_dists, opt.dims, opt.s));
    out.mean_delta_r_max_bpp += out.per_input.back().delta_r_max_bpp / inputs;
    for (std::size_t j = 0; j < channels; ++j) {
      out.mean_channel_kl_bits += n_elem * out.per_input.back().channel_kl_bits[j];
      out.entropy_bits_total += n_elem * entropy_bits(truth[j]);
    }

    out.gmm.push_back(adaptive_total_rate(chans[n], gmm_side_codec_encode(chans[n], opt.K),
                                          out.default_dists, opt.dims, opt.s, opt.lambda_q));
    const auto hist_side = histogram_side_codec_encode(chans[n]);
    std::vector<DiscreteDistribution> hist_dists;
    for (const auto& t : hist_side.tables) hist_dists.push_back(t.as_distribution());
    out.histogram.push_back(adaptive_total_rate(chans[n], hist_dists,
                                                static_cast<double>(hist_side.side_bits()),
                                                out.default_dists, opt.dims, opt.s, opt.lambda_q));
    out.mean_static_total += out.gmm.back().static_rate.total / inputs;
    out.mean_gmm_total += out.gmm.back().adaptive_rate.total / inputs;
    out.mean_histogram_total += out.histogram.back().adaptive_rate.total / inputs;
  }
  out.mean_channel_kl_bits /= inputs * static_cast<double>(channels);

  for (std::size_t j = 0; j < channels; ++j) {
    const auto table = quantize_distribution(out.default_dists[j]);
    std::vector<std::uint32_t> symbols;
    symbols.reserve(dataset.size() * chans.front()[j].size());
    for (std::size_t n = 0; n < dataset.size(); ++n)
      for (double v : chans[n][j].values())
        symbols.push_back(static_cast<std::uint32_t>(v - opt.support.y_min));
    out.coded_static_bits += static_cast<double>(encode(symbols, table).payload_bits());
  }
  out.measured_excess_per_channel_bits =
      (out.coded_static_bits - out.entropy_bits_total) / (inputs * static_cast<double>(channels));
  return out;
}

}  // namespace lcomp
