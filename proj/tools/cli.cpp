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

#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lcomp/bottleneck.hpp"
#include "lcomp/coder.hpp"
#include "lcomp/dist.hpp"
#include "lcomp/error.hpp"
#include "lcomp/histogram.hpp"
#include "lcomp/motion.hpp"
#include "lcomp/pcanalysis.hpp"
#include "lcomp/sideinfo.hpp"
#include "lcomp/synth.hpp"
#include "lcomp/tensorio.hpp"
#include "run_config.hpp"

namespace lcomp::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config resolution: defaults <- --config file <- flags.

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> y_min;
  std::optional<std::size_t> bins;
  std::optional<std::uint32_t> s;
  std::optional<int> K;
  std::optional<double> lambda_q, lambda_x;
  std::optional<int> block, range;
  std::optional<std::size_t> steps;
  std::optional<double> learning_rate, init_scale;
  bool points_major = false;

  RunConfig resolve() const {
    RunConfig c = RunConfig::defaults();
    if (!config_path.empty()) {
      const auto bytes = detail::read_file(config_path);
      json j;
      try {
        j = json::parse(bytes.begin(), bytes.end());
      } catch (const json::exception& e) {
        throw FormatError(config_path + ": " + e.what());
      }
      c.merge(RunConfig::from_json(j, config_path));
    }
    RunConfig f;
    f.seed = seed;
    if (y_min || bins) f.support = Support{y_min.value_or(c.support->y_min), bins.value_or(c.support->bins)};
    f.s = s;
    f.K = K;
    f.lambda_q = lambda_q;
    f.lambda_x = lambda_x;
    f.block = block;
    f.range = range;
    f.steps = steps;
    f.learning_rate = learning_rate;
    f.init_scale = init_scale;
    if (points_major) f.points_major = true;
    c.merge(f);
    if (c.support->bins == 0) throw UsageError("--bins must be >= 1");
    return c;
  }
};

enum Flag : unsigned {
  kSeed = 1u << 0,
  kSupport = 1u << 1,
  kDownscale = 1u << 2,
  kK = 1u << 3,
  kLambda = 1u << 4,
  kBlock = 1u << 5,
  kFit = 1u << 6,
  kPointsMajor = 1u << 7,
};

void add_overrides(CLI::App* sub, Overrides& o, unsigned flags) {
  sub->add_option("--config", o.config_path, "JSON run configuration");
  if (flags & kSeed) sub->add_option("--seed", o.seed, "Random seed (config key \"seed\")");
  if (flags & kSupport) {
    sub->add_option("--y-min", o.y_min, "Lowest bin centre (config support.y_min, default -64)");
    sub->add_option("--bins", o.bins, "Number of bins B (config support.B, default 129)");
  }
  if (flags & kDownscale) sub->add_option("--s", o.s, "Latent downscale factor (config \"s\", default 16)");
  if (flags & kK) sub->add_option("--K", o.K, "Mixture components, 1..3 (config \"K\", default 3)");
  if (flags & kLambda) {
    sub->add_option("--lambda-q", o.lambda_q,
                    "Side-rate weight (config \"lambda_q\"; else trained/target area ratio, else 1)");
    sub->add_option("--lambda-x", o.lambda_x, "Distortion weight (config \"lambda_x\", default 0)");
  }
  if (flags & kBlock) {
    sub->add_option("--block", o.block, "Odd block size (config \"block\", default 3)");
    sub->add_option("--range", o.range, "Search range (config \"range\", default 5)");
  }
  if (flags & kFit) {
    sub->add_option("--steps", o.steps, "Gradient steps (config \"steps\", default 1000)");
    sub->add_option("--learning-rate", o.learning_rate,
                    "Step size (config \"learning_rate\", default 1)");
    sub->add_option("--init-scale", o.init_scale, "Initial CDF scale (config \"init_scale\", default 10)");
  }
  if (flags & kPointsMajor)
    sub->add_flag("--points-major", o.points_major,
                  "Point cloud stored P x 3 instead of 3 x P (config \"points_major\")");
}

// ---------------------------------------------------------------------------
// Small I/O helpers.

void write_text(const fs::path& path, const std::string& text) {
  detail::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

LatentChannel load_channel(const std::string& path, std::size_t channel, const Support& support) {
  const auto lt = LatentTensor::from_tensor(read_tensor(path));
  if (channel >= lt.channels())
    throw ParameterError(path + ": channel " + std::to_string(channel) + " out of range (" +
                         std::to_string(lt.channels()) + " channels)");
  try {
    return lt.channel(channel, support);
  } catch (const Error& e) {
    throw ParameterError(path + ": channel " + std::to_string(channel) + ": " + e.what());
  }
}

json rate_report_json(const RateReport& r) {
  json j = {{"R_y_bits", r.r_y_bits}, {"R_q_bits", r.r_q_bits}, {"lambda_q", r.lambda_q},
            {"lambda_x", r.lambda_x}, {"total", r.total}};
  if (r.distortion) j["distortion"] = *r.distortion;
  if (r.bpp_total) {
    j["bpp_y"] = *r.bpp_y;
    j["bpp_q"] = *r.bpp_q;
    j["bpp_total"] = *r.bpp_total;
  }
  return j;
}

ConvStackSpec conv_stack_of(const RunConfig& cfg, const std::string& what) {
  if (cfg.conv_stack) return ConvStackSpec::from_json(*cfg.conv_stack);
  return default_conv_stack(cfg.require_seed(what + " (default conv stack)"));
}

// ---------------------------------------------------------------------------
// Subcommands.

struct HistogramArgs {
  std::string input, output, jacobian;
  std::size_t channel = 0;
  bool soft = false;
};

void cmd_histogram(const HistogramArgs& a, const RunConfig& cfg, std::ostream& out) {
  const auto ch = load_channel(a.input, a.channel, *cfg.support);
  const auto p = a.soft ? soft_histogram(ch) : hard_histogram(ch);
  save_distribution(p, a.output);
  if (!a.jacobian.empty()) {
    const auto jac = soft_histogram_jacobian(ch);
    write_tensor(Tensor({static_cast<std::uint32_t>(jac.samples()), static_cast<std::uint32_t>(jac.bins())},
                        std::vector<float>(jac.values().begin(), jac.values().end())),
                 a.jacobian);
  }
  out << json{{"samples", ch.size()}, {"y_min", p.y_min()}, {"B", p.bins()},
              {"kind", a.soft ? "soft" : "hard"}, {"entropy_bits", entropy_bits(p)}}
             .dump()
      << "\n";
}

struct FitArgs {
  std::string input, output, distribution;
  std::size_t channel = 0;
};

void cmd_fit(const FitArgs& a, const RunConfig& cfg, std::ostream& out) {
  const auto lt = LatentTensor::from_tensor(read_tensor(a.input));
  if (a.channel >= lt.channels())
    throw ParameterError(a.input + ": channel " + std::to_string(a.channel) + " out of range");
  const auto values = lt.channel_values(a.channel);
  FitOptions opt;
  opt.seed = cfg.require_seed("fit-bottleneck");
  opt.steps = *cfg.steps;
  opt.learning_rate = *cfg.learning_rate;
  opt.init_scale = *cfg.init_scale;
  const auto model = fit(values, opt);
  write_json(a.output, model.to_json());
  double bits = 0.0;
  for (double y : values) bits -= std::log2(coding_likelihood(model, std::nearbyint(y)));
  json summary = {{"samples", values.size()}, {"steps", opt.steps},
                  {"mean_bits_rounded", bits / double(values.size())}};
  if (!a.distribution.empty()) {
    const auto p = model_distribution(model, *cfg.support);
    save_distribution(p, a.distribution);
    summary["entropy_bits"] = entropy_bits(p);
  }
  out << summary.dump() << "\n";
}

struct EncodeArgs {
  std::string input, output, distribution, model;
};

void cmd_encode(const EncodeArgs& a, const RunConfig& cfg, std::ostream& out) {
  if (!a.distribution.empty() && !a.model.empty())
    throw UsageError("--distribution and --model are mutually exclusive");
  const Tensor t = read_tensor(a.input);
  std::optional<DiscreteDistribution> dist;
  if (!a.distribution.empty()) dist = load_distribution(a.distribution);
  else if (!a.model.empty())
    dist = model_distribution(MonotoneCdfModel::from_json(read_json(a.model)), *cfg.support);
  const Support support = dist ? dist->support() : *cfg.support;

  std::vector<std::uint32_t> symbols;
  symbols.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = t.data[i];
    if (v != std::nearbyint(v))
      throw ParameterError(a.input + ": value " + detail::format_double(v) + " at index " +
                           std::to_string(i) + " is not an integer");
    if (!support.contains(v))
      throw ParameterError(a.input + ": value " + detail::format_double(v) + " at index " +
                           std::to_string(i) + " is outside support [" +
                           std::to_string(support.y_min) + ", " + std::to_string(support.y_max()) + "]");
    symbols.push_back(static_cast<std::uint32_t>(v - support.y_min));
  }
  if (!dist) {
    std::vector<double> counts(support.bins, 0.0);
    for (auto s : symbols) counts[s] += 1.0;
    dist = symbols.empty() ? DiscreteDistribution::uniform(support)
                           : DiscreteDistribution::normalized(support.y_min, std::move(counts));
  }
  const auto table = quantize_distribution(*dist);
  const auto stream = encode(symbols, table);
  write_bitstream(stream, a.output);
  out << json{{"count", stream.count},
              {"payload_bits", stream.payload_bits()},
              {"ideal_bits", ideal_code_length_bits(symbols, table)},
              {"stream_bytes", serialize(stream).size()}}
             .dump()
      << "\n";
}

struct DecodeArgs {
  std::string input, output;
  std::vector<std::uint32_t> dims;
};

void cmd_decode(const DecodeArgs& a, std::ostream& out) {
  const auto stream = read_bitstream(a.input);
  const auto symbols = decode(stream);
  std::vector<std::uint32_t> dims = a.dims;
  if (dims.empty()) dims = {stream.count};
  if (Tensor::element_count(dims) != symbols.size())
    throw ParameterError(a.input + ": --dims hold " + std::to_string(Tensor::element_count(dims)) +
                         " elements but the stream has " + std::to_string(symbols.size()));
  std::vector<float> data;
  data.reserve(symbols.size());
  for (auto s : symbols) data.push_back(static_cast<float>(stream.table.support().y_min + int(s)));
  write_tensor(Tensor(std::move(dims), std::move(data)), a.output);
  out << json{{"count", stream.count}}.dump() << "\n";
}

struct GapArgs {
  std::string input_dir, output, curve;
  bool synthetic = false;
  std::size_t inputs = 100;
};

void cmd_analyze_gap(const GapArgs& a, const RunConfig& cfg, std::ostream& out) {
  if (a.synthetic == !a.input_dir.empty())
    throw UsageError("analyze-gap needs exactly one of --synthetic and --input-dir");
  std::vector<LatentTensor> dataset;
  if (a.synthetic) {
    synth::LaplacianDatasetOptions o;
    o.inputs = a.inputs;
    o.downscale = *cfg.s;
    o.seed = cfg.require_seed("analyze-gap --synthetic");
    dataset = synth::laplacian_dataset(o);
  } else {
    std::vector<fs::path> files;
    if (!fs::is_directory(a.input_dir)) throw IoError("'" + a.input_dir + "' is not a directory");
    for (const auto& e : fs::directory_iterator(a.input_dir))
      if (e.is_regular_file() && e.path().extension() == ".lct") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("'" + a.input_dir + "' holds no .lct files");
    for (const auto& f : files) dataset.push_back(LatentTensor::from_tensor(read_tensor(f), *cfg.s));
  }

  GapAnalysisOptions opt;
  opt.s = *cfg.s;
  opt.dims = cfg.dims ? *cfg.dims
                      : Dims{dataset.front().height() * opt.s, dataset.front().width() * opt.s};
  opt.lambda_q = cfg.effective_lambda_q();
  opt.K = *cfg.K;
  opt.support = *cfg.support;
  const auto g = analyze_gap(dataset, opt);

  auto mean_report = [&](auto member) {
    RateReport sum;
    for (const auto& c : member) sum.r_y_bits += c.r_y_bits, sum.r_q_bits += c.r_q_bits;
    const double n = static_cast<double>(member.size());
    return make_rate_report(sum.r_y_bits / n, sum.r_q_bits / n, opt.lambda_q, *cfg.lambda_x,
                            std::nullopt, opt.dims);
  };
  std::vector<RateReport> st, gm, hi;
  json per_input = json::array();
  for (std::size_t n = 0; n < dataset.size(); ++n) {
    st.push_back(g.gmm[n].static_rate);
    gm.push_back(g.gmm[n].adaptive_rate);
    hi.push_back(g.histogram[n].adaptive_rate);
    per_input.push_back({{"channel_kl_bits", g.per_input[n].channel_kl_bits},
                         {"delta_r_max_bpp", g.per_input[n].delta_r_max_bpp},
                         {"static", rate_report_json(st.back())},
                         {"gmm", rate_report_json(gm.back())},
                         {"histogram", rate_report_json(hi.back())}});
  }
  const auto mean_static = mean_report(st), mean_gmm = mean_report(gm), mean_hist = mean_report(hi);
  std::string winner = "static";
  if (mean_gmm.total < mean_static.total) winner = "gmm";
  if (mean_hist.total < std::min(mean_static.total, mean_gmm.total)) winner = "histogram";

  RunConfig used = cfg;
  used.dims = opt.dims;
  used.lambda_q = opt.lambda_q;
  json report = {
      {"config", used.to_json()},
      {"inputs", dataset.size()},
      {"channels", dataset.front().channels()},
      {"elements_per_channel", dataset.front().elements_per_channel()},
      {"gap",
       {{"mean_delta_r_max_bpp", g.mean_delta_r_max_bpp},
        {"mean_channel_kl_bits", g.mean_channel_kl_bits}}},
      {"static_coding",
       {{"coded_bits", g.coded_static_bits},
        {"entropy_bits", g.entropy_bits_total},
        {"excess_per_channel_bits", g.measured_excess_per_channel_bits}}},
      {"mean_rates",
       {{"static", rate_report_json(mean_static)},
        {"gmm", rate_report_json(mean_gmm)},
        {"histogram", rate_report_json(mean_hist)}}},
      {"winner", winner},
      {"per_input", per_input}};
  write_json(a.output, report);

  if (!a.curve.empty()) {
    // Side-information bits per input vs mean total bpp, one row per codec.
    std::map<double, double> rows;
    rows[0.0] = *mean_static.bpp_total;
    for (int K = 1; K <= 3; ++K) {
      auto o = opt;
      o.K = K;
      const auto gk = K == opt.K ? g : analyze_gap(dataset, o);
      std::vector<RateReport> r;
      for (const auto& c : gk.gmm) r.push_back(c.adaptive_rate);
      const auto m = mean_report(r);
      rows.emplace(m.r_q_bits, *m.bpp_total);
    }
    rows.emplace(mean_hist.r_q_bits, *mean_hist.bpp_total);
    std::vector<CurvePoint> pts;
    for (const auto& [r, q] : rows) pts.push_back({r, q});
    write_curve(pts, a.curve);
  }
  out << json{{"mean_delta_r_max_bpp", g.mean_delta_r_max_bpp}, {"winner", winner}}.dump() << "\n";
}

struct GmmArgs {
  std::string input, output;
};

void cmd_gmm_side(const GmmArgs& a, const RunConfig& cfg, std::ostream& out) {
  const auto lt = LatentTensor::from_tensor(read_tensor(a.input));
  std::vector<LatentChannel> chans;
  for (std::size_t j = 0; j < lt.channels(); ++j) chans.push_back(lt.quantized_channel(j, *cfg.support));
  const auto side = gmm_side_codec_encode(chans, *cfg.K);
  const auto params = gmm_side_codec_decode(side);
  json channels = json::array();
  for (std::size_t j = 0; j < params.size(); ++j) {
    json comps = json::array();
    for (const auto& c : params[j].components)
      comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"scale", c.scale}});
    channels.push_back({{"codes", side.codes[j]}, {"components", comps}});
  }
  write_json(a.output, {{"K", side.K},
                        {"support", {{"y_min", side.support.y_min}, {"B", side.support.bins}}},
                        {"side_bits", side.side_bits()},
                        {"channels", channels}});
  out << json{{"channels", side.codes.size()}, {"side_bits", side.side_bits()}}.dump() << "\n";
}

struct CriticalArgs {
  std::string features, cloud, weights, output;
};

void cmd_critical_points(const CriticalArgs& a, const RunConfig& cfg, std::ostream& out) {
  std::optional<FeatureMap> fmap;
  if (!a.features.empty()) {
    if (!a.cloud.empty() || !a.weights.empty())
      throw UsageError("--features excludes --cloud/--weights");
    fmap = FeatureMap::from_tensor(read_tensor(a.features));
  } else {
    if (a.cloud.empty() || a.weights.empty())
      throw UsageError("give --features, or both --cloud and --weights");
    const auto cloud = PointCloud::from_tensor(read_tensor(a.cloud), *cfg.points_major);
    const auto w = read_tensor(a.weights);
    if (w.rank() != 2 || w.dims[1] != 3) throw FormatError(a.weights + ": weights must be N x 3");
    fmap = linear_features(cloud, std::vector<double>(w.data.begin(), w.data.end()));
  }
  const auto idx = critical_point_set(*fmap);
  const auto pooled = max_pool_features(*fmap);
  write_json(a.output, {{"features", fmap->features()},
                        {"points", fmap->points()},
                        {"indices", idx},
                        {"pooled", pooled}});
  out << json{{"critical_points", idx.size()}, {"points", fmap->points()}}.dump() << "\n";
}

struct ParetoArgs {
  std::string input, output;
};

void cmd_pareto(const ParetoArgs& a, std::ostream& out) {
  std::vector<RAPoint> pts;
  for (const auto& p : read_points(a.input)) pts.push_back({p.rate, p.quality});
  std::vector<CurvePoint> front;
  for (const auto& p : pareto_front(pts)) front.push_back({p.rate, p.accuracy});
  write_curve(front, a.output);
  out << json{{"points", pts.size()}, {"front", front.size()}}.dump() << "\n";
}

struct BdArgs {
  std::string anchor, test, mode = "rate";
};

void cmd_bd(const BdArgs& a, std::ostream& out) {
  const auto anchor = read_curve(a.anchor);
  const auto test = read_curve(a.test);
  double v = bd_metric(anchor, test, a.mode == "quality" ? BdMode::kQuality : BdMode::kRate);
  if (v == 0.0) v = 0.0;  // no "-0.0000"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  out << buf << "\n";
}

struct MotionEstimateArgs {
  std::string ref, tgt, output;
};

void cmd_motion_estimate(const MotionEstimateArgs& a, const RunConfig& cfg, std::ostream& out) {
  const auto ref = Frame::from_tensor(read_tensor(a.ref));
  const auto tgt = Frame::from_tensor(read_tensor(a.tgt));
  const auto field = block_match(ref, tgt, *cfg.block, *cfg.range);
  write_tensor(field.to_tensor(), a.output);
  std::size_t valid = std::count(field.valid.begin(), field.valid.end(), 1);
  out << json{{"height", field.height}, {"width", field.width}, {"valid", valid}}.dump() << "\n";
}

struct MotionPredictArgs {
  std::string ref, field, output, mask, actual;
  bool latent = false;
};

void cmd_motion_predict(const MotionPredictArgs& a, const RunConfig& cfg, std::ostream& out) {
  Frame ref = Frame::from_tensor(read_tensor(a.ref));
  MotionField field = MotionField::from_tensor(read_tensor(a.field));
  std::optional<Frame> actual;
  if (!a.actual.empty()) actual = Frame::from_tensor(read_tensor(a.actual));
  if (a.latent) {
    const auto spec = conv_stack_of(cfg, "motion-predict --latent");
    auto lr = run_conv_stack(ref, spec);
    field = scale_motion(field, static_cast<int>(lr.total_scale), 1, lr.latent.height(),
                         lr.latent.width(), lr.geometry);
    ref = std::move(lr.latent);
    if (actual) actual = run_conv_stack(*actual, spec).latent;
  }
  const auto pred = warp(ref, field);
  write_tensor(pred.frame.to_tensor(), a.output);
  if (!a.mask.empty())
    write_tensor(Tensor({static_cast<std::uint32_t>(pred.frame.height()),
                         static_cast<std::uint32_t>(pred.frame.width())},
                        std::vector<float>(pred.mask.begin(), pred.mask.end())),
                 a.mask);
  json summary = {{"valid", std::count(pred.mask.begin(), pred.mask.end(), 1)}};
  if (actual) summary["nrmse"] = nrmse(*actual, pred.frame, pred.mask);
  out << summary.dump() << "\n";
}

struct SweepArgs {
  std::string param = "tx", output;
  double from = -32.0, to = 32.0;
  std::size_t count = 9, size = 224;
};

void cmd_nrmse_sweep(const SweepArgs& a, const RunConfig& cfg, std::ostream& out) {
  static const std::map<std::string, double AffineParams::*> kParams = {
      {"tx", &AffineParams::tx},           {"ty", &AffineParams::ty},
      {"sx", &AffineParams::sx},           {"sy", &AffineParams::sy},
      {"shear_x", &AffineParams::shear_x}, {"shear_y", &AffineParams::shear_y},
      {"rot", &AffineParams::rot}};
  const auto it = kParams.find(a.param);
  if (it == kParams.end()) throw UsageError("--param must be one of tx ty sx sy shear_x shear_y rot");
  if (a.count < 2 || !(a.to > a.from)) throw UsageError("sweep needs --count >= 2 and --to > --from");
  const auto seed = cfg.require_seed("nrmse-sweep");
  const auto spec = conv_stack_of(cfg, "nrmse-sweep");
  const auto tex = synth::Texture::random(seed);
  const auto lr = run_conv_stack(tex.render(a.size, a.size), spec);
  std::vector<CurvePoint> pts;
  for (std::size_t i = 0; i < a.count; ++i) {
    AffineParams p;
    const double v = a.from + (a.to - a.from) * double(i) / double(a.count - 1);
    p.*(it->second) = v;
    const auto lt = run_conv_stack(tex.render(a.size, a.size, p), spec);
    const auto field = scale_motion(affine_field(p, a.size, a.size), static_cast<int>(lr.total_scale),
                                    1, lr.latent.height(), lr.latent.width(), lr.geometry);
    const auto pred = warp(lr.latent, field);
    pts.push_back({v, nrmse(lt.latent, pred.frame, pred.mask)});
  }
  write_curve(pts, a.output);
  double worst = 0.0;
  for (const auto& p : pts) worst = std::max(worst, p.quality);
  out << json{{"points", pts.size()}, {"max_nrmse", worst}}.dump() << "\n";
}

struct GenerateArgs {
  std::string kind, output;
  std::size_t count = 100, size = 224;
  double shift_x = 0.0, shift_y = 0.0;
};

void cmd_generate(const GenerateArgs& a, const RunConfig& cfg, std::ostream& out) {
  const auto seed = cfg.require_seed("generate");
  if (a.kind == "laplacian") {
    synth::LaplacianDatasetOptions o;
    o.inputs = a.count;
    o.downscale = *cfg.s;
    o.seed = seed;
    fs::create_directories(a.output);
    const auto ds = synth::laplacian_dataset(o);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "input_%04zu.lct", i);
      write_tensor(ds[i].to_tensor(), fs::path(a.output) / name);
    }
  } else if (a.kind == "frame") {
    write_tensor(synth::Texture::random(seed).render(a.size, a.size, a.shift_x, a.shift_y).to_tensor(),
                 a.output);
  } else if (a.kind == "cloud") {
    std::mt19937_64 rng(seed);
    const auto c = synth::random_point_cloud(a.count, rng);
    std::vector<float> d(3 * c.size());
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t k = 0; k < 3; ++k) d[k * c.size() + i] = static_cast<float>(c.points[i][k]);
    write_tensor(Tensor({3, static_cast<std::uint32_t>(c.size())}, std::move(d)), a.output);
  } else if (a.kind == "ra-points") {
    std::mt19937_64 rng(seed);
    std::string text = "rate,quality\n";
    for (const auto& p : synth::random_ra_points(a.count, rng))
      text += detail::format_double(p.rate) + "," + detail::format_double(p.accuracy) + "\n";
    write_text(a.output, text);
  } else {
    throw UsageError("--kind must be one of laplacian frame cloud ra-points");
  }
  out << json{{"kind", a.kind}, {"output", a.output}}.dump() << "\n";
}

}  // namespace

ConvStackSpec default_conv_stack(std::uint64_t seed) {
  const std::size_t channels[] = {4, 4};
  return random_conv_stack(seed, 1, channels, 3, Nonlinearity::kRelu, PoolKind::kMean, 2);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entropy-model, coding and codec-analysis tools", "lcomp"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  Overrides ov;
  std::function<void()> action;

  HistogramArgs hist;
  auto* s_hist = app.add_subcommand("histogram", "Hard or soft histogram of one latent channel");
  s_hist->add_option("--input", hist.input, "Latent TensorFile")->required();
  s_hist->add_option("--channel", hist.channel, "Channel index")->capture_default_str();
  s_hist->add_option("--output", hist.output, "Distribution TensorFile (+ .json sidecar)")->required();
  s_hist->add_option("--jacobian", hist.jacobian, "Write the N x B soft-histogram Jacobian here");
  s_hist->add_flag("--soft", hist.soft, "Triangular-kernel histogram instead of rounding");
  add_overrides(s_hist, ov, kSupport);
  s_hist->callback([&] { action = [&] { cmd_histogram(hist, ov.resolve(), out); }; });

  FitArgs fitargs;
  auto* s_fit = app.add_subcommand("fit-bottleneck", "Fit a monotone CDF model to one channel");
  s_fit->add_option("--input", fitargs.input, "Latent TensorFile")->required();
  s_fit->add_option("--channel", fitargs.channel, "Channel index")->capture_default_str();
  s_fit->add_option("--output", fitargs.output, "Model JSON")->required();
  s_fit->add_option("--distribution", fitargs.distribution, "Also write the model pmf on the support");
  add_overrides(s_fit, ov, kSeed | kSupport | kFit);
  s_fit->callback([&] { action = [&] { cmd_fit(fitargs, ov.resolve(), out); }; });

  EncodeArgs enc;
  auto* s_enc = app.add_subcommand("encode", "rANS-encode an integer TensorFile");
  s_enc->add_option("--input", enc.input, "TensorFile of integers")->required();
  s_enc->add_option("--output", enc.output, "BitStream file")->required();
  s_enc->add_option("--distribution", enc.distribution, "Encoding distribution (default: input histogram)");
  s_enc->add_option("--model", enc.model, "Fitted bottleneck model JSON");
  add_overrides(s_enc, ov, kSupport);
  s_enc->callback([&] { action = [&] { cmd_encode(enc, ov.resolve(), out); }; });

  DecodeArgs dec;
  auto* s_dec = app.add_subcommand("decode", "Decode a BitStream to a TensorFile");
  s_dec->add_option("--input", dec.input, "BitStream file")->required();
  s_dec->add_option("--output", dec.output, "TensorFile")->required();
  s_dec->add_option("--dims", dec.dims, "Output dims (default: one axis of length count)")->delimiter(',');
  s_dec->callback([&] { action = [&] { cmd_decode(dec, out); }; });

  GapArgs gap;
  auto* s_gap = app.add_subcommand("analyze-gap", "Amortization gap and static vs adaptive rates");
  s_gap->add_option("--input-dir", gap.input_dir, "Directory of latent TensorFiles (*.lct)");
  s_gap->add_flag("--synthetic", gap.synthetic, "Use the built-in two-Laplacian dataset");
  s_gap->add_option("--inputs", gap.inputs, "Synthetic dataset size")->capture_default_str();
  s_gap->add_option("--output", gap.output, "Report JSON")->required();
  s_gap->add_option("--curve", gap.curve, "CurveFile: side bits per input vs mean total bpp");
  add_overrides(s_gap, ov, kSeed | kSupport | kDownscale | kK | kLambda);
  s_gap->callback([&] { action = [&] { cmd_analyze_gap(gap, ov.resolve(), out); }; });

  GmmArgs gmm;
  auto* s_gmm = app.add_subcommand("gmm-side", "Quantized per-channel GMM side information");
  s_gmm->add_option("--input", gmm.input, "Latent TensorFile")->required();
  s_gmm->add_option("--output", gmm.output, "Side-info JSON")->required();
  add_overrides(s_gmm, ov, kSupport | kK);
  s_gmm->callback([&] { action = [&] { cmd_gmm_side(gmm, ov.resolve(), out); }; });

  CriticalArgs crit;
  auto* s_crit = app.add_subcommand("critical-points", "Critical point set of a pointwise feature map");
  s_crit->add_option("--features", crit.features, "N x P feature TensorFile");
  s_crit->add_option("--cloud", crit.cloud, "Point cloud TensorFile (3 x P)");
  s_crit->add_option("--weights", crit.weights, "N x 3 linear feature weights");
  s_crit->add_option("--output", crit.output, "Result JSON")->required();
  add_overrides(s_crit, ov, kPointsMajor);
  s_crit->callback([&] { action = [&] { cmd_critical_points(crit, ov.resolve(), out); }; });

  ParetoArgs par;
  auto* s_par = app.add_subcommand("pareto", "Pareto front of rate-accuracy points");
  s_par->add_option("--input", par.input, "CurveFile rows (any order)")->required();
  s_par->add_option("--output", par.output, "CurveFile of the front")->required();
  s_par->callback([&] { action = [&] { cmd_pareto(par, out); }; });

  BdArgs bd;
  auto* s_bd = app.add_subcommand("bd-rate", "Bjontegaard-delta rate (percent) or quality");
  s_bd->add_option("--anchor", bd.anchor, "Anchor CurveFile")->required();
  s_bd->add_option("--test", bd.test, "Test CurveFile")->required();
  s_bd->add_option("--mode", bd.mode, "rate or quality")
      ->check(CLI::IsMember({"rate", "quality"}))
      ->capture_default_str();
  s_bd->callback([&] { action = [&] { cmd_bd(bd, out); }; });

  MotionEstimateArgs me;
  auto* s_me = app.add_subcommand("motion-estimate", "Exhaustive SSD block matching");
  s_me->add_option("--ref", me.ref, "Reference frame TensorFile")->required();
  s_me->add_option("--tgt", me.tgt, "Target frame TensorFile")->required();
  s_me->add_option("--output", me.output, "Motion field TensorFile (3 x H x W)")->required();
  add_overrides(s_me, ov, kBlock);
  s_me->callback([&] { action = [&] { cmd_motion_estimate(me, ov.resolve(), out); }; });

  MotionPredictArgs mp;
  auto* s_mp = app.add_subcommand("motion-predict", "Motion-compensated prediction");
  s_mp->add_option("--ref", mp.ref, "Reference frame TensorFile")->required();
  s_mp->add_option("--field", mp.field, "Input-domain motion field TensorFile")->required();
  s_mp->add_option("--output", mp.output, "Predicted frame TensorFile")->required();
  s_mp->add_option("--mask", mp.mask, "Write the validity mask here");
  s_mp->add_option("--actual", mp.actual, "Actual target frame; reports masked NRMSE");
  s_mp->add_flag("--latent", mp.latent, "Predict in the conv-stack latent domain");
  add_overrides(s_mp, ov, kSeed);
  s_mp->callback([&] { action = [&] { cmd_motion_predict(mp, ov.resolve(), out); }; });

  SweepArgs sw;
  auto* s_sw = app.add_subcommand("nrmse-sweep", "Latent prediction NRMSE vs one affine parameter");
  s_sw->add_option("--param", sw.param, "tx ty sx sy shear_x shear_y rot")->capture_default_str();
  s_sw->add_option("--from", sw.from, "First value")->capture_default_str();
  s_sw->add_option("--to", sw.to, "Last value")->capture_default_str();
  s_sw->add_option("--count", sw.count, "Number of values")->capture_default_str();
  s_sw->add_option("--size", sw.size, "Frame side length")->capture_default_str();
  s_sw->add_option("--output", sw.output, "CurveFile: parameter value, NRMSE")->required();
  add_overrides(s_sw, ov, kSeed);
  s_sw->callback([&] { action = [&] { cmd_nrmse_sweep(sw, ov.resolve(), out); }; });

  GenerateArgs gen;
  auto* s_gen = app.add_subcommand("generate", "Write seeded synthetic data");
  s_gen->add_option("--kind", gen.kind, "laplacian frame cloud ra-points")->required();
  s_gen->add_option("--output", gen.output, "Output file (directory for laplacian)")->required();
  s_gen->add_option("--count", gen.count, "Inputs, points or rows")->capture_default_str();
  s_gen->add_option("--size", gen.size, "Frame side length")->capture_default_str();
  s_gen->add_option("--shift-x", gen.shift_x, "Frame content shift in x")->capture_default_str();
  s_gen->add_option("--shift-y", gen.shift_y, "Frame content shift in y")->capture_default_str();
  add_overrides(s_gen, ov, kSeed | kDownscale);
  s_gen->callback([&] { action = [&] { cmd_generate(gen, ov.resolve(), out); }; });

  auto* s_cfg = app.add_subcommand("print-config", "Print the effective run configuration");
  add_overrides(s_cfg, ov, kSeed | kSupport | kDownscale | kK | kLambda | kBlock | kFit | kPointsMajor);
  s_cfg->callback([&] {
    action = [&] {
      auto cfg = ov.resolve();
      if (!cfg.conv_stack && cfg.seed) cfg.conv_stack = default_conv_stack(*cfg.seed).to_json();
      out << cfg.to_json().dump(2) << "\n";
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }
  try {
    action();
    return 0;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace lcomp::cli
