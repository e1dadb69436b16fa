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
// The JSON run configuration shared by all subcommands. Every key is optional;
// defaults() lists the value each one takes when neither the config file nor
// a flag sets it. Unknown keys are rejected.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "lcomp/dist.hpp"
#include "lcomp/sideinfo.hpp"

namespace lcomp::cli {

// Bad invocation: exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // Input pixel dims; when unset, latent grid dims times s.
  std::optional<Dims> dims;
  std::optional<std::uint32_t> s;
  // Either given directly or computed from trained_dims / target_dims.
  std::optional<double> lambda_q;
  std::optional<Dims> trained_dims, target_dims;
  std::optional<double> lambda_x;
  std::optional<int> K;
  std::optional<Support> support;
  std::optional<int> block, range;
  std::optional<nlohmann::json> conv_stack;
  // No default: any command that draws random numbers requires it.
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::optional<double> learning_rate;
  std::optional<double> init_scale;
  std::optional<bool> points_major;

  static RunConfig defaults() {
    RunConfig c;
    c.s = 16;
    c.lambda_x = 0.0;
    c.K = 3;
    c.support = Support{-64, 129};
    c.block = 3;
    c.range = 5;
    c.steps = 1000;
    c.learning_rate = 1.0;
    c.init_scale = 10.0;
    c.points_major = false;
    return c;
  }

  // Fields set in `over` replace ours.
  void merge(const RunConfig& over) {
    auto take = [](auto& dst, const auto& src) {
      if (src) dst = src;
    };
    take(dims, over.dims);
    take(s, over.s);
    take(lambda_q, over.lambda_q);
    take(trained_dims, over.trained_dims);
    take(target_dims, over.target_dims);
    take(lambda_x, over.lambda_x);
    take(K, over.K);
    take(support, over.support);
    take(block, over.block);
    take(range, over.range);
    take(conv_stack, over.conv_stack);
    take(seed, over.seed);
    take(steps, over.steps);
    take(learning_rate, over.learning_rate);
    take(init_scale, over.init_scale);
    take(points_major, over.points_major);
  }

  // lambda_q if set, else the trained/target area ratio, else 1.
  double effective_lambda_q() const {
    if (lambda_q) return *lambda_q;
    if (trained_dims && target_dims) return lcomp::lambda_q(*trained_dims, *target_dims);
    if (trained_dims || target_dims)
      throw UsageError("trained_dims and target_dims must be given together");
    return 1.0;
  }

  std::uint64_t require_seed(const std::string& what) const {
    if (!seed)
      throw UsageError(what + " is stochastic: set \"seed\" in the config or pass --seed");
    return *seed;
  }

  static RunConfig from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object()) throw FormatError(where + ": config must be a JSON object");
    RunConfig c;
    try {
      for (const auto& [key, v] : j.items()) {
        if (key == "dims") c.dims = parse_dims(v, where + ": dims");
        else if (key == "s") c.s = v.get<std::uint32_t>();
        else if (key == "lambda_q") c.lambda_q = v.get<double>();
        else if (key == "trained_dims") c.trained_dims = parse_dims(v, where + ": trained_dims");
        else if (key == "target_dims") c.target_dims = parse_dims(v, where + ": target_dims");
        else if (key == "lambda_x") c.lambda_x = v.get<double>();
        else if (key == "K") c.K = v.get<int>();
        else if (key == "support") c.support = parse_support(v, where + ": support");
        else if (key == "block") c.block = v.get<int>();
        else if (key == "range") c.range = v.get<int>();
        else if (key == "conv_stack") c.conv_stack = v;
        else if (key == "seed") c.seed = v.get<std::uint64_t>();
        else if (key == "steps") c.steps = v.get<std::size_t>();
        else if (key == "learning_rate") c.learning_rate = v.get<double>();
        else if (key == "init_scale") c.init_scale = v.get<double>();
        else if (key == "points_major") c.points_major = v.get<bool>();
        else throw FormatError(where + ": unknown key \"" + key + "\"");
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    return c;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    auto dims_json = [](const Dims& d) { return nlohmann::json{{"H", d.height}, {"W", d.width}}; };
    if (dims) j["dims"] = dims_json(*dims);
    if (s) j["s"] = *s;
    if (lambda_q) j["lambda_q"] = *lambda_q;
    if (trained_dims) j["trained_dims"] = dims_json(*trained_dims);
    if (target_dims) j["target_dims"] = dims_json(*target_dims);
    if (lambda_x) j["lambda_x"] = *lambda_x;
    if (K) j["K"] = *K;
    if (support) j["support"] = {{"y_min", support->y_min}, {"B", support->bins}};
    if (block) j["block"] = *block;
    if (range) j["range"] = *range;
    if (conv_stack) j["conv_stack"] = *conv_stack;
    if (seed) j["seed"] = *seed;
    if (steps) j["steps"] = *steps;
    if (learning_rate) j["learning_rate"] = *learning_rate;
    if (init_scale) j["init_scale"] = *init_scale;
    if (points_major) j["points_major"] = *points_major;
    return j;
  }

 private:
  static Dims parse_dims(const nlohmann::json& v, const std::string& where) {
    if (!v.is_object() || !v.contains("H") || !v.contains("W") || v.size() != 2)
      throw FormatError(where + ": expected {\"H\": int, \"W\": int}");
    Dims d{v["H"].get<std::size_t>(), v["W"].get<std::size_t>()};
    if (d.pixels() == 0) throw FormatError(where + ": dims must be positive");
    return d;
  }
  static Support parse_support(const nlohmann::json& v, const std::string& where) {
    if (!v.is_object() || !v.contains("y_min") || !v.contains("B") || v.size() != 2)
      throw FormatError(where + ": expected {\"y_min\": int, \"B\": int}");
    Support s{v["y_min"].get<int>(), v["B"].get<std::size_t>()};
    if (s.bins == 0) throw FormatError(where + ": B must be >= 1");
    return s;
  }
};

}  // namespace lcomp::cli
