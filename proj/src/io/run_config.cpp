// Copyright 2026 The dloest Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dloest/io/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace dloest::io {

namespace {

// One row per key: parse and echo stay in lockstep.
struct Field {
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("config: key '" + key + "' expects a number, got '" + v +
                    "'");
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError("config: key '" + key + "' expects an integer, got '" +
                      v + "'");
  return out;
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(to_double(key, item));
  if (out.empty())
    throw ConfigError("config: key '" + key + "' expects a comma list");
  return out;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string list_str(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += num(v[i]);
  }
  return out;
}

#define NUM_FIELD(key, expr)                                            \
  Field{key,                                                            \
        [](RunConfig& c, const std::string& v) { c.expr = to_double(key, v); }, \
        [](const RunConfig& c) { return num(c.expr); }}
#define INT_FIELD(key, type, expr)                                           \
  Field{key,                                                                 \
        [](RunConfig& c, const std::string& v) {                             \
          c.expr = static_cast<type>(to_int(key, v));                        \
        },                                                                   \
        [](const RunConfig& c) { return std::to_string(c.expr); }}
#define LIST_FIELD(key, expr)                                            \
  Field{key,                                                             \
        [](RunConfig& c, const std::string& v) { c.expr = to_list(key, v); }, \
        [](const RunConfig& c) { return list_str(c.expr); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      INT_FIELD("data.sequences", int, data.sequences),
      INT_FIELD("data.frames_per_sequence", int, data.frames_per_sequence),
      INT_FIELD("data.nodes", int, data.nodes),
      NUM_FIELD("data.density", data.density),
      NUM_FIELD("data.train_fraction", data.train_fraction),
      INT_FIELD("data.seed", std::uint64_t, data.seed),
      NUM_FIELD("data.min_length", data.min_length),
      NUM_FIELD("data.max_length", data.max_length),
      NUM_FIELD("data.min_radius", data.min_radius),
      NUM_FIELD("data.max_radius", data.max_radius),
      NUM_FIELD("data.min_bend", data.min_bend),
      NUM_FIELD("data.max_bend", data.max_bend),
      INT_FIELD("data.particles", int, data.particles),
      NUM_FIELD("data.voting_radius", data.voting_radius),
      Field{"model.preset",
            [](RunConfig& c, const std::string& v) {
              if (v != "desk" && v != "paper" && v != "toy")
                throw ConfigError(
                    "config: model.preset must be desk, paper, or toy");
              c.preset = v;
            },
            [](const RunConfig& c) { return c.preset; }},
      INT_FIELD("model.n_points", Index, n_points),
      NUM_FIELD("train.learning_rate", learning_rate),
      INT_FIELD("train.batch_size", Index, batch_size),
      INT_FIELD("train.epochs", int, epochs),
      NUM_FIELD("train.decay_ratio", decay_ratio),
      INT_FIELD("train.decay_interval", int, decay_interval),
      NUM_FIELD("train.weight_decay", weight_decay),
      INT_FIELD("train.seed", std::uint64_t, train_seed),
      NUM_FIELD("train.augment_jitter_mm", augment_jitter_mm),
      NUM_FIELD("train.augment_max_ratio", augment_max_ratio),
      NUM_FIELD("train.augment_rotation_deg", augment_rotation_deg),
      NUM_FIELD("vote.radius", voting_radius),
      INT_FIELD("vote.top_k", Index, top_k),
      NUM_FIELD("fusion.threshold", fusion.visibility_threshold),
      NUM_FIELD("fusion.lambda", fusion.lambda),
      NUM_FIELD("fusion.beta", fusion.beta),
      INT_FIELD("fusion.max_iterations", int, fusion.max_iterations),
      NUM_FIELD("fusion.tolerance", fusion.tolerance),
      INT_FIELD("fusion.min_visible", Index, fusion.min_visible),
      LIST_FIELD("eval.ratios", eval_ratios),
      LIST_FIELD("eval.jitters_mm", eval_jitters_mm),
      LIST_FIELD("eval.thresholds", eval_thresholds),
      NUM_FIELD("eval.fixed_ratio", eval_fixed_ratio),
      INT_FIELD("eval.max_frames", int, eval_max_frames),
      INT_FIELD("eval.seed", std::uint64_t, eval_seed),
  };
  return table;
}

#undef NUM_FIELD
#undef INT_FIELD
#undef LIST_FIELD

void apply(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.name) {
      f.set(cfg, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void apply_line(RunConfig& cfg, const std::string& line,
                const std::string& where) {
  const std::string stripped = trim(line.substr(0, line.find('#')));
  if (stripped.empty()) return;
  const auto eq = stripped.find('=');
  if (eq == std::string::npos)
    throw ConfigError("config: " + where + ": expected key=value, got '" +
                      stripped + "'");
  apply(cfg, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
}

}  // namespace

RunConfig parse_run_config(const std::string& text,
                           const std::vector<std::string>& overrides) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int n = 0;
  while (std::getline(ss, line)) apply_line(cfg, line, "line " + std::to_string(++n));
  for (const std::string& o : overrides) apply_line(cfg, o, "override");
  validate(cfg);
  return cfg;
}

RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_run_config(ss.str(), overrides);
}

std::string effective_config(const RunConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) {
    out += f.name;
    out += " = ";
    out += f.get(cfg);
    out += "\n";
  }
  return out;
}

void validate(const RunConfig& cfg) {
  synth::validate(cfg.data);
  fusion::validate(cfg.fusion);
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("config: " + msg);
  };
  require(cfg.n_points >= 32, "model.n_points must be at least 32");
  require(cfg.learning_rate > 0, "train.learning_rate must be positive");
  require(cfg.batch_size >= 1, "train.batch_size must be positive");
  require(cfg.epochs >= 1, "train.epochs must be positive");
  require(cfg.decay_ratio > 0 && cfg.decay_ratio <= 1,
          "train.decay_ratio must be in (0,1]");
  require(cfg.decay_interval >= 1, "train.decay_interval must be positive");
  require(cfg.weight_decay >= 0, "train.weight_decay must be non-negative");
  require(cfg.augment_jitter_mm >= 0,
          "train.augment_jitter_mm must be non-negative");
  require(cfg.augment_max_ratio >= 0 && cfg.augment_max_ratio <= 0.8,
          "train.augment_max_ratio must be in [0, 0.8]");
  require(cfg.voting_radius > 0, "vote.radius must be positive");
  require(cfg.top_k >= 1, "vote.top_k must be positive");
  for (double r : cfg.eval_ratios)
    require(r >= 0 && r <= 0.8, "eval.ratios entries must be in [0, 0.8]");
  for (double j : cfg.eval_jitters_mm)
    require(j >= 0, "eval.jitters_mm entries must be non-negative");
  for (double t : cfg.eval_thresholds)
    require(t > 0 && t < 1, "eval.thresholds entries must be in (0,1)");
  require(cfg.eval_fixed_ratio >= 0 && cfg.eval_fixed_ratio <= 0.8,
          "eval.fixed_ratio must be in [0, 0.8]");
  require(cfg.eval_max_frames >= 0, "eval.max_frames must be non-negative");
}

}  // namespace dloest::io
