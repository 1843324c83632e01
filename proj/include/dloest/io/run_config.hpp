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

#pragma once

#include <string>
#include <vector>

#include "dloest/common.hpp"
#include "dloest/fusion/cpd.hpp"
#include "dloest/synth/dataset.hpp"

namespace dloest::io {

struct ConfigError : ContractViolation {
  using ContractViolation::ContractViolation;
};

// Flat key=value experiment configuration. One struct drives every
// subcommand so a single file (plus --set overrides) pins a whole run; the
// effective text and its hash are echoed into manifests for provenance.
struct RunConfig {
  synth::DatasetConfig data;

  std::string preset = "desk";  // desk | paper | toy
  Index n_points = 256;

  double learning_rate = 0.01;
  Index batch_size = 32;
  int epochs = 60;
  double decay_ratio = 0.5;
  int decay_interval = 6;
  double weight_decay = 0.0005;
  std::uint64_t train_seed = 3;
  double augment_jitter_mm = 1.0;
  double augment_max_ratio = 0.4;
  double augment_rotation_deg = 15.0;

  double voting_radius = 0.02;
  Index top_k = 64;

  fusion::FusionConfig fusion;

  std::vector<double> eval_ratios = {0.0, 0.1, 0.2, 0.4};
  std::vector<double> eval_jitters_mm = {0.0, 1.0, 2.0, 4.0};
  std::vector<double> eval_thresholds = {0.05, 0.5, 0.95};
  double eval_fixed_ratio = 0.2;
  int eval_max_frames = 0;
  std::uint64_t eval_seed = 7;
};

// Parses `key = value` lines ('#' comments); unknown keys are rejected by
// name. Overrides use the same "key=value" syntax.
RunConfig parse_run_config(const std::string& text,
                           const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides);

// Canonical echo of every key, suitable for re-parsing and hashing.
std::string effective_config(const RunConfig& cfg);

void validate(const RunConfig& cfg);

}  // namespace dloest::io
