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

#include <iosfwd>
#include <string>
#include <vector>

#include "dloest/heads/model.hpp"
#include "dloest/numkit/adam.hpp"
#include "dloest/numkit/params.hpp"

namespace dloest::train {

struct TrainerConfig {
  heads::ModelConfig model;
  Index n_points = 256;

  double learning_rate = 0.01;
  Index batch_size = 32;
  int epochs = 60;
  double decay_ratio = 0.5;  // lr multiplier applied every decay_interval epochs
  int decay_interval = 6;
  double weight_decay = 0.0005;
  std::uint64_t seed = 3;

  double augment_jitter_mm = 1.0;
  double augment_max_ratio = 0.4;  // occlusion ratio drawn uniformly in [0, this]
  double augment_rotation_deg = 15.0;  // per-axis range; 0 disables

  Index top_k = 64;  // for the validation voting error; clamped to n_points/4

  std::string resume;  // path to a previous state file; empty starts fresh
};

void validate(const TrainerConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double l_reg = 0;       // epoch means of the chosen-orientation losses
  double l_vot = 0;
  double val_reg_mm = 0;  // aligned all-node errors on un-augmented val frames
  double val_vot_mm = 0;
  double lr = 0;
  bool best = false;      // this epoch improved the validation voting error
};

struct TrainResult {
  int epochs_run = 0;
  int best_epoch = -1;
  double best_val_vot_mm = 0;
  std::string best_checkpoint;  // parameters + model meta
  std::string state_checkpoint; // parameters + optimizer state, for resume
  std::vector<EpochStats> history;
};

// Trains on the given frame files, writing best.ckpt, state.ckpt, and
// train_log.jsonl under out_dir. config_echo lands in the log header line.
// progress (optional) receives one human-readable line per epoch.
TrainResult train_model(const TrainerConfig& cfg,
                        const std::vector<std::string>& train_paths,
                        const std::vector<std::string>& val_paths,
                        const std::string& out_dir,
                        const std::string& config_echo,
                        std::ostream* progress = nullptr);

}  // namespace dloest::train
