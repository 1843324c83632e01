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

#include <optional>
#include <string>
#include <vector>

#include "dloest/eval/metrics.hpp"
#include "dloest/fusion/cpd.hpp"
#include "dloest/heads/model.hpp"

// Experiment harness: run the three methods (regression, voting, fusion)
// over a frame list while sweeping occlusion ratio, jitter, or the fusion
// visibility threshold. Emits per-frame JSON-lines and an aggregate CSV.

namespace dloest::eval {

struct SweepConfig {
  std::vector<double> ratios = {0.0, 0.1, 0.2, 0.4};
  std::vector<double> jitters_mm = {0.0, 1.0, 2.0, 4.0};
  std::vector<double> thresholds = {0.05, 0.5, 0.95};
  double fixed_ratio = 0.2;   // occlusion applied during noise/threshold sweeps
  Index n_points = 256;
  Index top_k = 64;           // clamped to n_points/4
  double voting_radius = 0.02;
  fusion::FusionConfig fusion;
  std::uint64_t seed = 7;
  int max_frames = 0;         // 0 = all frames
};

struct MethodAggregate {
  std::string method;   // regression | voting | fusion
  double setting = 0;   // swept value: ratio, jitter (mm), or threshold
  int frames = 0;
  double err_all = 0;   // meters, mean of per-frame means
  std::optional<double> err_unoccluded;
  std::optional<double> err_occluded;
  double uniformity = 0;
};

struct SweepResult {
  std::string swept;  // "ratio" | "jitter_mm" | "threshold"
  std::vector<MethodAggregate> table;
  int skipped_frames = 0;
};

// Occlusion ratios from cfg.ratios. jsonl_path/csv_path may be empty to skip
// writing; outputs are byte-deterministic for fixed inputs.
SweepResult occlusion_sweep(const heads::ModelConfig& model,
                            const numkit::ParamStore<float>& params,
                            const std::vector<std::string>& frame_paths,
                            const SweepConfig& cfg,
                            const std::string& jsonl_path,
                            const std::string& csv_path);

// Gaussian jitter sweep (cfg.jitters_mm) at cfg.fixed_ratio occlusion.
SweepResult noise_sweep(const heads::ModelConfig& model,
                        const numkit::ParamStore<float>& params,
                        const std::vector<std::string>& frame_paths,
                        const SweepConfig& cfg, const std::string& jsonl_path,
                        const std::string& csv_path);

// Fusion visibility-threshold sweep (cfg.thresholds) at cfg.fixed_ratio;
// only the fusion rows vary, but all methods are reported.
SweepResult threshold_sweep(const heads::ModelConfig& model,
                            const numkit::ParamStore<float>& params,
                            const std::vector<std::string>& frame_paths,
                            const SweepConfig& cfg,
                            const std::string& jsonl_path,
                            const std::string& csv_path);

void write_csv(const std::string& path, const SweepResult& result);

}  // namespace dloest::eval
