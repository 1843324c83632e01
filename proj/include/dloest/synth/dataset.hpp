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

#include <cstdint>
#include <string>
#include <vector>

#include "dloest/common.hpp"
#include "dloest/synth/rope.hpp"

namespace dloest::synth {

// On-disk frame record: magic, version, point and node counts, 32-bit float
// coordinates (cloud then nodes, row-major), per-node occlusion bytes, and a
// JSON metadata blob. Little-endian throughout.
inline constexpr char kFrameMagic[8] = {'D', 'L', 'O', 'F', 'R', 'A', 'M', 'E'};
inline constexpr std::uint32_t kFrameVersion = 1;

struct FrameRecord {
  Matf cloud;                          // raw rendered points, N x 3
  Matf nodes;                          // ground-truth nodes, M x 3
  std::vector<std::uint8_t> occluded;  // one byte per node
  std::string meta_json;
};

void write_frame(const std::string& path, const FrameRecord& rec);
FrameRecord read_frame(const std::string& path);

struct DatasetConfig {
  int sequences = 100;
  int frames_per_sequence = 25;
  int nodes = 16;            // M
  double density = 2048.0;   // rendered points per meter of centerline
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
  double min_length = 0.4, max_length = 0.6;    // meters
  double min_radius = 0.004, max_radius = 0.006;
  double min_bend = 0.2, max_bend = 0.9;
  int particles = 64;
  double voting_radius = 0.02;  // for the stored occlusion masks
};

void validate(const DatasetConfig& cfg);

struct DatasetSummary {
  int train_frames = 0;
  int val_frames = 0;
  int rejected_frames = 0;
  std::string manifest_path;
};

// Writes train/ and val/ splits (split at the sequence level), an index file
// per split, and a manifest with seeds and the config hash. config_text is
// echoed verbatim into the manifest.
DatasetSummary gen_dataset(const DatasetConfig& cfg, const std::string& out_dir,
                           const std::string& config_text);

// Frame paths of one split, in index order.
std::vector<std::string> read_index(const std::string& split_dir);

}  // namespace dloest::synth
