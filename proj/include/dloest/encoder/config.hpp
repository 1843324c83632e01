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

#include <vector>

#include "dloest/common.hpp"

namespace dloest::encoder {

// One set-abstraction level: farthest-point centroids, ball-query grouping,
// and a shared per-point MLP pooled by max over each group.
struct SALevel {
  Index centroids = 0;
  double radius = 0.0;
  Index group = 0;
  std::vector<Index> mlp;  // layer output widths
};

// Propagation widths are listed in application order: the first entry lands
// on the second-coarsest level, the last entry on the input cloud, so
// `fp.back()` is the per-point output width C_out.
struct EncoderConfig {
  std::vector<SALevel> sa;
  std::vector<Index> fp;

  Index out_width() const { return fp.empty() ? 0 : fp.back(); }
};

inline void validate(const EncoderConfig& cfg, Index n_points) {
  check(!cfg.sa.empty(), "encoder config has no abstraction levels");
  check(cfg.fp.size() == cfg.sa.size(),
        "encoder config needs one propagation width per abstraction level");
  Index prev = n_points;
  for (std::size_t l = 0; l < cfg.sa.size(); ++l) {
    const SALevel& s = cfg.sa[l];
    check(s.centroids >= 1 && s.centroids <= prev,
          "abstraction level " + std::to_string(l) +
              ": centroid counts must decrease and fit the cloud");
    if (l > 0) {
      check(s.centroids < cfg.sa[l - 1].centroids,
            "abstraction level " + std::to_string(l) +
                ": centroid counts must be strictly decreasing");
    }
    check(s.radius > 0, "abstraction level " + std::to_string(l) +
                            ": radius must be positive");
    check(s.group >= 1, "abstraction level " + std::to_string(l) +
                            ": group size must be positive");
    check(!s.mlp.empty(), "abstraction level " + std::to_string(l) +
                              ": needs at least one MLP layer");
    for (Index w : s.mlp)
      check(w >= 1, "abstraction level " + std::to_string(l) +
                        ": MLP widths must be positive");
    prev = s.centroids;
  }
  check(prev >= 3, "coarsest level needs at least 3 centroids for "
                   "3-neighbor interpolation");
  for (Index w : cfg.fp)
    check(w >= 1, "propagation widths must be positive");
}

// Sized for CPU training on a desk: tens of minutes per run at N=256. The
// finest level carries enough width to resolve point-to-node distances at
// millimeter scale, which the voting heatmap's amplitude depends on.
inline EncoderConfig desk_encoder() {
  EncoderConfig cfg;
  cfg.sa = {{256, 0.05, 16, {32, 32}},
            {64, 0.10, 16, {64, 64}},
            {16, 0.20, 16, {128, 128}},
            {8, 0.40, 16, {192, 192}}};
  cfg.fp = {160, 160, 160, 192};
  return cfg;
}

// Full-scale variant at N=1024. Radii, group sizes, and abstraction widths
// are our choices; centroid counts and propagation widths follow the
// published architecture.
inline EncoderConfig paper_encoder() {
  EncoderConfig cfg;
  cfg.sa = {{1024, 0.05, 32, {64, 64}},
            {256, 0.10, 32, {128, 128}},
            {64, 0.20, 32, {256, 256}},
            {16, 0.40, 32, {512, 512}}};
  cfg.fp = {256, 256, 512, 1024};
  return cfg;
}

// Small enough for finite-difference gradient checks.
inline EncoderConfig toy_encoder() {
  EncoderConfig cfg;
  cfg.sa = {{6, 0.5, 3, {4}}, {3, 1.0, 3, {6}}};
  cfg.fp = {6, 8};
  return cfg;
}

}  // namespace dloest::encoder
