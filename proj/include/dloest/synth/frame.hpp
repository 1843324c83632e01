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
#include <vector>

#include "dloest/common.hpp"
#include "dloest/synth/rope.hpp"

namespace dloest::synth {

// M points at equal arclength intervals along the piecewise-linear
// centerline, endpoints included.
Matd resample_nodes(const Matd& centerline, int m);

// Samples the half-cylinder surface of radius spec.radius facing view_dir,
// uniform in arclength, simulating a single-view depth capture.
// density is points per meter of centerline.
Matd render_cloud(const Matd& centerline, const RopeSpec& spec, double density,
                  std::uint64_t seed,
                  const Vec3d& view_dir = Vec3d(0, 0, 1));

// Normalized arclength parameter in [0,1] of each point's nearest location
// on the polyline.
Eigen::VectorXd arclength_params(const Matd& points, const Matd& polyline);

struct AugmentConfig {
  double jitter_sigma = 0.0;    // meters
  double rotation_deg = 0.0;    // per-axis angle range; 0 disables
  double occlusion_ratio = 0.0; // fraction of arclength removed, [0, 0.8]
  int min_points = 32;
  int max_attempts = 16;        // window re-draws before giving up
};

struct AugmentResult {
  Matd cloud;
  Matd nodes;    // ground truth, transformed jointly with the cloud
  bool usable = true;
};

// Occlusion removes points whose nearest arclength falls inside 1-3
// contiguous windows totaling the requested ratio; then i.i.d. Gaussian
// jitter; then a rotation about each axis in turn, angles drawn uniformly
// from ±rotation_deg, applied jointly to cloud and nodes.
AugmentResult augment(const Matd& cloud, const Matd& nodes,
                      const AugmentConfig& cfg, std::uint64_t seed);

// Node j is visible iff some point lies strictly within r of it.
std::vector<std::uint8_t> occlusion_mask(const Matd& cloud, const Matd& nodes,
                                         double r);

// Greedy farthest-point subset of size n (seeded start). Inputs smaller
// than n are padded by resampling with replacement.
Matd fps_sample(const Matd& cloud, int n, std::uint64_t seed);

// Translates the cloud centroid to the origin; the same shift applies to
// any node sequence sharing the frame. Scale is fixed at 1 meter.
Vec3d cloud_centroid(const Matd& cloud);

}  // namespace dloest::synth
