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

namespace dloest::synth {

// A rope is a chain of P particles; state is the P x 3 position matrix.

struct RopeSpec {
  double length = 0.5;          // meters
  double radius = 0.005;        // surface cylinder radius, meters
  double bend_stiffness = 0.5;  // in [0,1]
  int particles = 64;
};

struct SimParams {
  double dt = 1.0 / 30.0;
  int substeps = 12;
  int iterations = 24;       // constraint sweeps per substep
  double gravity = 4.0;      // along -y; 0 disables (soft pull: stiff-rope regime)
  double damping = 0.1;      // velocity fraction removed per substep
  double spacing_tol = 0.02; // max relative spacing error accepted per frame
  int max_attempts = 8;      // rejection retries per frame
  int warmup_frames = 30;    // simulated but not recorded
  bool move_endpoints = true;
  double init_span = 0.8;    // initial endpoint distance as a fraction of L
};

struct SimResult {
  std::vector<Matd> frames;  // each P x 3
  int rejected = 0;          // frames that needed resampling
};

void validate(const RopeSpec& spec);

// Relaxes a particle chain with distance constraints between neighbors and
// second-neighbor constraints for bending resistance, while both endpoints
// follow smooth random trajectories inside a desk-sized workspace.
// Frames whose spacing error stays above spacing_tol after retries with
// doubled iteration counts are rejected and resampled with fresh targets.
SimResult simulate_sequence(const RopeSpec& spec, const SimParams& params,
                            std::uint64_t seed, int frames);

}  // namespace dloest::synth
