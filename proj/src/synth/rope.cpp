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

#include "dloest/synth/rope.hpp"

#include <cmath>

namespace dloest::synth {

void validate(const RopeSpec& spec) {
  check(spec.length > 0, "rope length must be positive");
  check(spec.radius > 0, "rope radius must be positive");
  check(spec.particles >= 4, "rope needs at least 4 particles");
  check(spec.bend_stiffness >= 0 && spec.bend_stiffness <= 1,
        "bend stiffness must lie in [0,1]");
}

namespace {

constexpr double kWorkspace = 0.25;  // endpoint box half-extent, meters
// Endpoint pair distance band as fractions of rope length: slack enough to
// curve, never folded back into hairpins.
constexpr double kPinLo = 0.5;
constexpr double kPinHi = 0.9;

Vec3d random_point_in_box(Rng& rng, double half) {
  return Vec3d(rng.uniform(-half, half), rng.uniform(-half, half),
               rng.uniform(-half, half));
}

void clamp_pair(Vec3d& a, Vec3d& b, double length) {
  const Vec3d mid = 0.5 * (a + b);
  Vec3d d = b - a;
  double dist = d.norm();
  if (dist < 1e-9) {
    d = Vec3d(1, 0, 0);
    dist = 1.0;
  }
  const double target =
      std::min(std::max(dist, kPinLo * length), kPinHi * length);
  if (target != dist) {
    const Vec3d half = d * (0.5 * target / dist);
    a = mid - half;
    b = mid + half;
  }
}

// Closest distance between segments [p1,q1] and [p2,q2].
double segment_distance(const Vec3d& p1, const Vec3d& q1, const Vec3d& p2,
                        const Vec3d& q2) {
  const Vec3d d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0, t = 0;
  if (a > 1e-18 || e > 1e-18) {
    if (a <= 1e-18) {
      t = std::clamp(f / e, 0.0, 1.0);
    } else {
      const double c = d1.dot(r);
      if (e <= 1e-18) {
        s = std::clamp(-c / a, 0.0, 1.0);
      } else {
        const double b = d1.dot(d2), denom = a * e - b * b;
        if (denom > 1e-18) s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
        t = (b * s + f) / e;
        if (t < 0.0) {
          t = 0.0;
          s = std::clamp(-c / a, 0.0, 1.0);
        } else if (t > 1.0) {
          t = 1.0;
          s = std::clamp((b - c) / a, 0.0, 1.0);
        }
      }
    }
  }
  return (p1 + d1 * s - (p2 + d2 * t)).norm();
}

struct PinTrack {
  Vec3d pos;
  Vec3d target;
};

double max_spacing_error(const Matd& x, double seg) {
  double worst = 0;
  for (Index i = 0; i + 1 < x.rows(); ++i) {
    const double d = (x.row(i + 1) - x.row(i)).norm();
    worst = std::max(worst, std::abs(d - seg) / seg);
  }
  return worst;
}

void project_pair(Matd& x, Index a, Index b, double rest, double k,
                  bool pin_a, bool pin_b) {
  Eigen::RowVector3d d = x.row(b) - x.row(a);
  const double dist = d.norm();
  if (dist < 1e-12) return;
  const double wa = pin_a ? 0.0 : 1.0;
  const double wb = pin_b ? 0.0 : 1.0;
  const double wsum = wa + wb;
  if (wsum == 0.0) return;
  const Eigen::RowVector3d corr = d * (k * (dist - rest) / (dist * wsum));
  x.row(a) += wa * corr;
  x.row(b) -= wb * corr;
}

// One-sided separation: engages only when the pair is closer than min_dist,
// so it blocks folds without fighting legitimate curvature.
void project_pair_min(Matd& x, Index a, Index b, double min_dist, double k,
                      bool pin_a, bool pin_b) {
  const double dist = (x.row(b) - x.row(a)).norm();
  if (dist >= min_dist) return;
  project_pair(x, a, b, min_dist, k, pin_a, pin_b);
}

// Follow-the-leader sweeps: snap each free particle to exact spacing from its
// predecessor. Transported error lands near a pin, where the symmetric
// sweeps that follow can absorb it; much faster than diffusion alone.
void ftl_forward(Matd& x, double seg) {
  for (Index i = 1; i + 1 < x.rows(); ++i) {
    Eigen::RowVector3d d = x.row(i) - x.row(i - 1);
    const double n = d.norm();
    if (n < 1e-12) continue;
    x.row(i) = x.row(i - 1) + d * (seg / n);
  }
}

void ftl_backward(Matd& x, double seg) {
  for (Index i = x.rows() - 2; i >= 1; --i) {
    Eigen::RowVector3d d = x.row(i) - x.row(i + 1);
    const double n = d.norm();
    if (n < 1e-12) continue;
    x.row(i) = x.row(i + 1) + d * (seg / n);
  }
}

// Curvature equalization: pull every chord at the given range toward the
// rope-wide mean, redistributing bend along the rope instead of removing it
// (plain smoothing expels curvature toward the pins, where it piles up).
// Range 2 equalizes turn magnitudes; range 4 also punishes zig-zags, whose
// short chords it cannot tell apart from genuine arcs. Near-constant
// curvature is what keeps arclength-resampled chords uniform.
void equalize_bend(Matd& x, double k, Index range) {
  const Index p = x.rows();
  double mean = 0;
  for (Index i = 0; i + range < p; ++i)
    mean += (x.row(i + range) - x.row(i)).norm();
  mean /= static_cast<double>(p - range);
  for (Index i = 0; i + range < p; ++i)
    project_pair(x, i, i + range, mean, k, i == 0, i + range + 1 == p);
}

void relax(Matd& x, double seg, double k_bend_raw, int iterations) {
  const Index p = x.rows();
  // Per-iteration stiffness so the summed effect matches the raw coefficient.
  const double k_bend =
      1.0 - std::pow(1.0 - k_bend_raw, 1.0 / std::max(1, iterations));
  // Minimum-chord guards: chords at these ranges may not drop below the
  // given fraction of their arclength. They bound the local bend radius from
  // below, which keeps curvature gentle at the node-resampling scale.
  const double k_fold = 1.0 - std::pow(0.1, 1.0 / std::max(1, iterations));
  const struct {
    Index range;
    double min_ratio;
  } folds[] = {{4, 0.985}, {8, 0.96}, {16, 0.90}};
  // Stretch runs last within each iteration so spacing, the hard constraint,
  // is the best-satisfied one when the sweep ends.
  for (int it = 0; it < iterations; ++it) {
    equalize_bend(x, 0.3, 2);
    equalize_bend(x, 0.1, 4);
    const bool fwd = (it % 2 == 0);
    if (fwd) {
      for (const auto& fd : folds)
        for (Index i = 0; i + fd.range < p; ++i)
          project_pair_min(x, i, i + fd.range, fd.range * seg * fd.min_ratio,
                           k_fold, i == 0, i + fd.range + 1 == p);
      for (Index i = 0; i + 2 < p; ++i)
        project_pair(x, i, i + 2, 2.0 * seg, k_bend, i == 0, i + 3 == p);
      for (Index i = 0; i + 1 < p; ++i)
        project_pair(x, i, i + 1, seg, 1.0, i == 0, i + 2 == p);
    } else {
      for (const auto& fd : folds)
        for (Index i = p - 1 - fd.range; i >= 0; --i)
          project_pair_min(x, i, i + fd.range, fd.range * seg * fd.min_ratio,
                           k_fold, i == 0, i + fd.range + 1 == p);
      for (Index i = p - 3; i >= 0; --i)
        project_pair(x, i, i + 2, 2.0 * seg, k_bend, i == 0, i + 3 == p);
      for (Index i = p - 2; i >= 0; --i)
        project_pair(x, i, i + 1, seg, 1.0, i == 0, i + 2 == p);
    }
  }
  // Spacing is the hard constraint; polish it alone so soft-constraint
  // residue cannot push it past tolerance.
  for (int it = 0; it < 3; ++it) {
    ftl_forward(x, seg);
    ftl_backward(x, seg);
    for (Index i = 0; i + 1 < p; ++i)
      project_pair(x, i, i + 1, seg, 1.0, i == 0, i + 2 == p);
    for (Index i = p - 2; i >= 0; --i)
      project_pair(x, i, i + 1, seg, 1.0, i == 0, i + 2 == p);
  }
  // The follow-the-leader sweeps leave direction noise near the pins; one
  // equalization plus symmetric spacing sweeps clears it without upsetting
  // the tolerance.
  equalize_bend(x, 0.3, 2);
  equalize_bend(x, 0.1, 4);
  for (Index i = 0; i + 1 < p; ++i)
    project_pair(x, i, i + 1, seg, 1.0, i == 0, i + 2 == p);
  for (Index i = p - 2; i >= 0; --i)
    project_pair(x, i, i + 1, seg, 1.0, i == 0, i + 2 == p);
}

}  // namespace

SimResult simulate_sequence(const RopeSpec& spec, const SimParams& params,
                            std::uint64_t seed, int frames) {
  validate(spec);
  check(frames >= 1, "need at least one frame");
  Rng rng(mix_seed(seed, 0x726f7065));

  const Index p = spec.particles;
  const double seg = spec.length / static_cast<double>(p - 1);

  PinTrack head, tail;
  head.pos = random_point_in_box(rng, kWorkspace * 0.5);
  tail.pos = head.pos + Vec3d(params.init_span * spec.length, 0, 0);
  head.target = head.pos;
  tail.target = tail.pos;

  Matd x(p, 3);
  for (Index i = 0; i < p; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(p - 1);
    x.row(i) = ((1.0 - t) * head.pos + t * tail.pos).transpose();
  }
  Matd v = Matd::Zero(p, 3);

  // Fresh targets are drawn jointly; besides the endpoint pair-distance clamp
  // the straight transit corridors must stay apart, otherwise crossing paths
  // squeeze the rope into folds the relaxation cannot track.
  auto retarget = [&]() {
    for (int tries = 0; tries < 64; ++tries) {
      Vec3d a = random_point_in_box(rng, kWorkspace);
      Vec3d b = random_point_in_box(rng, kWorkspace);
      clamp_pair(a, b, spec.length);
      if (segment_distance(head.pos, a, tail.pos, b) >=
          kPinLo * spec.length) {
        head.target = a;
        tail.target = b;
        return;
      }
    }
    head.target = head.pos;  // hold position; the next arrival redraws
    tail.target = tail.pos;
  };

  const double step_cap = 0.015 * spec.length;  // per-frame pin travel limit
  int frames_since_retarget = 0;

  auto advance_pins = [&]() {
    if (!params.move_endpoints) return;
    bool arrived = false;
    for (PinTrack* pin : {&head, &tail}) {
      const Vec3d d = pin->target - pin->pos;
      const double n = d.norm();
      if (n < 0.02 * spec.length) arrived = true;
      if (n > 1e-12) pin->pos += d * (std::min(step_cap, n) / n);
    }
    // The corridor check covers on-segment travel; clamping the realized
    // pair keeps the invariant through clamp-induced detours as well.
    clamp_pair(head.pos, tail.pos, spec.length);
    ++frames_since_retarget;
    if (arrived || frames_since_retarget > 80) {
      retarget();
      frames_since_retarget = 0;
    }
  };

  auto simulate_frame = [&](int iterations) {
    const double h = params.dt / params.substeps;
    for (int s = 0; s < params.substeps; ++s) {
      v.col(1).array() -= params.gravity * h;
      v *= (1.0 - params.damping);
      Matd x_new = x + h * v;
      // Pins travel linearly across the substeps of one frame.
      const double f = static_cast<double>(s + 1) / params.substeps;
      x_new.row(0) = (x.row(0) * (1.0 - f)).eval() + f * head.pos.transpose();
      x_new.row(p - 1) =
          (x.row(p - 1) * (1.0 - f)).eval() + f * tail.pos.transpose();
      relax(x_new, seg, spec.bend_stiffness, iterations);
      v = (x_new - x) / h;
      x = x_new;
    }
  };

  SimResult result;
  result.frames.reserve(frames);

  retarget();
  for (int w = 0; w < params.warmup_frames; ++w) {
    advance_pins();
    simulate_frame(params.iterations);
  }

  for (int f = 0; f < frames; ++f) {
    const Matd x_backup = x;
    const Matd v_backup = v;
    const Vec3d head_backup = head.pos, tail_backup = tail.pos;
    bool accepted = false;
    for (int attempt = 0; attempt < params.max_attempts && !accepted;
         ++attempt) {
      advance_pins();
      simulate_frame(params.iterations << std::min(attempt, 3));
      if (max_spacing_error(x, seg) <= params.spacing_tol) {
        accepted = true;
      } else {
        x = x_backup;
        v = v_backup;
        head.pos = head_backup;
        tail.pos = tail_backup;
        retarget();
        ++result.rejected;
      }
    }
    check(accepted, "rope relaxation failed to converge after retries");
    // Record a settled copy: with the pins held, a few extra relaxation
    // passes drain the drag wake that trails a moving endpoint. The live
    // state keeps its momentum so the motion itself stays lively.
    Matd x_rec = x;
    for (int s = 0; s < 8; ++s)
      relax(x_rec, seg, spec.bend_stiffness, params.iterations);
    result.frames.push_back(std::move(x_rec));
  }
  return result;
}

}  // namespace dloest::synth
