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

#include "dloest/synth/frame.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dloest/geom.hpp"

namespace dloest::synth {

namespace {

Eigen::VectorXd cumulative_lengths(const Matd& line) {
  Eigen::VectorXd cum(line.rows());
  cum(0) = 0;
  for (Index i = 1; i < line.rows(); ++i) {
    cum(i) = cum(i - 1) + (line.row(i) - line.row(i - 1)).norm();
  }
  return cum;
}

// Splits `total` into `parts` nonnegative pieces via sorted uniform cuts.
std::vector<double> random_split(double total, int parts, Rng& rng) {
  std::vector<double> cuts(parts - 1);
  for (auto& c : cuts) c = rng.uniform(0.0, total);
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> out(parts);
  double prev = 0;
  for (int i = 0; i + 1 < parts; ++i) {
    out[i] = cuts[i] - prev;
    prev = cuts[i];
  }
  out[parts - 1] = total - prev;
  return out;
}

}  // namespace

Matd resample_nodes(const Matd& centerline, int m) {
  check(m >= 2, "need at least 2 nodes");
  check(centerline.rows() >= 2 && centerline.cols() == 3,
        "centerline must be P x 3 with P >= 2");
  const Eigen::VectorXd cum = cumulative_lengths(centerline);
  const double total = cum(centerline.rows() - 1);
  check(total > 1e-12, "degenerate zero-length centerline");

  Matd nodes(m, 3);
  Index seg = 0;
  for (int k = 0; k < m; ++k) {
    const double s = total * static_cast<double>(k) / (m - 1);
    while (seg + 2 < centerline.rows() && cum(seg + 1) < s) ++seg;
    const double len = cum(seg + 1) - cum(seg);
    const double t = len > 1e-15 ? (s - cum(seg)) / len : 0.0;
    nodes.row(k) = (1.0 - t) * centerline.row(seg) + t * centerline.row(seg + 1);
  }
  return nodes;
}

Matd render_cloud(const Matd& centerline, const RopeSpec& spec, double density,
                  std::uint64_t seed, const Vec3d& view_dir) {
  check(density > 0, "density must be positive");
  check(centerline.rows() >= 2, "centerline must have at least 2 points");
  Rng rng(mix_seed(seed, 0x72656e64));
  const Eigen::VectorXd cum = cumulative_lengths(centerline);
  const double total = cum(centerline.rows() - 1);
  check(total > 1e-12, "degenerate zero-length centerline");
  const Vec3d d = view_dir.normalized();

  const int count = std::max<int>(1, static_cast<int>(std::llround(density * total)));
  Matd cloud(count, 3);
  for (int i = 0; i < count; ++i) {
    const double s = rng.uniform(0.0, total);
    Index seg = 0;
    while (seg + 2 < centerline.rows() && cum(seg + 1) < s) ++seg;
    const double len = cum(seg + 1) - cum(seg);
    const double t = len > 1e-15 ? (s - cum(seg)) / len : 0.0;
    const Vec3d c = ((1.0 - t) * centerline.row(seg) +
                     t * centerline.row(seg + 1)).transpose();
    Vec3d tangent =
        (centerline.row(seg + 1) - centerline.row(seg)).transpose();
    tangent.normalize();

    Vec3d e1 = d - d.dot(tangent) * tangent;
    double theta;
    if (e1.norm() < 1e-9) {
      // Segment parallel to the view axis: full silhouette circle.
      e1 = tangent.unitOrthogonal();
      theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
    } else {
      e1.normalize();
      theta = rng.uniform(-std::numbers::pi / 2, std::numbers::pi / 2);
    }
    const Vec3d e2 = tangent.cross(e1);
    cloud.row(i) =
        (c + spec.radius * (std::cos(theta) * e1 + std::sin(theta) * e2))
            .transpose();
  }
  return cloud;
}

Eigen::VectorXd arclength_params(const Matd& points, const Matd& polyline) {
  check(polyline.rows() >= 2, "polyline must have at least 2 points");
  const Eigen::VectorXd cum = cumulative_lengths(polyline);
  const double total = cum(polyline.rows() - 1);
  check(total > 1e-12, "degenerate zero-length polyline");

  Eigen::VectorXd s(points.rows());
  for (Index i = 0; i < points.rows(); ++i) {
    double best_d2 = std::numeric_limits<double>::max();
    double best_s = 0;
    for (Index k = 0; k + 1 < polyline.rows(); ++k) {
      const Eigen::RowVector3d a = polyline.row(k);
      const Eigen::RowVector3d ab = polyline.row(k + 1) - a;
      const double len2 = ab.squaredNorm();
      double t = len2 > 1e-30 ? (points.row(i) - a).dot(ab) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double d2 = (points.row(i) - (a + t * ab)).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best_s = cum(k) + t * std::sqrt(len2);
      }
    }
    s(i) = best_s / total;
  }
  return s;
}

AugmentResult augment(const Matd& cloud, const Matd& nodes,
                      const AugmentConfig& cfg, std::uint64_t seed) {
  check(cfg.occlusion_ratio >= 0 && cfg.occlusion_ratio <= 0.8,
        "occlusion ratio must lie in [0, 0.8]");
  check(cfg.jitter_sigma >= 0, "jitter sigma must be nonnegative");
  Rng rng(mix_seed(seed, 0x6175676d));

  AugmentResult res;
  res.cloud = cloud;
  res.nodes = nodes;

  if (cfg.occlusion_ratio > 0) {
    const Eigen::VectorXd s = arclength_params(cloud, nodes);
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
      const int windows = 1 + static_cast<int>(rng.below(3));
      const auto lens = random_split(cfg.occlusion_ratio, windows, rng);
      const auto gaps = random_split(1.0 - cfg.occlusion_ratio, windows + 1, rng);
      std::vector<std::pair<double, double>> spans(windows);
      double pos = 0;
      for (int w = 0; w < windows; ++w) {
        pos += gaps[w];
        spans[w] = {pos, pos + lens[w]};
        pos += lens[w];
      }
      std::vector<int> keep;
      for (Index i = 0; i < cloud.rows(); ++i) {
        bool inside = false;
        for (const auto& [lo, hi] : spans) {
          if (s(i) >= lo && s(i) < hi) {
            inside = true;
            break;
          }
        }
        if (!inside) keep.push_back(static_cast<int>(i));
      }
      if (static_cast<int>(keep.size()) >= cfg.min_points) {
        Matd kept(static_cast<Index>(keep.size()), 3);
        for (std::size_t k = 0; k < keep.size(); ++k) {
          kept.row(static_cast<Index>(k)) = cloud.row(keep[k]);
        }
        res.cloud = std::move(kept);
        placed = true;
      }
    }
    if (!placed) {
      res.usable = false;
      return res;
    }
  }

  if (cfg.jitter_sigma > 0) {
    for (Index i = 0; i < res.cloud.rows(); ++i) {
      res.cloud.row(i) += (cfg.jitter_sigma * rng.gaussian3()).transpose();
    }
  }

  if (cfg.rotation_deg > 0) {
    const double lim = cfg.rotation_deg * std::numbers::pi / 180.0;
    const double az = rng.uniform(-lim, lim);
    const double ay = rng.uniform(-lim, lim);
    const double ax = rng.uniform(-lim, lim);
    const Eigen::Matrix3d rot =
        (Eigen::AngleAxisd(az, Eigen::Vector3d::UnitZ()) *
         Eigen::AngleAxisd(ay, Eigen::Vector3d::UnitY()) *
         Eigen::AngleAxisd(ax, Eigen::Vector3d::UnitX()))
            .toRotationMatrix();
    res.cloud = res.cloud * rot.transpose();
    res.nodes = res.nodes * rot.transpose();
  }
  return res;
}

std::vector<std::uint8_t> occlusion_mask(const Matd& cloud, const Matd& nodes,
                                         double r) {
  check(r > 0, "radius must be positive");
  std::vector<std::uint8_t> occluded(nodes.rows(), 1);
  for (Index j = 0; j < nodes.rows(); ++j) {
    for (Index i = 0; i < cloud.rows(); ++i) {
      if ((cloud.row(i) - nodes.row(j)).norm() < r) {
        occluded[j] = 0;
        break;
      }
    }
  }
  return occluded;
}

Matd fps_sample(const Matd& cloud, int n, std::uint64_t seed) {
  check(cloud.rows() > 0, "fps_sample: empty cloud");
  check(n >= 1, "fps_sample: sample count must be positive");
  Rng rng(mix_seed(seed, 0x667073));
  const Index rows = cloud.rows();
  const int base = static_cast<int>(std::min<Index>(n, rows));
  auto idx = geom::fps_indices(cloud, base, rng.below(rows));
  while (static_cast<int>(idx.size()) < n) {
    idx.push_back(static_cast<int>(rng.below(rows)));
  }
  Matd out(n, 3);
  for (int i = 0; i < n; ++i) out.row(i) = cloud.row(idx[i]);
  return out;
}

Vec3d cloud_centroid(const Matd& cloud) {
  check(cloud.rows() > 0, "centroid of empty cloud");
  return cloud.colwise().mean().transpose();
}

}  // namespace dloest::synth
