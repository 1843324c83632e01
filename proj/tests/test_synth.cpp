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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dloest/geom.hpp"
#include "dloest/synth/dataset.hpp"
#include "dloest/synth/frame.hpp"
#include "dloest/synth/rope.hpp"

using namespace dloest;
using namespace dloest::synth;

namespace {

double arclength(const Matd& line) {
  double total = 0;
  for (Index i = 1; i < line.rows(); ++i) {
    total += (line.row(i) - line.row(i - 1)).norm();
  }
  return total;
}

double point_to_segment(const Eigen::RowVector3d& p, const Eigen::RowVector3d& a,
                        const Eigen::RowVector3d& b) {
  const Eigen::RowVector3d ab = b - a;
  const double t =
      std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double point_to_polyline(const Eigen::RowVector3d& p, const Matd& line) {
  double best = std::numeric_limits<double>::max();
  for (Index k = 0; k + 1 < line.rows(); ++k) {
    best = std::min(best, point_to_segment(p, line.row(k), line.row(k + 1)));
  }
  return best;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("taut straight rope stays straight without gravity") {
  RopeSpec spec;
  spec.length = 0.5;
  SimParams params;
  params.gravity = 0;
  params.move_endpoints = false;
  params.init_span = 1.0;
  const auto result = simulate_sequence(spec, params, 3, 5);
  for (const Matd& x : result.frames) {
    const Eigen::RowVector3d a = x.row(0);
    const Eigen::RowVector3d b = x.row(x.rows() - 1);
    CHECK((b - a).norm() == doctest::Approx(spec.length).epsilon(1e-6));
    for (Index i = 0; i < x.rows(); ++i) {
      CHECK(point_to_segment(x.row(i), a, b) < 1e-3 * spec.length);
    }
  }
}

TEST_CASE("slack rope sags under gravity and keeps its arclength") {
  RopeSpec spec;
  spec.length = 0.5;
  SimParams params;
  params.move_endpoints = false;
  params.init_span = 0.5;
  params.iterations = 120;
  params.warmup_frames = 120;
  const auto result = simulate_sequence(spec, params, 1, 1);
  const Matd& x = result.frames[0];
  CHECK(arclength(x) == doctest::Approx(spec.length).epsilon(0.02));
  const double end_y = x(0, 1);
  CHECK(x.col(1).minCoeff() < end_y - 0.05 * spec.length);  // visible sag
}

TEST_CASE("same seed reproduces the identical sequence") {
  RopeSpec spec;
  SimParams params;
  const auto a = simulate_sequence(spec, params, 42, 6);
  const auto b = simulate_sequence(spec, params, 42, 6);
  REQUIRE(a.frames.size() == b.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    CHECK((a.frames[i] - b.frames[i]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("simulated frames keep quasi-uniform particle spacing") {
  RopeSpec spec;
  SimParams params;
  const auto result = simulate_sequence(spec, params, 7, 12);
  const double seg = spec.length / (spec.particles - 1);
  double first_vs_last = 0;
  for (const Matd& x : result.frames) {
    for (Index i = 0; i + 1 < x.rows(); ++i) {
      const double d = (x.row(i + 1) - x.row(i)).norm();
      CHECK(std::abs(d - seg) / seg < 0.2);
    }
  }
  first_vs_last =
      (result.frames.front() - result.frames.back()).rowwise().norm().maxCoeff();
  CHECK(first_vs_last > 0.02);  // endpoint motion produces shape variety
}

TEST_CASE("resample_nodes splits a straight rope evenly") {
  Matd line(2, 3);
  line << 0, 0, 0, 1, 0, 0;
  const Matd nodes = resample_nodes(line, 5);
  for (int k = 0; k < 5; ++k) {
    CHECK(nodes(k, 0) == doctest::Approx(0.25 * k).epsilon(1e-12));
    CHECK(nodes(k, 1) == 0.0);
  }
  const Matd ends = resample_nodes(line, 2);
  CHECK((ends.row(0) - line.row(0)).norm() == 0.0);
  CHECK((ends.row(1) - line.row(1)).norm() == 0.0);
}

TEST_CASE("resample_nodes on a semicircle hits endpoints and apex") {
  const int pts = 2001;
  Matd line(pts, 3);
  for (int i = 0; i < pts; ++i) {
    const double theta = M_PI * i / (pts - 1);
    line.row(i) << std::cos(theta), std::sin(theta), 0.0;
  }
  const Matd nodes = resample_nodes(line, 3);
  CHECK((nodes.row(0) - Eigen::RowVector3d(1, 0, 0)).norm() < 1e-5);
  CHECK((nodes.row(1) - Eigen::RowVector3d(0, 1, 0)).norm() < 1e-5);
  CHECK((nodes.row(2) - Eigen::RowVector3d(-1, 0, 0)).norm() < 1e-5);
  const double c1 = (nodes.row(1) - nodes.row(0)).norm();
  const double c2 = (nodes.row(2) - nodes.row(1)).norm();
  CHECK(c1 == doctest::Approx(c2).epsilon(1e-6));
}

TEST_CASE("resample_nodes commutes with rigid motion") {
  Rng rng(19);
  RopeSpec spec;
  SimParams params;
  const Matd x = simulate_sequence(spec, params, 5, 1).frames[0];
  const Eigen::Matrix3d rot = rng.rotation();
  const Eigen::RowVector3d t(0.3, -0.1, 0.7);
  const Matd moved = (x * rot.transpose()).rowwise() + t;
  const Matd a = resample_nodes(moved, 9);
  const Matd b = (resample_nodes(x, 9) * rot.transpose()).rowwise() + t;
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("resample_nodes rejects a degenerate centerline") {
  Matd line = Matd::Zero(4, 3);
  CHECK_THROWS_AS(resample_nodes(line, 3), ContractViolation);
}

TEST_CASE("render_cloud collapses to the centerline as radius vanishes") {
  RopeSpec spec;
  spec.radius = 1e-12;
  Matd line(3, 3);
  line << 0, 0, 0, 0.25, 0.05, 0, 0.5, 0, 0;
  const Matd cloud = render_cloud(line, spec, 2000, 11);
  for (Index i = 0; i < cloud.rows(); ++i) {
    CHECK(point_to_polyline(cloud.row(i), line) < 1e-9);
  }
}

TEST_CASE("render_cloud samples the camera-facing half cylinder") {
  RopeSpec spec;
  spec.radius = 0.005;
  Matd line(2, 3);
  line << 0, 0, 0, 0.5, 0, 0;
  const Matd cloud = render_cloud(line, spec, 4000, 13);
  REQUIRE(cloud.rows() > 100);
  for (Index i = 0; i < cloud.rows(); ++i) {
    CHECK(cloud(i, 2) >= 0.0);  // camera looks along +z
    const double d = point_to_segment(cloud.row(i), line.row(0), line.row(1));
    CHECK(std::abs(d - spec.radius) < 1e-9);
  }
}

TEST_CASE("arclength_params projects points onto the polyline") {
  Matd line(2, 3);
  line << 0, 0, 0, 1, 0, 0;
  Matd pts(3, 3);
  pts << 0.25, 0.1, 0, 0.5, -0.2, 0.1, 2.0, 0, 0;
  const Eigen::VectorXd s = arclength_params(pts, line);
  CHECK(s(0) == doctest::Approx(0.25));
  CHECK(s(1) == doctest::Approx(0.5));
  CHECK(s(2) == doctest::Approx(1.0));  // clamped past the end
}

TEST_CASE("augment with null settings is the identity") {
  Rng rng(3);
  Matd cloud(50, 3), nodes(4, 3);
  for (Index i = 0; i < cloud.rows(); ++i) cloud.row(i) = rng.gaussian3().transpose();
  for (Index i = 0; i < nodes.rows(); ++i) nodes.row(i) = rng.gaussian3().transpose();
  AugmentConfig cfg;
  const auto res = augment(cloud, nodes, cfg, 9);
  CHECK(res.usable);
  CHECK((res.cloud - cloud).cwiseAbs().maxCoeff() == 0.0);
  CHECK((res.nodes - nodes).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("occlusion at ratio 0.4 removes about 40 percent of points") {
  RopeSpec spec;
  SimParams params;
  const Matd x = simulate_sequence(spec, params, 21, 1).frames[0];
  const Matd nodes = resample_nodes(x, 16);
  const Matd cloud = render_cloud(x, spec, 4096, 22);
  AugmentConfig cfg;
  cfg.occlusion_ratio = 0.4;
  double kept_total = 0;
  const int trials = 20;
  for (int trial = 0; trial < trials; ++trial) {
    const auto res = augment(cloud, nodes, cfg, 100 + trial);
    REQUIRE(res.usable);
    kept_total += static_cast<double>(res.cloud.rows()) / cloud.rows();
  }
  CHECK(kept_total / trials == doctest::Approx(0.6).epsilon(0.05 / 0.6));
}

TEST_CASE("rotation augmentation moves cloud and nodes together") {
  RopeSpec spec;
  SimParams params;
  const Matd x = simulate_sequence(spec, params, 31, 1).frames[0];
  const Matd nodes = resample_nodes(x, 8);
  const Matd cloud = render_cloud(x, spec, 2048, 32);
  AugmentConfig cfg;
  cfg.rotation_deg = 180.0;
  const auto res = augment(cloud, nodes, cfg, 77);
  // rigid: every cloud-to-node distance is preserved
  for (Index j = 0; j < nodes.rows(); ++j) {
    for (Index i = 0; i < 20; ++i) {
      const double before = (cloud.row(i) - nodes.row(j)).norm();
      const double after = (res.cloud.row(i) - res.nodes.row(j)).norm();
      CHECK(before == doctest::Approx(after).epsilon(1e-9));
    }
  }
}

TEST_CASE("augment flags frames that lose too many points") {
  Rng rng(41);
  Matd nodes(4, 3);
  nodes << 0, 0, 0, 0.1, 0, 0, 0.2, 0, 0, 0.3, 0, 0;
  Matd cloud(40, 3);
  for (Index i = 0; i < 40; ++i) {
    cloud.row(i) << rng.uniform(0.0, 0.3), 0.0, 0.0;
  }
  AugmentConfig cfg;
  cfg.occlusion_ratio = 0.8;
  const auto res = augment(cloud, nodes, cfg, 5);
  CHECK_FALSE(res.usable);
}

TEST_CASE("occlusion mask agrees with brute-force neighborhood search") {
  RopeSpec spec;
  SimParams params;
  const Matd x = simulate_sequence(spec, params, 51, 1).frames[0];
  const Matd nodes = resample_nodes(x, 12);
  const Matd cloud = render_cloud(x, spec, 2048, 52);
  AugmentConfig cfg;
  cfg.occlusion_ratio = 0.3;
  const auto res = augment(cloud, nodes, cfg, 53);
  REQUIRE(res.usable);
  const double r = 0.02;
  const auto mask = occlusion_mask(res.cloud, res.nodes, r);
  int occluded_count = 0;
  for (Index j = 0; j < res.nodes.rows(); ++j) {
    double dmin = std::numeric_limits<double>::max();
    for (Index i = 0; i < res.cloud.rows(); ++i) {
      dmin = std::min(dmin, (res.cloud.row(i) - res.nodes.row(j)).norm());
    }
    CHECK(static_cast<bool>(mask[j]) == (dmin >= r));
    occluded_count += mask[j];
  }
  CHECK(occluded_count > 0);  // 30% occlusion hides at least one node
}

TEST_CASE("farthest point selection keeps extremes of a collinear triple") {
  Matd pts(3, 3);
  pts << 0, 0, 0, 0.5, 0, 0, 1, 0, 0;
  const auto idx = geom::fps_indices(pts, 2, 0);
  REQUIRE(idx.size() == 2);
  CHECK(idx[0] == 0);
  CHECK(idx[1] == 2);
}

TEST_CASE("fps_sample of full size returns a permutation") {
  Rng rng(61);
  Matd cloud(20, 3);
  for (Index i = 0; i < 20; ++i) cloud.row(i) = rng.gaussian3().transpose();
  const Matd out = fps_sample(cloud, 20, 9);
  REQUIRE(out.rows() == 20);
  for (Index i = 0; i < 20; ++i) {
    bool found = false;
    for (Index j = 0; j < 20; ++j) {
      if ((out.row(j) - cloud.row(i)).norm() == 0.0) {
        found = true;
        break;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("fps_sample spreads points at least as well as random subsets") {
  Rng rng(71);
  Matd cloud(100, 3);
  for (Index i = 0; i < 100; ++i) cloud.row(i) = rng.gaussian3().transpose();
  const Matd out = fps_sample(cloud, 10, 3);
  auto min_pairwise = [](const Matd& m) {
    double best = std::numeric_limits<double>::max();
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = i + 1; j < m.rows(); ++j) {
        best = std::min(best, (m.row(i) - m.row(j)).norm());
      }
    }
    return best;
  };
  const double fps_gap = min_pairwise(out);
  double best_random = 0;
  std::vector<int> ids(100);
  for (int i = 0; i < 100; ++i) ids[i] = i;
  for (int trial = 0; trial < 1000; ++trial) {
    rng.shuffle(ids);
    Matd sub(10, 3);
    for (int k = 0; k < 10; ++k) sub.row(k) = cloud.row(ids[k]);
    best_random = std::max(best_random, min_pairwise(sub));
  }
  CHECK(fps_gap >= best_random);
}

TEST_CASE("fps_sample pads undersized clouds with replacement") {
  Matd cloud(5, 3);
  cloud << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 1;
  const Matd out = fps_sample(cloud, 12, 7);
  REQUIRE(out.rows() == 12);
  for (Index i = 0; i < out.rows(); ++i) {
    bool member = false;
    for (Index j = 0; j < cloud.rows(); ++j) {
      if ((out.row(i) - cloud.row(j)).norm() == 0.0) member = true;
    }
    CHECK(member);
  }
}

TEST_CASE("fps_sample rejects an empty cloud") {
  Matd cloud(0, 3);
  CHECK_THROWS_AS(fps_sample(cloud, 4, 1), ContractViolation);
}

TEST_CASE("frame records round-trip through disk") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "dloest_frame.bin").string();
  Rng rng(81);
  FrameRecord rec;
  rec.cloud = Matf::Random(37, 3);
  rec.nodes = Matf::Random(8, 3);
  rec.occluded = {0, 1, 0, 0, 1, 0, 0, 0};
  rec.meta_json = "{\"sequence\":3}";
  write_frame(path, rec);
  const FrameRecord back = read_frame(path);
  CHECK((back.cloud - rec.cloud).cwiseAbs().maxCoeff() == 0.0f);
  CHECK((back.nodes - rec.nodes).cwiseAbs().maxCoeff() == 0.0f);
  CHECK(back.occluded == rec.occluded);
  CHECK(back.meta_json == rec.meta_json);
  fs::remove(path);
}

TEST_CASE("read_frame rejects foreign files") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "dloest_notframe.bin").string();
  {
    std::ofstream os(path, std::ios::binary);
    os << "garbage garbage garbage";
  }
  CHECK_THROWS_AS(read_frame(path), ContractViolation);
  fs::remove(path);
}

TEST_CASE("generated datasets are deterministic, split cleanly, and validate") {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "dloest_ds_test";
  fs::remove_all(base);

  DatasetConfig cfg;
  cfg.sequences = 5;
  cfg.frames_per_sequence = 3;
  cfg.nodes = 16;
  cfg.particles = 64;
  cfg.density = 1024;
  cfg.seed = 99;

  const auto sum1 = gen_dataset(cfg, (base / "a").string(), "k=v");
  const auto sum2 = gen_dataset(cfg, (base / "b").string(), "k=v");
  CHECK(sum1.train_frames == 4 * 3);
  CHECK(sum1.val_frames == 1 * 3);

  // byte-identical across runs with the same seed
  for (const auto& entry : fs::recursive_directory_iterator(base / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), base / "a");
    CHECK(slurp(entry.path().string()) == slurp((base / "b" / rel).string()));
  }

  const auto train_files = read_index((base / "a" / "train").string());
  const auto val_files = read_index((base / "a" / "val").string());
  CHECK(static_cast<int>(train_files.size()) == sum1.train_frames);
  CHECK(static_cast<int>(val_files.size()) == sum1.val_frames);

  // no sequence appears in both splits
  auto seq_of = [](const std::string& p) {
    const auto name = fs::path(p).filename().string();
    return name.substr(0, 7);
  };
  for (const auto& t : train_files) {
    for (const auto& v : val_files) {
      CHECK(seq_of(t) != seq_of(v));
    }
  }

  for (const auto& file : val_files) {
    const FrameRecord rec = read_frame(file);
    // gt nodes uniformly spaced along arclength
    Eigen::VectorXd gaps(rec.nodes.rows() - 1);
    for (Index i = 0; i + 1 < rec.nodes.rows(); ++i) {
      gaps(i) = (rec.nodes.row(i + 1) - rec.nodes.row(i)).cast<double>().norm();
    }
    const double mean = gaps.mean();
    const double sd = std::sqrt((gaps.array() - mean).square().mean());
    CHECK(sd / mean < 0.01);
    // stored mask consistent with the stored cloud
    const auto mask = occlusion_mask(rec.cloud.cast<double>(),
                                     rec.nodes.cast<double>(), cfg.voting_radius);
    CHECK(mask == rec.occluded);
  }
  fs::remove_all(base);
}
