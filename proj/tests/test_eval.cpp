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

#include "dloest/eval/metrics.hpp"
#include "dloest/eval/sweep.hpp"
#include "dloest/synth/dataset.hpp"
#include "dloest/synth/frame.hpp"

using namespace dloest;
using namespace dloest::eval;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(bool(is));
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_CASE("node error splits means by the occlusion mask") {
  Matd gt(4, 3);
  gt << 0, 0, 0, 1, 0, 0, 2, 0, 0, 3, 0, 0;
  std::vector<std::uint8_t> none(4, 0);

  auto exact = node_error(gt, gt, none);
  CHECK(exact.all == 0.0);
  REQUIRE(exact.unoccluded.has_value());
  CHECK(*exact.unoccluded == 0.0);
  CHECK_FALSE(exact.occluded.has_value());  // no occluded nodes -> dash

  Matd pred = gt;
  pred.col(2).array() += 0.005;  // uniform 5mm offset
  auto shifted = node_error(pred, gt, none);
  CHECK(shifted.all == doctest::Approx(0.005));
  CHECK(*shifted.unoccluded == doctest::Approx(0.005));

  std::vector<std::uint8_t> mask = {0, 1, 1, 0};
  pred = gt;
  pred.row(1) += Eigen::RowVector3d(0.02, 0, 0);
  auto split = node_error(pred, gt, mask);
  CHECK(split.all == doctest::Approx(0.005));
  CHECK(*split.unoccluded == 0.0);
  CHECK(*split.occluded == doctest::Approx(0.01));
}

TEST_CASE("node error is invariant to a shared node relabeling") {
  Rng rng(31);
  Matd gt(6, 3), pred(6, 3);
  for (Index j = 0; j < 6; ++j)
    for (Index c = 0; c < 3; ++c) {
      gt(j, c) = rng.uniform(-1, 1);
      pred(j, c) = gt(j, c) + 0.01 * rng.uniform(-1, 1);
    }
  std::vector<std::uint8_t> mask = {1, 0, 0, 1, 0, 0};
  auto base = node_error(pred, gt, mask);
  // Reverse is one relabeling applied to both.
  std::vector<std::uint8_t> rmask(mask.rbegin(), mask.rend());
  auto relabeled = node_error(pred.colwise().reverse().eval(),
                              gt.colwise().reverse().eval(), rmask);
  CHECK(base.all == doctest::Approx(relabeled.all).epsilon(1e-12));
  CHECK(*base.occluded == doctest::Approx(*relabeled.occluded).epsilon(1e-12));
}

TEST_CASE("aligned error picks the better node order") {
  Matd gt(3, 3);
  gt << 0, 0, 0, 1, 0, 0, 2, 0, 0;
  Matd pred = gt.colwise().reverse();  // prediction in reverse order
  std::vector<std::uint8_t> mask(3, 0);
  CHECK(node_error(pred, gt, mask).all > 0.1);
  CHECK(aligned_node_error(pred, gt, mask).all == 0.0);
}

TEST_CASE("uniformity is the population std of gaps") {
  Matd even(4, 3);
  even << 0, 0, 0, 1, 0, 0, 2, 0, 0, 3, 0, 0;
  CHECK(uniformity(even) == doctest::Approx(0.0));

  Matd two(3, 3);
  two << 0, 0, 0, 1, 0, 0, 4, 0, 0;  // gaps {1, 3}
  CHECK(uniformity(two) == doctest::Approx(1.0));

  Matd tiny(2, 3);
  CHECK_THROWS(uniformity(tiny));

  // Rigid motion does not change adjacent gaps.
  Rng rng(32);
  Matd y(7, 3);
  for (Index j = 0; j < 7; ++j)
    for (Index c = 0; c < 3; ++c) y(j, c) = rng.uniform(-1, 1);
  const Eigen::Matrix3d r = rng.rotation();
  Matd moved = (y * r.transpose()).rowwise() + Eigen::RowVector3d(5, -2, 1);
  CHECK(uniformity(y) == doctest::Approx(uniformity(moved)).epsilon(1e-12));
}

TEST_CASE("occlusion sweep emits a deterministic table over all methods") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dloest_eval_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // Hand-built frames: dense points on a bent curve, nodes resampled from it.
  Rng rng(33);
  std::vector<std::string> paths;
  for (int f = 0; f < 3; ++f) {
    Matd curve(40, 3);
    const double a = rng.uniform(-1, 1);
    for (Index i = 0; i < 40; ++i) {
      const double t = static_cast<double>(i) / 39.0;
      curve.row(i) << 0.4 * t, 0.1 * std::sin(a + 3 * t), 0.05 * t * t;
    }
    Matd cloud(400, 3);
    for (Index i = 0; i < 400; ++i) {
      cloud.row(i) = curve.row(i % 40) +
                     0.003 * Eigen::RowVector3d(rng.uniform(-1, 1),
                                                rng.uniform(-1, 1),
                                                rng.uniform(-1, 1));
    }
    synth::FrameRecord rec;
    rec.cloud = cloud.cast<float>();
    rec.nodes = synth::resample_nodes(curve, 4).cast<float>();
    rec.occluded.assign(4, 0);
    rec.meta_json = "{}";
    const std::string p = (dir / ("f" + std::to_string(f) + ".bin")).string();
    synth::write_frame(p, rec);
    paths.push_back(p);
  }

  heads::ModelConfig model = heads::toy_model();
  numkit::ParamStore<float> params;
  Rng prng(34);
  heads::add_model_params(params, model, prng);

  SweepConfig cfg;
  cfg.ratios = {0.0, 0.4};
  cfg.n_points = 32;
  cfg.top_k = 8;
  cfg.voting_radius = 0.02;

  auto res = occlusion_sweep(model, params, paths, cfg,
                             (dir / "a.jsonl").string(),
                             (dir / "a.csv").string());
  CHECK(res.table.size() == 6);  // 2 ratios x 3 methods
  for (const auto& row : res.table) {
    CHECK(row.frames + res.skipped_frames >= 1);
    CHECK(std::isfinite(row.err_all));
    CHECK(std::isfinite(row.uniformity));
  }
  // Unoccluded frames have no occluded-node column.
  CHECK_FALSE(res.table[0].err_occluded.has_value());

  auto again = occlusion_sweep(model, params, paths, cfg,
                               (dir / "b.jsonl").string(),
                               (dir / "b.csv").string());
  CHECK(slurp((dir / "a.jsonl").string()) == slurp((dir / "b.jsonl").string()));
  CHECK(slurp((dir / "a.csv").string()) == slurp((dir / "b.csv").string()));
  CHECK(slurp((dir / "a.csv").string()).rfind("ratio,method,frames", 0) == 0);

  auto noise = noise_sweep(model, params, paths, cfg, "", "");
  CHECK(noise.swept == "jitter_mm");
  CHECK(noise.table.size() == 4 * 3);
  auto thr = threshold_sweep(model, params, paths, cfg, "", "");
  CHECK(thr.swept == "threshold");
  CHECK(thr.table.size() == 3 * 3);
  fs::remove_all(dir);
}
