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

#include <algorithm>
#include <numeric>
#include <vector>

#include "dloest/encoder/config.hpp"
#include "dloest/encoder/pointnet.hpp"
#include "dloest/numkit/gradcheck.hpp"

using namespace dloest;
using namespace dloest::encoder;

namespace {

Matd random_cloud(Index n, Rng& rng, double scale = 0.2) {
  Matd x(n, 3);
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < 3; ++c) x(i, c) = rng.uniform(-scale, scale);
  return x;
}

// Applies `perm` to rows: out.row(i) = in.row(perm[i]).
Matd permute_rows(const Matd& in, const std::vector<int>& perm) {
  Matd out(in.rows(), in.cols());
  for (Index i = 0; i < in.rows(); ++i) out.row(i) = in.row(perm[i]);
  return out;
}

}  // namespace

TEST_CASE("config validation rejects malformed level stacks") {
  EncoderConfig cfg = desk_encoder();
  CHECK_NOTHROW(validate(cfg, 256));
  CHECK_THROWS(validate(cfg, 100));  // more centroids than points
  cfg = desk_encoder();
  cfg.sa[2].centroids = 64;  // not strictly decreasing
  CHECK_THROWS(validate(cfg, 256));
  cfg = desk_encoder();
  cfg.fp.pop_back();
  CHECK_THROWS(validate(cfg, 256));
  cfg = desk_encoder();
  cfg.sa[1].radius = 0.0;
  CHECK_THROWS(validate(cfg, 256));
  cfg = desk_encoder();
  cfg.sa.back().centroids = 2;  // too few for 3-neighbor interpolation
  CHECK_THROWS(validate(cfg, 256));
}

TEST_CASE("single-centroid abstraction is the max over per-point MLP outputs") {
  Rng rng(11);
  const Index n = 8;
  Matd pts = random_cloud(n, rng);

  EncoderConfig cfg;
  cfg.sa = {{1, 10.0, static_cast<Index>(n), {5}}};
  cfg.fp = {5};
  // Passing coordinates as level-0 features widens the MLP input to 6, so
  // register that layer by hand.
  numkit::ParamStore<double> params;
  params.add("enc.sa0.mlp0.w", numkit::uniform_matrix(6, 5, rng));
  params.add("enc.sa0.mlp0.b", numkit::uniform_matrix(1, 5, rng, 0.1));

  numkit::Tape<double> tape;
  auto bound = params.bind(tape);
  LevelState<double> in{pts, numkit::constant(tape, pts), true};
  auto out = set_abstraction(tape, in, cfg.sa[0], params, bound, 0);

  // By hand: centroid is the lexicographically smallest point, every point
  // joins its group, and the pooled feature is the coordinate-wise max.
  const Index c0 = geom::lex_min_index(pts);
  const Matd& w = params.value("enc.sa0.mlp0.w");
  const Matd& b = params.value("enc.sa0.mlp0.b");
  Matd best = Matd::Constant(1, 5, -1e30);
  for (Index i = 0; i < n; ++i) {
    Matd row(1, 6);
    row << pts.row(i) - pts.row(c0), pts.row(i);
    Matd h = (row * w + b).cwiseMax(0.0);
    best = best.cwiseMax(h);
  }
  CHECK(out.points.row(0).isApprox(pts.row(c0), 1e-12));
  CHECK(out.features.value().isApprox(best, 1e-12));
}

TEST_CASE("two-level toy abstraction produces the configured shapes") {
  Rng rng(12);
  EncoderConfig cfg = toy_encoder();
  Matd pts = random_cloud(16, rng);
  numkit::ParamStore<double> params;
  add_encoder_params(params, cfg, rng);

  numkit::Tape<double> tape;
  auto bound = params.bind(tape);
  LevelState<double> lvl{pts, numkit::constant(tape, pts), true};
  lvl = set_abstraction(tape, lvl, cfg.sa[0], params, bound, 0);
  CHECK(lvl.points.rows() == 6);
  CHECK(lvl.features.value().rows() == 6);
  CHECK(lvl.features.value().cols() == 4);
  lvl = set_abstraction(tape, lvl, cfg.sa[1], params, bound, 1);
  CHECK(lvl.points.rows() == 3);
  CHECK(lvl.features.value().cols() == 6);
}

TEST_CASE("interpolation weights sum to one and exact hits dominate") {
  Rng rng(13);
  Matd coarse = random_cloud(6, rng);
  Matd fine = random_cloud(20, rng);
  fine.row(4) = coarse.row(2);  // exact hit

  Mat<int> idx;
  Matd w;
  interpolation_weights(fine, coarse, idx, w);
  for (Index f = 0; f < fine.rows(); ++f)
    CHECK(std::abs(w.row(f).sum() - 1.0) < 1e-9);

  numkit::Tape<double> tape;
  auto feats = numkit::constant(tape, random_cloud(6, rng, 1.0));
  auto interp = interpolate_features(fine, coarse, feats);
  CHECK(interp.value().row(4).isApprox(feats.value().row(2), 1e-6));

  // Constant coarse features interpolate to that same constant everywhere:
  // rows are convex combinations.
  auto ones = numkit::constant(tape, Matd::Constant(6, 4, 0.7));
  auto flat = interpolate_features(fine, coarse, ones);
  CHECK(flat.value().isApprox(Matd::Constant(20, 4, 0.7), 1e-9));
}

TEST_CASE("ball query returns only true radius neighbors") {
  Rng rng(14);
  Matd pts = random_cloud(128, rng);
  const double radius = 0.08;
  for (Index c = 0; c < pts.rows(); c += 7) {
    const Eigen::Matrix<double, 1, 3> center = pts.row(c);
    auto group = geom::ball_query(pts, center, radius, 12);
    CHECK(group.size() == 12);
    for (int i : group)
      CHECK((pts.row(i) - center).norm() <= radius + 1e-12);
  }
}

TEST_CASE("encoder output shape matches the preset") {
  Rng rng(15);
  EncoderConfig cfg = desk_encoder();
  Matd cloud = random_cloud(256, rng);
  numkit::ParamStore<float> params;
  add_encoder_params(params, cfg, rng);

  numkit::Tape<float> tape;
  auto bound = params.bind(tape);
  auto feats = encode(tape, cloud.cast<float>().eval(), cfg, params, bound);
  CHECK(feats.value().rows() == 256);
  CHECK(feats.value().cols() == cfg.out_width());
  CHECK(feats.value().allFinite());
}

TEST_CASE("encoder is permutation-invariant") {
  Rng rng(16);
  EncoderConfig cfg = toy_encoder();
  const Index n = 24;
  Matd cloud = random_cloud(n, rng);
  numkit::ParamStore<double> params;
  add_encoder_params(params, cfg, rng);

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (Index i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[static_cast<Index>(rng.uniform() * (i + 1))]);
  Matd shuffled = permute_rows(cloud, perm);

  numkit::Tape<double> t1, t2;
  auto b1 = params.bind(t1);
  auto b2 = params.bind(t2);
  Matd f1 = encode(t1, cloud, cfg, params, b1).value();
  Matd f2 = encode(t2, shuffled, cfg, params, b2).value();
  for (Index i = 0; i < n; ++i)
    CHECK((f2.row(i) - f1.row(perm[i])).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("encoder is translation-invariant on centroid-normalized input") {
  Rng rng(17);
  EncoderConfig cfg = toy_encoder();
  Matd cloud = random_cloud(20, rng);
  Matd moved = cloud;
  moved.rowwise() += Eigen::RowVector3d(10.0, -3.0, 2.0);

  auto normalized = [](Matd x) {
    x.rowwise() -= x.colwise().mean().eval();
    return x;
  };
  numkit::ParamStore<double> params;
  add_encoder_params(params, cfg, rng);
  numkit::Tape<double> t1, t2;
  auto b1 = params.bind(t1);
  auto b2 = params.bind(t2);
  Matd f1 = encode(t1, normalized(cloud), cfg, params, b1).value();
  Matd f2 = encode(t2, normalized(moved), cfg, params, b2).value();
  CHECK((f1 - f2).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("encoder gradients match finite differences") {
  Rng rng(18);
  EncoderConfig cfg = toy_encoder();
  Matd cloud = random_cloud(12, rng);
  numkit::ParamStore<double> params;
  add_encoder_params(params, cfg, rng);
  Matd target = numkit::uniform_matrix(12, cfg.out_width(), rng);

  auto report = numkit::check_gradients(
      "encoder", params,
      [&](numkit::Tape<double>& t, const std::vector<numkit::Var<double>>& v) {
        return numkit::mse(encode(t, cloud, cfg, params, v),
                           numkit::constant(t, target));
      });
  CHECK(report.pass);
}
