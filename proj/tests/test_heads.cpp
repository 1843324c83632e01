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

#include <numeric>
#include <vector>

#include "dloest/heads/model.hpp"
#include "dloest/numkit/gradcheck.hpp"

using namespace dloest;
using namespace dloest::heads;

namespace {

Matd random_cloud(Index n, Rng& rng, double scale = 0.2) {
  Matd x(n, 3);
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < 3; ++c) x(i, c) = rng.uniform(-scale, scale);
  return x;
}

}  // namespace

TEST_CASE("ground-truth field matches the analytic definition") {
  Matd cloud(2, 3), nodes(1, 3);
  cloud << 0, 0, 0, 0.01, 0, 0;
  nodes << 0.01, 0, 0;
  auto f = gt_voting_field<double>(cloud, nodes, 0.02);

  CHECK(f.H(0, 0) == doctest::Approx(0.5));  // midpoint of the radius
  CHECK(f.U.row(0).isApprox(Eigen::RowVector3d(1, 0, 0)));
  CHECK(f.H(1, 0) == doctest::Approx(1.0));  // coincident: full confidence,
  CHECK(f.U.row(1).norm() == 0.0);           // no direction

  // Exactly on the radius counts as outside; 0.25 is exact in binary.
  Matd edge(1, 3);
  edge << 0.25, 0, 0;
  auto fe = gt_voting_field<double>(edge, Matd::Zero(1, 3).eval(), 0.25);
  CHECK(fe.H(0, 0) == 0.0);
  CHECK(fe.U.row(0).norm() == 0.0);
}

TEST_CASE("ground-truth field rows are unit or zero and H stays in range") {
  Rng rng(3);
  Matd cloud = random_cloud(64, rng, 0.05);
  Matd nodes = random_cloud(8, rng, 0.05);
  auto f = gt_voting_field<double>(cloud, nodes, 0.02);
  CHECK(f.H.minCoeff() >= 0.0);
  CHECK(f.H.maxCoeff() <= 1.0);
  for (Index r = 0; r < f.U.rows(); ++r) {
    const double n = f.U.row(r).norm();
    CHECK((n == 0.0 || std::abs(n - 1.0) < 1e-12));
  }
}

TEST_CASE("voting branch outputs respect their activations") {
  Rng rng(4);
  ModelConfig cfg = toy_model();
  numkit::ParamStore<double> params;
  add_model_params(params, cfg, rng);
  Matd cloud = random_cloud(20, rng);

  numkit::Tape<double> tape;
  auto bound = params.bind(tape);
  auto out = model_forward(tape, cloud, cfg, params, bound);
  CHECK(out.y_reg.value().rows() == cfg.heads.nodes);
  CHECK(out.y_reg.value().cols() == 3);
  CHECK(out.h.value().minCoeff() > 0.0);
  CHECK(out.h.value().maxCoeff() < 1.0);
  // The normalization softens tiny rows with a 1e-8 affine term, so rows
  // with small pre-normalization norms land slightly inside the sphere.
  for (Index r = 0; r < out.u.value().rows(); ++r)
    CHECK(std::abs(out.u.value().row(r).norm() - 1.0) < 1e-4);
}

TEST_CASE("model outputs are permutation-invariant") {
  Rng rng(5);
  ModelConfig cfg = toy_model();
  numkit::ParamStore<double> params;
  add_model_params(params, cfg, rng);
  const Index n = 20;
  Matd cloud = random_cloud(n, rng);

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (Index i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[static_cast<Index>(rng.uniform() * (i + 1))]);
  Matd shuffled(n, 3);
  for (Index i = 0; i < n; ++i) shuffled.row(i) = cloud.row(perm[i]);

  numkit::Tape<double> t1, t2;
  auto b1 = params.bind(t1);
  auto b2 = params.bind(t2);
  auto o1 = model_forward(t1, cloud, cfg, params, b1);
  auto o2 = model_forward(t2, shuffled, cfg, params, b2);
  CHECK((o1.y_reg.value() - o2.y_reg.value()).cwiseAbs().maxCoeff() < 1e-6);
  const Index m = cfg.heads.nodes;
  for (Index i = 0; i < n; ++i) {
    CHECK((o2.h.value().row(i) - o1.h.value().row(perm[i]))
              .cwiseAbs()
              .maxCoeff() < 1e-6);
    for (Index j = 0; j < m; ++j) {
      CHECK((o2.u.value().row(i * m + j) - o1.u.value().row(perm[i] * m + j))
                .cwiseAbs()
                .maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("vote follows the candidate algebra") {
  // One point with full confidence: the candidate collapses onto the point.
  Matd cloud(1, 3);
  cloud << 0.3, -0.2, 0.1;
  Matd h(1, 2), u(2, 3);
  h << 1.0, 0.0;
  u << 0.57735, 0.57735, 0.57735, 1, 0, 0;
  auto res = vote<double>(cloud, h, u, 0.02, 1);
  CHECK(res.nodes.row(0).isApprox(cloud.row(0), 1e-12));
  CHECK(res.visibility(0) == doctest::Approx(1.0));
  // All-zero column: mean fallback, reported invisible.
  CHECK(res.visibility(1) == 0.0);
  CHECK(res.nodes.row(1).isApprox(cloud.row(0) + 0.02 * u.row(1), 1e-12));

  // Equal heatmap values average the two candidates.
  Matd cloud2(2, 3), h2(2, 1), u2(2, 3);
  cloud2 << 0, 0, 0, 0.01, 0, 0;
  h2 << 0.5, 0.5;
  u2 << 1, 0, 0, -1, 0, 0;
  auto res2 = vote<double>(cloud2, h2, u2, 0.02, 2);
  Eigen::RowVector3d c1 = cloud2.row(0) + 0.02 * 0.5 * u2.row(0);
  Eigen::RowVector3d c2 = cloud2.row(1) + 0.02 * 0.5 * u2.row(1);
  CHECK(res2.nodes.row(0).isApprox(((c1 + c2) / 2).eval(), 1e-12));
}

TEST_CASE("exact ground-truth fields reconstruct the nodes") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    Matd nodes = random_cloud(5, rng, 0.08);
    // Scatter points strictly inside each node's ball.
    Matd cloud(40, 3);
    for (Index i = 0; i < cloud.rows(); ++i) {
      const Index j = i % nodes.rows();
      Eigen::RowVector3d dir(rng.gaussian(), rng.gaussian(), rng.gaussian());
      dir.normalize();
      cloud.row(i) = nodes.row(j) + dir * rng.uniform(0.0, 0.019);
    }
    auto f = gt_voting_field<double>(cloud, nodes, 0.02);
    auto res = vote<double>(cloud, f.H, f.U, 0.02,
                            std::min<Index>(64, cloud.rows()));
    for (Index j = 0; j < nodes.rows(); ++j) {
      CHECK((res.nodes.row(j) - nodes.row(j)).norm() < 1e-9);
      CHECK(res.visibility(j) > 0.0);
    }
  }
}

TEST_CASE("voted nodes stay inside the candidate bounding box") {
  Rng rng(7);
  Matd cloud = random_cloud(50, rng, 0.05);
  Matd nodes = random_cloud(4, rng, 0.05);
  auto f = gt_voting_field<double>(cloud, nodes, 0.05);
  const Index k = 10;
  auto res = vote<double>(cloud, f.H, f.U, 0.05, k);
  const Index m = nodes.rows();
  for (Index j = 0; j < m; ++j) {
    Matd cand(cloud.rows(), 3);
    for (Index i = 0; i < cloud.rows(); ++i)
      cand.row(i) = cloud.row(i) +
                    0.05 * (1 - f.H(i, j)) * f.U.row(i * m + j);
    CHECK((res.nodes.row(j).array() >= cand.colwise().minCoeff().array() - 1e-12)
              .all());
    CHECK((res.nodes.row(j).array() <= cand.colwise().maxCoeff().array() + 1e-12)
              .all());
  }
}

TEST_CASE("visibility never increases when points are removed") {
  Rng rng(8);
  Matd cloud = random_cloud(40, rng, 0.05);
  Matd nodes = random_cloud(6, rng, 0.05);
  auto f = gt_voting_field<double>(cloud, nodes, 0.03);
  auto full = vote<double>(cloud, f.H, f.U, 0.03, 8);
  // Drop the back half of the cloud.
  Matd half = cloud.topRows(20);
  auto fh = gt_voting_field<double>(half, nodes, 0.03);
  auto part = vote<double>(half, fh.H, fh.U, 0.03, 8);
  for (Index j = 0; j < nodes.rows(); ++j) {
    CHECK(part.visibility(j) <= full.visibility(j) + 1e-15);
    CHECK(full.visibility(j) >= 0.0);
    CHECK(full.visibility(j) <= 1.0);
  }
}

TEST_CASE("losses vanish when predictions equal ground truth") {
  Rng rng(9);
  Matd cloud = random_cloud(30, rng, 0.05);
  Matd y_gt = random_cloud(5, rng, 0.05);
  auto gt = gt_voting_field<double>(cloud, y_gt, 0.03);

  numkit::Tape<double> tape;
  auto trip = losses(tape, numkit::constant(tape, y_gt),
                     numkit::constant(tape, gt.H), numkit::constant(tape, gt.U),
                     y_gt, gt);
  CHECK(trip.reg.value()(0, 0) == 0.0);
  CHECK(trip.vot.value()(0, 0) == 0.0);
  CHECK(trip.total.value()(0, 0) == 0.0);
}

TEST_CASE("a single flipped offset row contributes 4/(N*M)") {
  Matd cloud(4, 3);
  cloud << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  Matd y_gt(2, 3);
  y_gt << 0.01, 0, 0, 1.01, 0, 0;
  auto gt = gt_voting_field<double>(cloud, y_gt, 0.02);
  REQUIRE(gt.H(0, 0) > 0);  // the pair we flip is in radius

  Matd u_pred = gt.U;
  u_pred.row(0) = -gt.U.row(0);
  numkit::Tape<double> tape;
  auto trip = losses(tape, numkit::constant(tape, y_gt),
                     numkit::constant(tape, gt.H),
                     numkit::constant(tape, u_pred), y_gt, gt);
  const double nm = static_cast<double>(cloud.rows() * y_gt.rows());
  CHECK(trip.vot.value()(0, 0) == doctest::Approx(4.0 / nm));
}

TEST_CASE("orientation-symmetric loss treats both node orders alike") {
  Rng rng(10);
  ModelConfig cfg = toy_model();
  numkit::ParamStore<double> params;
  add_model_params(params, cfg, rng);
  Matd cloud = random_cloud(20, rng);
  Matd y_gt = random_cloud(cfg.heads.nodes, rng);

  numkit::Tape<double> t1, t2;
  auto b1 = params.bind(t1);
  auto b2 = params.bind(t2);
  auto o1 = model_forward(t1, cloud, cfg, params, b1);
  auto o2 = model_forward(t2, cloud, cfg, params, b2);
  auto fwd = oriented_losses(t1, o1.y_reg, o1.h, o1.u, cloud, y_gt,
                             cfg.heads.radius);
  auto rev = oriented_losses(t2, o2.y_reg, o2.h, o2.u, cloud,
                             reverse_nodes(y_gt), cfg.heads.radius);
  CHECK(fwd.total.value()(0, 0) ==
        doctest::Approx(rev.total.value()(0, 0)).epsilon(1e-12));
}

TEST_CASE("total-loss gradients match finite differences on the toy model") {
  Rng rng(11);
  ModelConfig cfg = toy_model();
  numkit::ParamStore<double> params;
  add_model_params(params, cfg, rng);
  Matd cloud = random_cloud(12, rng);
  Matd y_gt = random_cloud(cfg.heads.nodes, rng);

  auto report = numkit::check_gradients(
      "two-branch", params,
      [&](numkit::Tape<double>& t, const std::vector<numkit::Var<double>>& v) {
        auto out = model_forward(t, cloud, cfg, params, v);
        auto gt = gt_voting_field<double>(cloud, y_gt, cfg.heads.radius);
        return losses(t, out.y_reg, out.h, out.u, y_gt, gt).total;
      });
  CHECK(report.pass);
}
