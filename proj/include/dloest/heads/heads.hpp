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

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "dloest/common.hpp"
#include "dloest/encoder/pointnet.hpp"
#include "dloest/numkit/params.hpp"
#include "dloest/numkit/tape.hpp"

// The two estimation branches on top of the per-point encoder features:
// global regression (max-pool then a fully-connected decoder) and
// point-to-point voting (per-point heatmap + unit offset, aggregated over
// the top-K points per node).

namespace dloest::heads {

using numkit::ParamStore;
using numkit::Tape;
using numkit::Var;

// Decoder depths/widths are our own; only the activations (sigmoid heatmap,
// row-normalized offsets) and the output shapes are fixed.
struct HeadsConfig {
  Index nodes = 16;            // M
  Index feature = 128;         // per-point feature width from the encoder
  std::vector<Index> reg_hidden = {128, 128};
  std::vector<Index> heat_hidden = {128};
  std::vector<Index> offset_hidden = {128};
  double radius = 0.02;        // voting neighborhood r
};

inline void validate(const HeadsConfig& cfg) {
  check(cfg.nodes >= 2, "heads config: need at least 2 nodes");
  check(cfg.feature >= 1, "heads config: feature width must be positive");
  check(cfg.radius > 0, "heads config: radius must be positive");
  for (const auto* h : {&cfg.reg_hidden, &cfg.heat_hidden, &cfg.offset_hidden})
    for (Index w : *h) check(w >= 1, "heads config: widths must be positive");
}

// Heatmap H is N×M; offsets U are stored row-major as (N*M)×3 with row
// i*M + j holding the vector for point i and node j. Ground-truth rows are
// unit-norm inside the radius and exactly zero outside (and at exact
// coincidence, where no direction exists).
template <typename Scalar>
struct VotingField {
  Mat<Scalar> H;
  Mat<Scalar> U;
};

template <typename Scalar>
VotingField<Scalar> gt_voting_field(const Mat<Scalar>& cloud,
                                    const Mat<Scalar>& nodes, Scalar r) {
  check(r > 0, "gt_voting_field: radius must be positive");
  check(cloud.cols() == 3 && nodes.cols() == 3,
        "gt_voting_field: expected xyz rows");
  const Index n = cloud.rows(), m = nodes.rows();
  VotingField<Scalar> f;
  f.H = Mat<Scalar>::Zero(n, m);
  f.U = Mat<Scalar>::Zero(n * m, 3);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      const Eigen::Matrix<Scalar, 1, 3> d = nodes.row(j) - cloud.row(i);
      const Scalar dist = d.norm();
      if (dist < r) {
        f.H(i, j) = Scalar(1) - dist / r;
        if (dist > 0) f.U.row(i * m + j) = d / dist;
      }
    }
  }
  return f;
}

namespace detail {

inline std::string layer_name(const std::string& head, std::size_t k) {
  return "heads." + head + ".fc" + std::to_string(k);
}

// Widths of each layer of a decoder head: hidden sizes then the output.
inline std::vector<Index> head_widths(const std::vector<Index>& hidden,
                                      Index out) {
  std::vector<Index> w = hidden;
  w.push_back(out);
  return w;
}

template <typename Scalar>
void add_head(ParamStore<Scalar>& params, const std::string& head, Index in,
              const std::vector<Index>& widths, Rng& rng) {
  for (std::size_t k = 0; k < widths.size(); ++k) {
    const Index out = widths[k];
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    Mat<Scalar> w(in, out);
    for (Index r = 0; r < in; ++r)
      for (Index c = 0; c < out; ++c)
        w(r, c) = static_cast<Scalar>(rng.uniform(-s, s));
    params.add(layer_name(head, k) + ".w", w);
    params.add(layer_name(head, k) + ".b", Mat<Scalar>::Zero(1, out));
    in = out;
  }
}

// Hidden layers ReLU; the last layer stays linear for the caller's
// activation.
template <typename Scalar>
Var<Scalar> head_forward(Var<Scalar> x, const std::string& head,
                         std::size_t layers, const ParamStore<Scalar>& params,
                         const std::vector<Var<Scalar>>& bound) {
  for (std::size_t k = 0; k < layers; ++k) {
    x = numkit::add_row(
        numkit::matmul(
            x, encoder::bound_param(params, bound, layer_name(head, k) + ".w")),
        encoder::bound_param(params, bound, layer_name(head, k) + ".b"));
    if (k + 1 < layers) x = numkit::relu(x);
  }
  return x;
}

}  // namespace detail

template <typename Scalar>
void add_heads_params(ParamStore<Scalar>& params, const HeadsConfig& cfg,
                      Rng& rng) {
  validate(cfg);
  detail::add_head(params, "reg", cfg.feature,
                   detail::head_widths(cfg.reg_hidden, 3 * cfg.nodes), rng);
  detail::add_head(params, "heat", cfg.feature,
                   detail::head_widths(cfg.heat_hidden, cfg.nodes), rng);
  detail::add_head(params, "off", cfg.feature,
                   detail::head_widths(cfg.offset_hidden, 3 * cfg.nodes), rng);
}

// Max-pool over points, decode to M×3, and shift back to the world frame by
// the cloud centroid that normalized the encoder input.
template <typename Scalar>
Var<Scalar> regression_forward(Tape<Scalar>& tape, Var<Scalar> features,
                               const Eigen::Matrix<Scalar, 1, 3>& centroid,
                               const HeadsConfig& cfg,
                               const ParamStore<Scalar>& params,
                               const std::vector<Var<Scalar>>& bound) {
  Var<Scalar> x = numkit::max_pool_over_set(features);
  x = detail::head_forward(x, "reg", cfg.reg_hidden.size() + 1, params, bound);
  x = numkit::reshape(x, cfg.nodes, 3);
  Mat<Scalar> shift = centroid.colwise().replicate(cfg.nodes);
  return numkit::add(x, numkit::constant(tape, shift));
}

// Per-point heads: heatmap through sigmoid, offsets reshaped to (N*M)×3 and
// row-normalized to unit vectors.
template <typename Scalar>
struct PredictedField {
  Var<Scalar> H;
  Var<Scalar> U;
};

template <typename Scalar>
PredictedField<Scalar> voting_forward(Var<Scalar> features,
                                      const HeadsConfig& cfg,
                                      const ParamStore<Scalar>& params,
                                      const std::vector<Var<Scalar>>& bound) {
  const Index n = features.value().rows();
  Var<Scalar> h = detail::head_forward(features, "heat",
                                       cfg.heat_hidden.size() + 1, params,
                                       bound);
  Var<Scalar> u = detail::head_forward(features, "off",
                                       cfg.offset_hidden.size() + 1, params,
                                       bound);
  return {numkit::sigmoid(h),
          numkit::l2_normalize_rows(numkit::reshape(u, n * cfg.nodes, 3))};
}

// Candidate from point i for node j, recomposing the offset from heatmap and
// direction: x_i + r(1 - H_ij) U_ij.
template <typename Scalar>
struct VoteResult {
  Mat<Scalar> nodes;                // M×3
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> visibility;  // M
};

template <typename Scalar>
VoteResult<Scalar> vote(const Mat<Scalar>& cloud, const Mat<Scalar>& h,
                        const Mat<Scalar>& u, Scalar r, Index k) {
  const Index n = cloud.rows(), m = h.cols();
  check(h.rows() == n && u.rows() == n * m && u.cols() == 3,
        "vote: field shapes do not match the cloud");
  check(k >= 1 && k <= n, "vote: K must be between 1 and the cloud size");
  VoteResult<Scalar> out;
  out.nodes.resize(m, 3);
  out.visibility.resize(m);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (Index j = 0; j < m; ++j) {
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](int a, int b) {
                        if (h(a, j) != h(b, j)) return h(a, j) > h(b, j);
                        return a < b;
                      });
    Eigen::Matrix<Scalar, 1, 3> acc = Eigen::Matrix<Scalar, 1, 3>::Zero();
    Scalar wsum = 0;
    for (Index t = 0; t < k; ++t) {
      const Index i = order[static_cast<std::size_t>(t)];
      const Eigen::Matrix<Scalar, 1, 3> cand =
          cloud.row(i) + r * (Scalar(1) - h(i, j)) * u.row(i * m + j);
      acc += h(i, j) * cand;
      wsum += h(i, j);
    }
    if (wsum > 0) {
      out.nodes.row(j) = acc / wsum;
    } else {
      // Nothing scored this node; fall back to the plain mean so the output
      // stays finite, and report it invisible.
      acc.setZero();
      for (Index t = 0; t < k; ++t) {
        const Index i = order[static_cast<std::size_t>(t)];
        acc += cloud.row(i) + r * (Scalar(1) - h(i, j)) * u.row(i * m + j);
      }
      out.nodes.row(j) = acc / static_cast<Scalar>(k);
    }
    out.visibility(j) = h.col(j).maxCoeff();
  }
  return out;
}

// Losses. L_reg averages squared node error over nodes; L_vot averages the
// heatmap and offset terms over all N*M point-node pairs, with the offset
// term restricted to pairs that have a direction target (rows where the
// ground-truth offset is nonzero) — predicted rows are unit vectors, so
// unmatched pairs would otherwise contribute a constant floor.
template <typename Scalar>
struct LossTriple {
  Var<Scalar> reg;
  Var<Scalar> vot;
  Var<Scalar> total;
};

template <typename Scalar>
LossTriple<Scalar> losses(Tape<Scalar>& tape, Var<Scalar> y_reg, Var<Scalar> h,
                          Var<Scalar> u, const Mat<Scalar>& y_gt,
                          const VotingField<Scalar>& gt) {
  check(y_reg.value().rows() == y_gt.rows() &&
            h.value().cols() == gt.H.cols() && h.value().rows() == gt.H.rows(),
        "losses: prediction/ground-truth shapes do not match");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mask(gt.U.rows());
  for (Index i = 0; i < gt.U.rows(); ++i)
    mask(i) = gt.U.row(i).isZero(Scalar(0)) ? Scalar(0) : Scalar(1);
  LossTriple<Scalar> out;
  out.reg = numkit::scale(numkit::mse(y_reg, numkit::constant(tape, y_gt)),
                          Scalar(3));
  Var<Scalar> h_term = numkit::mse(h, numkit::constant(tape, gt.H));
  Var<Scalar> u_term = numkit::scale(
      numkit::mse(numkit::scale_rows(u, mask), numkit::constant(tape, gt.U)),
      Scalar(3));
  out.vot = numkit::add(h_term, u_term);
  out.total = numkit::add(out.reg, out.vot);
  return out;
}

// Node order is ambiguous (either rope end may be node 1): train on the
// better of forward and reversed ground truth.
template <typename Scalar>
Mat<Scalar> reverse_nodes(const Mat<Scalar>& y) {
  return y.colwise().reverse().eval();
}

template <typename Scalar>
struct OrientedLosses {
  LossTriple<Scalar> chosen;  // components of the better orientation
  Var<Scalar> total;          // min over orientations; train on this
  bool reversed = false;
};

template <typename Scalar>
OrientedLosses<Scalar> oriented_losses(Tape<Scalar>& tape, Var<Scalar> y_reg,
                                       Var<Scalar> h, Var<Scalar> u,
                                       const Mat<Scalar>& cloud,
                                       const Mat<Scalar>& y_gt, Scalar r) {
  const Mat<Scalar> y_rev = reverse_nodes(y_gt);
  const VotingField<Scalar> gt_fwd = gt_voting_field(cloud, y_gt, r);
  const VotingField<Scalar> gt_rev = gt_voting_field(cloud, y_rev, r);
  LossTriple<Scalar> fwd = losses(tape, y_reg, h, u, y_gt, gt_fwd);
  LossTriple<Scalar> rev = losses(tape, y_reg, h, u, y_rev, gt_rev);
  OrientedLosses<Scalar> out;
  out.total = numkit::select_min(fwd.total, rev.total);
  out.reversed = rev.total.value()(0, 0) < fwd.total.value()(0, 0);
  out.chosen = out.reversed ? rev : fwd;
  return out;
}

}  // namespace dloest::heads
