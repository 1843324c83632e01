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

#include <cmath>
#include <string>
#include <vector>

#include "dloest/common.hpp"
#include "dloest/encoder/config.hpp"
#include "dloest/geom.hpp"
#include "dloest/numkit/params.hpp"
#include "dloest/numkit/tape.hpp"

// Hierarchical point-cloud encoder: set-abstraction levels downsample by
// farthest-point sampling and pool a shared MLP over ball-query groups;
// feature propagation interpolates back up and mixes in skip features.
// Geometry (sampling, grouping, neighbor weights) stays off the tape; only
// features and parameters are differentiated.

namespace dloest::encoder {

using numkit::ParamStore;
using numkit::Tape;
using numkit::Var;

namespace detail {

// Feature width entering the shared MLP of abstraction level `l`: relative
// coordinates plus the previous level's output. The raw cloud carries its
// own coordinates as features, so level 0 sees relative + absolute.
inline Index sa_input_width(const EncoderConfig& cfg, std::size_t l) {
  return 3 + (l == 0 ? 3 : cfg.sa[l - 1].mlp.back());
}

// Per-point feature width stored at level `k`.
inline Index level_width(const EncoderConfig& cfg, std::size_t k) {
  return k == 0 ? 3 : cfg.sa[k - 1].mlp.back();
}

inline std::string sa_layer_name(std::size_t level, std::size_t layer) {
  return "enc.sa" + std::to_string(level) + ".mlp" + std::to_string(layer);
}

inline std::string fp_name(std::size_t step) {
  return "enc.fp" + std::to_string(step);
}

}  // namespace detail

// Registers weights (Glorot-uniform) and biases for every layer, in a fixed
// order so checkpoints stay stable. Biases start slightly positive: each
// group contains its own centroid with an all-zero relative coordinate, and
// a zero bias would park that unit exactly on the ReLU kink.
template <typename Scalar>
void add_encoder_params(ParamStore<Scalar>& params, const EncoderConfig& cfg,
                        Rng& rng) {
  auto add_layer = [&](const std::string& name, Index in, Index out) {
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    Mat<Scalar> w(in, out);
    for (Index r = 0; r < in; ++r)
      for (Index c = 0; c < out; ++c)
        w(r, c) = static_cast<Scalar>(rng.uniform(-s, s));
    params.add(name + ".w", w);
    params.add(name + ".b", Mat<Scalar>::Constant(1, out, Scalar(0.01)));
  };
  for (std::size_t l = 0; l < cfg.sa.size(); ++l) {
    Index in = detail::sa_input_width(cfg, l);
    for (std::size_t k = 0; k < cfg.sa[l].mlp.size(); ++k) {
      add_layer(detail::sa_layer_name(l, k), in, cfg.sa[l].mlp[k]);
      in = cfg.sa[l].mlp[k];
    }
  }
  const std::size_t levels = cfg.sa.size();
  for (std::size_t j = 0; j < levels; ++j) {
    const Index coarse = j == 0 ? cfg.sa.back().mlp.back() : cfg.fp[j - 1];
    const Index skip = detail::level_width(cfg, levels - 1 - j);
    add_layer(detail::fp_name(j), coarse + skip, cfg.fp[j]);
  }
}

template <typename Scalar>
Var<Scalar> bound_param(const ParamStore<Scalar>& params,
                        const std::vector<Var<Scalar>>& bound,
                        const std::string& name) {
  const int i = params.find(name);
  check(i >= 0, "missing parameter: " + name);
  return bound[static_cast<std::size_t>(i)];
}

template <typename Scalar>
Var<Scalar> dense_relu(Var<Scalar> x, Var<Scalar> w, Var<Scalar> b) {
  return numkit::relu(numkit::add_row(numkit::matmul(x, w), b));
}

template <typename Scalar>
struct LevelState {
  Mat<Scalar> points;    // row per point
  Var<Scalar> features;  // invalid at the raw-cloud level
  bool has_features = false;
};

// One abstraction level. Groups are gathered nearest-first so membership is
// stable under input permutation, which keeps the whole encoder
// permutation-invariant; underfull balls repeat their nearest member, which
// the max pool ignores.
template <typename Scalar>
LevelState<Scalar> set_abstraction(Tape<Scalar>& tape,
                                   const LevelState<Scalar>& in,
                                   const SALevel& level,
                                   const ParamStore<Scalar>& params,
                                   const std::vector<Var<Scalar>>& bound,
                                   std::size_t level_index) {
  const Index m = level.centroids;
  check(m <= in.points.rows(), "set_abstraction: more centroids than points");
  const std::vector<int> picked =
      geom::fps_indices(in.points, static_cast<int>(m),
                        geom::lex_min_index(in.points));
  LevelState<Scalar> out;
  out.points.resize(m, 3);
  std::vector<int> members;
  members.reserve(static_cast<std::size_t>(m * level.group));
  Mat<Scalar> rel(m * level.group, 3);
  for (Index c = 0; c < m; ++c) {
    out.points.row(c) = in.points.row(picked[static_cast<std::size_t>(c)]);
    const Eigen::Matrix<Scalar, 1, 3> center = out.points.row(c);
    const std::vector<int> ball = geom::ball_query(
        in.points, center, static_cast<Scalar>(level.radius), static_cast<int>(level.group));
    for (int g = 0; g < static_cast<int>(level.group); ++g) {
      members.push_back(ball[static_cast<std::size_t>(g)]);
      rel.row(c * level.group + g) =
          in.points.row(ball[static_cast<std::size_t>(g)]) - center;
    }
  }
  Var<Scalar> x = numkit::constant(tape, rel);
  if (in.has_features)
    x = numkit::concat_cols(x, numkit::gather_rows(in.features, members));
  for (std::size_t k = 0; k < level.mlp.size(); ++k) {
    x = dense_relu(x, bound_param(params, bound, detail::sa_layer_name(level_index, k) + ".w"),
                   bound_param(params, bound, detail::sa_layer_name(level_index, k) + ".b"));
  }
  out.features = numkit::rowgroup_max(x, level.group);
  out.has_features = true;
  return out;
}

// Inverse-squared-distance weights over the 3 nearest coarse points, rows
// normalized to sum to one; exact hits are clamped at 1e-10 so a coincident
// fine point copies its coarse feature.
template <typename Scalar>
void interpolation_weights(const Mat<Scalar>& fine_pts,
                           const Mat<Scalar>& coarse_pts, Mat<int>& idx,
                           Mat<Scalar>& w) {
  idx = geom::knn_indices(fine_pts, coarse_pts, 3);
  w.resize(fine_pts.rows(), 3);
  for (Index f = 0; f < fine_pts.rows(); ++f) {
    Scalar total = 0;
    for (int k = 0; k < 3; ++k) {
      const Scalar d = std::max<Scalar>(
          (coarse_pts.row(idx(f, k)) - fine_pts.row(f)).norm(),
          static_cast<Scalar>(1e-10));
      w(f, k) = Scalar(1) / (d * d);
      total += w(f, k);
    }
    w.row(f) /= total;
  }
}

template <typename Scalar>
Var<Scalar> interpolate_features(const Mat<Scalar>& fine_pts,
                                 const Mat<Scalar>& coarse_pts,
                                 Var<Scalar> coarse_feats) {
  Mat<int> idx;
  Mat<Scalar> w;
  interpolation_weights(fine_pts, coarse_pts, idx, w);
  return numkit::weighted_gather_rows(coarse_feats, idx, w);
}

// One propagation step onto `fine`: interpolate the coarse features, append
// the fine level's own features when it has any, and mix with one layer.
template <typename Scalar>
Var<Scalar> feature_propagation(const LevelState<Scalar>& fine,
                                const LevelState<Scalar>& coarse,
                                Var<Scalar> coarse_feats,
                                const ParamStore<Scalar>& params,
                                const std::vector<Var<Scalar>>& bound,
                                std::size_t step) {
  Var<Scalar> x =
      interpolate_features(fine.points, coarse.points, coarse_feats);
  if (fine.has_features) x = numkit::concat_cols(x, fine.features);
  return dense_relu(x,
                    bound_param(params, bound, detail::fp_name(step) + ".w"),
                    bound_param(params, bound, detail::fp_name(step) + ".b"));
}

// Full encoder: per-point features for `cloud`, one row per input point,
// `cfg.out_width()` columns. Deterministic in its inputs.
template <typename Scalar>
Var<Scalar> encode(Tape<Scalar>& tape, const Mat<Scalar>& cloud,
                   const EncoderConfig& cfg,
                   const ParamStore<Scalar>& params,
                   const std::vector<Var<Scalar>>& bound) {
  check(cloud.cols() == 3, "encode: cloud must be rows of xyz");
  validate(cfg, cloud.rows());
  std::vector<LevelState<Scalar>> levels;
  levels.reserve(cfg.sa.size() + 1);
  // The cloud's own coordinates double as its features: grouping then sees
  // absolute alongside relative positions, and the final propagation level
  // mixes raw position back into every point's feature.
  levels.push_back({cloud, numkit::constant(tape, cloud), true});
  for (std::size_t l = 0; l < cfg.sa.size(); ++l) {
    levels.push_back(
        set_abstraction(tape, levels.back(), cfg.sa[l], params, bound, l));
  }
  Var<Scalar> feats = levels.back().features;
  for (std::size_t j = 0; j < cfg.sa.size(); ++j) {
    const std::size_t fine = cfg.sa.size() - 1 - j;
    feats = feature_propagation(levels[fine], levels[fine + 1], feats, params,
                                bound, j);
  }
  return feats;
}

}  // namespace dloest::encoder
