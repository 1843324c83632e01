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

#include <string>

#include "dloest/encoder/pointnet.hpp"
#include "dloest/heads/heads.hpp"

// The full two-branch network: centroid-normalize the cloud, encode, then
// run both heads. All weights live in one ParamStore so a single checkpoint
// captures the model; the architecture itself travels in the checkpoint's
// metadata JSON.

namespace dloest::heads {

struct ModelConfig {
  encoder::EncoderConfig enc;
  HeadsConfig heads;
};

inline void validate(const ModelConfig& cfg, Index n_points) {
  encoder::validate(cfg.enc, n_points);
  validate(cfg.heads);
  check(cfg.heads.feature == cfg.enc.out_width(),
        "model config: heads expect feature width " +
            std::to_string(cfg.heads.feature) + " but the encoder emits " +
            std::to_string(cfg.enc.out_width()));
}

inline ModelConfig desk_model() {
  ModelConfig cfg;
  cfg.enc = encoder::desk_encoder();
  cfg.heads.feature = cfg.enc.out_width();
  cfg.heads.reg_hidden = {192, 128};
  cfg.heads.heat_hidden = {192, 128};
  cfg.heads.offset_hidden = {192, 128};
  return cfg;
}

inline ModelConfig paper_model() {
  ModelConfig cfg;
  cfg.enc = encoder::paper_encoder();
  cfg.heads.feature = cfg.enc.out_width();
  cfg.heads.reg_hidden = {512, 256};
  cfg.heads.heat_hidden = {256};
  cfg.heads.offset_hidden = {256};
  return cfg;
}

// Small enough for finite-difference checks of the composed network.
inline ModelConfig toy_model() {
  ModelConfig cfg;
  cfg.enc = encoder::toy_encoder();
  cfg.heads.nodes = 4;
  cfg.heads.feature = cfg.enc.out_width();
  cfg.heads.reg_hidden = {8};
  cfg.heads.heat_hidden = {8};
  cfg.heads.offset_hidden = {8};
  cfg.heads.radius = 0.3;
  return cfg;
}

template <typename Scalar>
void add_model_params(numkit::ParamStore<Scalar>& params,
                      const ModelConfig& cfg, Rng& rng) {
  encoder::add_encoder_params(params, cfg.enc, rng);
  add_heads_params(params, cfg.heads, rng);
}

template <typename Scalar>
struct ModelOutputs {
  Var<Scalar> y_reg;  // M×3, world frame
  Var<Scalar> h;      // N×M
  Var<Scalar> u;      // (N*M)×3, unit rows
  Eigen::Matrix<Scalar, 1, 3> centroid;
};

template <typename Scalar>
ModelOutputs<Scalar> model_forward(Tape<Scalar>& tape,
                                   const Mat<Scalar>& cloud_world,
                                   const ModelConfig& cfg,
                                   const numkit::ParamStore<Scalar>& params,
                                   const std::vector<Var<Scalar>>& bound) {
  validate(cfg, cloud_world.rows());
  ModelOutputs<Scalar> out;
  out.centroid = cloud_world.colwise().mean();
  Mat<Scalar> normalized = cloud_world.rowwise() - out.centroid;
  Var<Scalar> feats =
      encoder::encode(tape, normalized, cfg.enc, params, bound);
  out.y_reg = regression_forward(tape, feats, out.centroid, cfg.heads, params,
                                 bound);
  PredictedField<Scalar> field =
      voting_forward(feats, cfg.heads, params, bound);
  out.h = field.H;
  out.u = field.U;
  return out;
}

// Architecture description for checkpoint metadata; parsed back on load so
// inference needs only the checkpoint file.
std::string model_meta_json(const ModelConfig& cfg);
ModelConfig parse_model_meta(const std::string& json_text);

}  // namespace dloest::heads
