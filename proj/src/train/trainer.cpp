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

#include "dloest/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "dloest/eval/metrics.hpp"
#include "dloest/numkit/checkpoint.hpp"
#include "dloest/synth/dataset.hpp"
#include "dloest/synth/frame.hpp"

namespace dloest::train {

namespace {

using nlohmann::json;
using numkit::ParamStore;
using numkit::Tape;

struct Sample {
  Matf cloud;  // n_points x 3
  Matf nodes;  // M x 3
};

// Augment (occlusion ratio drawn per sample), then subsample to a fixed
// cloud size. Ratio-0 retry keeps rare over-occluded draws trainable.
Sample prepare_train_sample(const synth::FrameRecord& rec,
                            const TrainerConfig& cfg,
                            std::uint64_t sample_seed) {
  const Matd cloud = rec.cloud.cast<double>();
  const Matd nodes = rec.nodes.cast<double>();
  synth::AugmentConfig ac;
  ac.jitter_sigma = cfg.augment_jitter_mm * 1e-3;
  ac.rotation_deg = cfg.augment_rotation_deg;
  Rng ratio_rng(mix_seed(sample_seed, 0x726174));
  ac.occlusion_ratio = ratio_rng.uniform(0.0, cfg.augment_max_ratio);
  synth::AugmentResult aug =
      synth::augment(cloud, nodes, ac, mix_seed(sample_seed, 0x617567));
  if (!aug.usable) {
    ac.occlusion_ratio = 0.0;
    aug = synth::augment(cloud, nodes, ac, mix_seed(sample_seed, 0x617567));
  }
  const Matd x = synth::fps_sample(aug.cloud, static_cast<int>(cfg.n_points),
                                   mix_seed(sample_seed, 0x667073));
  return Sample{x.cast<float>(), aug.nodes.cast<float>()};
}

std::vector<synth::FrameRecord> load_frames(
    const std::vector<std::string>& paths, Index nodes) {
  std::vector<synth::FrameRecord> out;
  out.reserve(paths.size());
  for (const std::string& p : paths) {
    out.push_back(synth::read_frame(p));
    check(out.back().nodes.rows() == nodes,
          "train: frame " + p + " has " +
              std::to_string(out.back().nodes.rows()) + " nodes, model wants " +
              std::to_string(nodes));
  }
  return out;
}

struct ValErrors {
  double reg_mm = 0;
  double vot_mm = 0;
};

ValErrors validate_epoch(const TrainerConfig& cfg,
                         const std::vector<synth::FrameRecord>& frames,
                         const ParamStore<float>& params) {
  const Index k = std::min<Index>(cfg.top_k, std::max<Index>(1, cfg.n_points / 4));
  const std::vector<std::uint8_t> no_mask(
      static_cast<std::size_t>(cfg.model.heads.nodes), 0);
  double reg_sum = 0, vot_sum = 0;
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const synth::FrameRecord& rec = frames[fi];
    const Matd x = synth::fps_sample(
        rec.cloud.cast<double>(), static_cast<int>(cfg.n_points),
        mix_seed(mix_seed(cfg.seed, 0x76616c), fi));
    const Matf xf = x.cast<float>();
    Tape<float> tape;
    const auto bound = params.bind(tape);
    const auto out = heads::model_forward(tape, xf, cfg.model, params, bound);
    const Matd gt = rec.nodes.cast<double>();
    reg_sum += eval::aligned_node_error(out.y_reg.value().cast<double>(), gt,
                                        no_mask)
                   .all;
    const auto voted =
        heads::vote<float>(xf, out.h.value(), out.u.value(),
                           static_cast<float>(cfg.model.heads.radius), k);
    vot_sum += eval::aligned_node_error(voted.nodes.cast<double>(), gt, no_mask)
                   .all;
  }
  const double n = static_cast<double>(frames.size());
  return ValErrors{reg_sum / n * 1000.0, vot_sum / n * 1000.0};
}

constexpr const char* kOptM = "opt.m.";
constexpr const char* kOptV = "opt.v.";

void save_state(const std::string& path, const ParamStore<float>& params,
                const numkit::AdamState<float>& adam, const TrainerConfig& cfg,
                int epoch, int best_epoch, double best_val_vot_mm) {
  ParamStore<float> all;
  for (int i = 0; i < static_cast<int>(params.size()); ++i)
    all.add(params.name(i), params.value(i));
  for (int i = 0; i < static_cast<int>(params.size()); ++i)
    all.add(kOptM + params.name(i), adam.m[static_cast<std::size_t>(i)]);
  for (int i = 0; i < static_cast<int>(params.size()); ++i)
    all.add(kOptV + params.name(i), adam.v[static_cast<std::size_t>(i)]);
  json meta = json::parse(heads::model_meta_json(cfg.model));
  meta["train_state"] = {{"epoch", epoch},
                         {"step", adam.step},
                         {"best_epoch", best_epoch},
                         {"best_val_vot_mm", best_val_vot_mm}};
  numkit::save_checkpoint(path, all, meta.dump());
}

struct ResumedState {
  int epoch = 0;
  int best_epoch = -1;
  double best_val_vot_mm = 0;
};

ResumedState load_state(const std::string& path, ParamStore<float>& params,
                        numkit::AdamState<float>& adam) {
  ParamStore<float> all;
  const std::string meta_text = numkit::load_checkpoint(path, all);
  for (int i = 0; i < static_cast<int>(params.size()); ++i) {
    const std::string& name = params.name(i);
    const int pi = all.find(name);
    const int mi = all.find(kOptM + name);
    const int vi = all.find(kOptV + name);
    check(pi >= 0 && mi >= 0 && vi >= 0,
          "train: state file misses tensor " + name);
    check(all.value(pi).rows() == params.value(i).rows() &&
              all.value(pi).cols() == params.value(i).cols(),
          "train: state shape mismatch for " + name);
    params.value(i) = all.value(pi);
    adam.m[static_cast<std::size_t>(i)] = all.value(mi);
    adam.v[static_cast<std::size_t>(i)] = all.value(vi);
  }
  const json meta = json::parse(meta_text);
  check(meta.contains("train_state"), "train: not a training state file");
  const json& ts = meta.at("train_state");
  ResumedState rs;
  rs.epoch = ts.at("epoch").get<int>();
  adam.step = ts.at("step").get<long>();
  rs.best_epoch = ts.at("best_epoch").get<int>();
  rs.best_val_vot_mm = ts.at("best_val_vot_mm").get<double>();
  return rs;
}

}  // namespace

void validate(const TrainerConfig& cfg) {
  heads::validate(cfg.model, cfg.n_points);
  check(cfg.n_points >= 32, "train: n_points must be at least 32");
  check(cfg.learning_rate > 0, "train: learning rate must be positive");
  check(cfg.batch_size >= 1, "train: batch size must be positive");
  check(cfg.epochs >= 1, "train: epochs must be positive");
  check(cfg.decay_ratio > 0 && cfg.decay_ratio <= 1,
        "train: decay ratio must be in (0,1]");
  check(cfg.decay_interval >= 1, "train: decay interval must be positive");
  check(cfg.weight_decay >= 0, "train: weight decay must be non-negative");
  check(cfg.augment_jitter_mm >= 0, "train: jitter must be non-negative");
  check(cfg.augment_max_ratio >= 0 && cfg.augment_max_ratio <= 0.8,
        "train: occlusion ratio must be in [0, 0.8]");
  check(cfg.augment_rotation_deg >= 0 && cfg.augment_rotation_deg <= 180,
        "train: rotation range must be in [0, 180] degrees");
  check(cfg.top_k >= 1, "train: top_k must be positive");
}

TrainResult train_model(const TrainerConfig& cfg,
                        const std::vector<std::string>& train_paths,
                        const std::vector<std::string>& val_paths,
                        const std::string& out_dir,
                        const std::string& config_echo,
                        std::ostream* progress) {
  validate(cfg);
  check(!train_paths.empty(), "train: no training frames");
  check(!val_paths.empty(), "train: no validation frames");

  const Index m = cfg.model.heads.nodes;
  const std::vector<synth::FrameRecord> train_frames =
      load_frames(train_paths, m);
  const std::vector<synth::FrameRecord> val_frames = load_frames(val_paths, m);

  ParamStore<float> params;
  Rng init_rng(mix_seed(cfg.seed, 0x696e6974));
  heads::add_model_params(params, cfg.model, init_rng);

  const Index n_train = static_cast<Index>(train_frames.size());
  const long steps_per_epoch =
      (n_train + cfg.batch_size - 1) / cfg.batch_size;

  numkit::AdamState<float> adam;
  adam.lr = cfg.learning_rate;
  adam.weight_decay = cfg.weight_decay;
  adam.decay_ratio = cfg.decay_ratio;
  adam.decay_interval = steps_per_epoch * cfg.decay_interval;
  adam.init(params);

  TrainResult result;
  result.best_checkpoint = out_dir + "/best.ckpt";
  result.state_checkpoint = out_dir + "/state.ckpt";
  const std::string log_path = out_dir + "/train_log.jsonl";

  int start_epoch = 0;
  if (!cfg.resume.empty()) {
    const ResumedState rs = load_state(cfg.resume, params, adam);
    start_epoch = rs.epoch;
    result.best_epoch = rs.best_epoch;
    result.best_val_vot_mm = rs.best_val_vot_mm;
  }

  std::ofstream log(log_path, start_epoch > 0 ? std::ios::app : std::ios::out);
  check(bool(log), "train: cannot open " + log_path);
  {
    json header = {{"config_hash", fnv1a(config_echo)},
                   {"train_frames", train_frames.size()},
                   {"val_frames", val_frames.size()},
                   {"start_epoch", start_epoch}};
    log << header.dump() << "\n";
  }

  std::vector<int> order(static_cast<std::size_t>(n_train));

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const double epoch_lr = adam.effective_lr();
    // Rebuilt from identity every epoch so the visit order is a pure
    // function of (seed, epoch); resumed runs replay the same batches.
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(mix_seed(mix_seed(cfg.seed, 0x73687566), epoch));
    shuffle_rng.shuffle(order);
    const std::uint64_t epoch_seed =
        mix_seed(mix_seed(cfg.seed, 0x7472), epoch);

    double reg_sum = 0, vot_sum = 0;
    for (Index b0 = 0; b0 < n_train; b0 += cfg.batch_size) {
      const Index bn = std::min<Index>(cfg.batch_size, n_train - b0);
      auto grads = params.zero_grads();
      std::uint64_t last_seed = 0;
      for (Index bi = 0; bi < bn; ++bi) {
        const int fi = order[static_cast<std::size_t>(b0 + bi)];
        last_seed = mix_seed(epoch_seed, static_cast<std::uint64_t>(fi) + 1);
        const Sample s =
            prepare_train_sample(train_frames[static_cast<std::size_t>(fi)],
                                 cfg, last_seed);
        Tape<float> tape;
        const auto bound = params.bind(tape);
        const auto out =
            heads::model_forward(tape, s.cloud, cfg.model, params, bound);
        const auto ol = heads::oriented_losses(
            tape, out.y_reg, out.h, out.u, s.cloud, s.nodes,
            static_cast<float>(cfg.model.heads.radius));
        tape.backward(ol.total);
        params.accumulate_grads(bound, grads);
        reg_sum += ol.chosen.reg.value()(0, 0);
        vot_sum += ol.chosen.vot.value()(0, 0);
      }
      if (!std::isfinite(reg_sum) || !std::isfinite(vot_sum)) {
        throw NumericError(
            "train: non-finite loss at epoch " + std::to_string(epoch) +
            ", batch starting at " + std::to_string(b0) + ", last sample seed " +
            std::to_string(last_seed) + ", parameter norm " +
            std::to_string(std::sqrt(params.squared_norm())));
      }
      for (auto& g : grads) g /= static_cast<float>(bn);
      numkit::adam_step(params, grads, adam);
    }

    const ValErrors val = validate_epoch(cfg, val_frames, params);
    check(std::isfinite(val.reg_mm) && std::isfinite(val.vot_mm),
          "train: non-finite validation error at epoch " +
              std::to_string(epoch));

    EpochStats st;
    st.epoch = epoch;
    st.l_reg = reg_sum / static_cast<double>(n_train);
    st.l_vot = vot_sum / static_cast<double>(n_train);
    st.val_reg_mm = val.reg_mm;
    st.val_vot_mm = val.vot_mm;
    st.lr = epoch_lr;
    st.best = result.best_epoch < 0 || val.vot_mm < result.best_val_vot_mm;
    if (st.best) {
      result.best_epoch = epoch;
      result.best_val_vot_mm = val.vot_mm;
      json meta = json::parse(heads::model_meta_json(cfg.model));
      meta["trained_epoch"] = epoch;
      meta["val_vot_mm"] = val.vot_mm;
      numkit::save_checkpoint(result.best_checkpoint, params, meta.dump());
    }
    save_state(result.state_checkpoint, params, adam, cfg, epoch + 1,
               result.best_epoch, result.best_val_vot_mm);

    json line = {{"epoch", st.epoch},       {"l_reg", st.l_reg},
                 {"l_vot", st.l_vot},       {"val_reg_mm", st.val_reg_mm},
                 {"val_vot_mm", st.val_vot_mm}, {"lr", st.lr},
                 {"best", st.best}};
    log << line.dump() << "\n";
    log.flush();
    if (progress) {
      (*progress) << "epoch " << st.epoch << "  l_reg " << st.l_reg
                  << "  l_vot " << st.l_vot << "  val_reg " << st.val_reg_mm
                  << "mm  val_vot " << st.val_vot_mm << "mm  lr " << st.lr
                  << (st.best ? "  *" : "") << "\n";
    }
    result.history.push_back(st);
    ++result.epochs_run;
  }
  return result;
}

}  // namespace dloest::train
