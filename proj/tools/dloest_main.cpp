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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dloest/eval/sweep.hpp"
#include "dloest/fusion/cpd.hpp"
#include "dloest/gradcheck.hpp"
#include "dloest/heads/model.hpp"
#include "dloest/io/node_file.hpp"
#include "dloest/io/run_config.hpp"
#include "dloest/numkit/checkpoint.hpp"
#include "dloest/synth/dataset.hpp"
#include "dloest/synth/frame.hpp"
#include "dloest/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace dloest;

namespace {

io::RunConfig load_cfg(const std::string& path,
                       const std::vector<std::string>& sets) {
  return path.empty() ? io::parse_run_config("", sets)
                      : io::load_run_config(path, sets);
}

heads::ModelConfig preset_model(const io::RunConfig& cfg) {
  heads::ModelConfig m;
  if (cfg.preset == "desk") m = heads::desk_model();
  else if (cfg.preset == "paper") m = heads::paper_model();
  else m = heads::toy_model();
  m.heads.nodes = cfg.data.nodes;
  m.heads.radius = cfg.voting_radius;
  return m;
}

void write_config_echo(const std::string& dir, const io::RunConfig& cfg) {
  const std::string text = io::effective_config(cfg);
  std::ofstream os(dir + "/config.txt");
  check(bool(os), "cannot write " + dir + "/config.txt");
  os << text;
}

std::string opt_mm(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", *v * 1000.0);
  return buf;
}

void print_table(const eval::SweepResult& r) {
  std::printf("%-10s %-12s %6s %12s %12s %12s %12s\n", r.swept.c_str(),
              "method", "frames", "all_mm", "unocc_mm", "occ_mm", "unif_mm");
  for (const auto& row : r.table) {
    std::printf("%-10.4g %-12s %6d %12.3f %12s %12s %12.3f\n", row.setting,
                row.method.c_str(), row.frames, row.err_all * 1000.0,
                opt_mm(row.err_unoccluded).c_str(),
                opt_mm(row.err_occluded).c_str(), row.uniformity * 1000.0);
  }
  if (r.skipped_frames > 0)
    std::printf("(%d frame settings skipped: occlusion left too few points)\n",
                r.skipped_frames);
}

struct InferFiles {
  std::string tag;
  Matd nodes;
  Eigen::VectorXd visibility;
};

void write_estimates(const std::string& out_dir,
                     const std::vector<InferFiles>& estimates,
                     const std::string& source) {
  for (const auto& e : estimates) {
    io::NodeFile nf;
    nf.nodes = e.nodes;
    nf.visibility = e.visibility;
    nf.meta_json = std::string("{\"estimate\":\"") + e.tag + "\"}";
    io::write_nodes(out_dir + "/" + e.tag + ".nodes", nf);
    io::write_xyz(out_dir + "/" + e.tag + ".xyz", e.nodes,
                  {{"estimate", e.tag},
                   {"nodes", std::to_string(e.nodes.rows())},
                   {"source", source}});
  }
}

void write_visibility(const std::string& path, const Eigen::VectorXd& v) {
  std::ofstream os(path);
  check(bool(os), "cannot write " + path);
  char buf[32];
  for (Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v(i));
    os << buf;
  }
}

int run_gen_data(const std::string& cfg_path,
                 const std::vector<std::string>& sets,
                 const std::string& out_dir) {
  const io::RunConfig cfg = load_cfg(cfg_path, sets);
  const auto summary =
      synth::gen_dataset(cfg.data, out_dir, io::effective_config(cfg));
  std::printf("dataset: %d train + %d val frames (%d rejected draws)\n",
              summary.train_frames, summary.val_frames,
              summary.rejected_frames);
  std::printf("manifest: %s\n", summary.manifest_path.c_str());
  return 0;
}

int run_train(const std::string& cfg_path, const std::vector<std::string>& sets,
              const std::string& data_dir, const std::string& out_dir,
              const std::string& resume, int overfit) {
  const io::RunConfig cfg = load_cfg(cfg_path, sets);
  train::TrainerConfig tc;
  tc.model = preset_model(cfg);
  tc.n_points = cfg.n_points;
  tc.learning_rate = cfg.learning_rate;
  tc.batch_size = cfg.batch_size;
  tc.epochs = cfg.epochs;
  tc.decay_ratio = cfg.decay_ratio;
  tc.decay_interval = cfg.decay_interval;
  tc.weight_decay = cfg.weight_decay;
  tc.seed = cfg.train_seed;
  tc.augment_jitter_mm = cfg.augment_jitter_mm;
  tc.augment_max_ratio = cfg.augment_max_ratio;
  tc.augment_rotation_deg = cfg.augment_rotation_deg;
  tc.top_k = cfg.top_k;
  tc.resume = resume;

  std::vector<std::string> train_paths = synth::read_index(data_dir + "/train");
  std::vector<std::string> val_paths = synth::read_index(data_dir + "/val");
  if (overfit > 0) {
    check(overfit <= static_cast<int>(train_paths.size()),
          "train: --overfit wants more frames than the split holds");
    train_paths.resize(static_cast<std::size_t>(overfit));
    val_paths = train_paths;  // memorization check: validate on the same frames
    tc.augment_jitter_mm = 0.0;
    tc.augment_max_ratio = 0.0;
    tc.augment_rotation_deg = 0.0;
    tc.decay_ratio = 1.0;  // tiny epochs would decay the lr to nothing
  }

  fs::create_directories(out_dir);
  write_config_echo(out_dir, cfg);
  const auto result = train::train_model(tc, train_paths, val_paths, out_dir,
                                         io::effective_config(cfg), &std::cout);
  std::printf("best epoch %d  val_vot %.3f mm\n", result.best_epoch,
              result.best_val_vot_mm);
  std::printf("checkpoint: %s\n", result.best_checkpoint.c_str());
  return 0;
}

int run_eval(const std::string& cfg_path, const std::vector<std::string>& sets,
             const std::string& ckpt, const std::string& data_dir,
             const std::string& out_dir, const std::string& sweep,
             const std::string& split) {
  const io::RunConfig cfg = load_cfg(cfg_path, sets);
  numkit::ParamStore<float> params;
  const std::string meta = numkit::load_checkpoint(ckpt, params);
  const heads::ModelConfig model = heads::parse_model_meta(meta);

  eval::SweepConfig sc;
  sc.ratios = cfg.eval_ratios;
  sc.jitters_mm = cfg.eval_jitters_mm;
  sc.thresholds = cfg.eval_thresholds;
  sc.fixed_ratio = cfg.eval_fixed_ratio;
  sc.n_points = cfg.n_points;
  sc.top_k = cfg.top_k;
  sc.voting_radius = model.heads.radius;  // must match the trained field
  sc.fusion = cfg.fusion;
  sc.seed = cfg.eval_seed;
  sc.max_frames = cfg.eval_max_frames;

  const auto paths = synth::read_index(data_dir + "/" + split);
  fs::create_directories(out_dir);
  write_config_echo(out_dir, cfg);

  if (sweep == "occlusion" || sweep == "all") {
    const auto r = eval::occlusion_sweep(model, params, paths, sc,
                                         out_dir + "/occlusion.jsonl",
                                         out_dir + "/occlusion.csv");
    print_table(r);
  }
  if (sweep == "noise" || sweep == "all") {
    const auto r =
        eval::noise_sweep(model, params, paths, sc, out_dir + "/noise.jsonl",
                          out_dir + "/noise.csv");
    print_table(r);
  }
  if (sweep == "threshold" || sweep == "all") {
    const auto r = eval::threshold_sweep(model, params, paths, sc,
                                         out_dir + "/threshold.jsonl",
                                         out_dir + "/threshold.csv");
    print_table(r);
  }
  return 0;
}

int run_infer(const std::string& ckpt, const std::string& cloud_path,
              const std::string& frame_path, bool gt_replay,
              const std::string& out_dir, Index n_points, Index top_k,
              double radius, const fusion::FusionConfig& fc,
              std::uint64_t seed) {
  fs::create_directories(out_dir);
  if (gt_replay) {
    check(!frame_path.empty(), "infer: --gt-replay needs --frame");
    const synth::FrameRecord rec = synth::read_frame(frame_path);
    const Matd x =
        synth::fps_sample(rec.cloud.cast<double>(), static_cast<int>(n_points),
                          mix_seed(seed, 0x667073));
    const Matd gt = rec.nodes.cast<double>();
    const auto field = heads::gt_voting_field<double>(x, gt, radius);
    const Index k = std::min<Index>(top_k, std::max<Index>(1, n_points / 4));
    const auto voted = heads::vote<double>(x, field.H, field.U, radius, k);
    write_estimates(out_dir, {{"voting", voted.nodes, voted.visibility.cast<double>()}},
                    frame_path);
    write_visibility(out_dir + "/visibility.txt", voted.visibility);
    const double dev = (voted.nodes - gt).rowwise().norm().maxCoeff();
    std::printf("gt replay: max node deviation %.3e m over %d nodes\n", dev,
                static_cast<int>(gt.rows()));
    return 0;
  }

  check(!ckpt.empty() && !cloud_path.empty(),
        "infer: --checkpoint and --cloud are required");
  const Matd cloud = io::read_xyz(cloud_path);
  check(cloud.rows() >= 32, "infer: need at least 32 points, got " +
                                std::to_string(cloud.rows()));
  numkit::ParamStore<float> params;
  const std::string meta = numkit::load_checkpoint(ckpt, params);
  const heads::ModelConfig model = heads::parse_model_meta(meta);

  const Matd x = synth::fps_sample(cloud, static_cast<int>(n_points),
                                   mix_seed(seed, 0x667073));
  const Matf xf = x.cast<float>();
  numkit::Tape<float> tape;
  const auto bound = params.bind(tape);
  const auto out = heads::model_forward(tape, xf, model, params, bound);
  const Index k = std::min<Index>(top_k, std::max<Index>(1, n_points / 4));
  const auto voted =
      heads::vote<float>(xf, out.h.value(), out.u.value(),
                         static_cast<float>(model.heads.radius), k);
  const Matd y_reg = out.y_reg.value().cast<double>();
  const Matd y_vot = voted.nodes.cast<double>();
  const Eigen::VectorXd vis = voted.visibility.cast<double>();
  const auto fused = fusion::fuse(y_reg, y_vot, vis, fc);

  write_estimates(out_dir,
                  {{"regression", y_reg, Eigen::VectorXd::Ones(y_reg.rows())},
                   {"voting", y_vot, vis},
                   {"fused", fused.nodes, vis}},
                  cloud_path);
  write_visibility(out_dir + "/visibility.txt", vis);
  std::printf("nodes: %d  visible: %d/%d  %s\n", static_cast<int>(y_reg.rows()),
              static_cast<int>(fused.selected.size()),
              static_cast<int>(y_reg.rows()),
              fused.fused ? "fused" : "regression fallback");
  if (fused.fused)
    std::printf("sigma2 %.3e after %d iterations\n", fused.sigma2,
                fused.iterations);
  return 0;
}

int run_fuse(const std::string& reg_path, const std::string& vot_path,
             const std::string& out_path, const fusion::FusionConfig& fc) {
  const io::NodeFile reg = io::read_nodes(reg_path);
  const io::NodeFile vot = io::read_nodes(vot_path);
  check(reg.nodes.rows() == vot.nodes.rows(),
        "fuse: node counts differ between inputs");
  const auto outcome = fusion::fuse(reg.nodes, vot.nodes, vot.visibility, fc);
  io::NodeFile nf;
  nf.nodes = outcome.nodes;
  nf.visibility = vot.visibility;
  nf.meta_json = std::string("{\"estimate\":\"fused\",\"fused\":") +
                 (outcome.fused ? "true" : "false") + "}";
  io::write_nodes(out_path, nf);
  io::write_xyz(fs::path(out_path).replace_extension(".xyz").string(),
                outcome.nodes,
                {{"estimate", "fused"},
                 {"nodes", std::to_string(outcome.nodes.rows())}});
  std::printf("%s: %d/%d visible controls\n",
              outcome.fused ? "fused" : "regression fallback",
              static_cast<int>(outcome.selected.size()),
              static_cast<int>(outcome.nodes.rows()));
  return 0;
}

int run_gradcheck(std::uint64_t seed, const std::string& corrupt) {
  const auto res = gradcheck::run_suite(seed, corrupt);
  for (const auto& r : res.reports)
    std::printf("%-22s %5ld entries  max_rel_err %.3e  %s\n", r.name.c_str(),
                r.entries, r.max_rel_err, r.pass ? "pass" : "FAIL");
  std::printf("gradcheck: %s (max relative error %.3e)\n",
              res.pass ? "PASS" : "FAIL", res.max_rel_err);
  return res.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dloest: DLO node-sequence estimation from point clouds"};
  app.require_subcommand(1);

  std::string cfg_path, data_dir, out_dir, ckpt, resume;
  std::vector<std::string> sets;
  int overfit = 0;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--config", cfg_path, "key=value config file");
  gen->add_option("--set", sets, "override, e.g. --set data.seed=2");
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* train = app.add_subcommand("train", "Train the two-branch model");
  train->add_option("--config", cfg_path, "key=value config file");
  train->add_option("--set", sets, "override, e.g. --set train.epochs=5");
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--resume", resume, "state.ckpt from a previous run");
  train->add_option("--overfit", overfit,
                    "truncate to N frames, disable augmentation and lr decay");

  std::string sweep = "all", split = "val";
  auto* ev = app.add_subcommand("eval", "Sweep occlusion/noise/threshold");
  ev->add_option("--config", cfg_path, "key=value config file");
  ev->add_option("--set", sets, "override");
  ev->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--out", out_dir, "output directory")->required();
  ev->add_option("--sweep", sweep, "occlusion|noise|threshold|all")
      ->check(CLI::IsMember({"occlusion", "noise", "threshold", "all"}));
  ev->add_option("--split", split, "train|val")
      ->check(CLI::IsMember({"train", "val"}));

  std::string cloud_path, frame_path;
  bool gt_replay = false;
  Index n_points = 256, top_k = 64;
  double radius = 0.02;
  fusion::FusionConfig fc;
  std::uint64_t seed = 5;
  auto* infer = app.add_subcommand("infer", "Estimate nodes for one cloud");
  infer->add_option("--checkpoint", ckpt, "trained checkpoint");
  infer->add_option("--cloud", cloud_path, "input cloud (xyz text)");
  infer->add_option("--frame", frame_path, "stored frame (gt replay)");
  infer->add_flag("--gt-replay", gt_replay,
                  "bypass the network, vote on the exact gt field");
  infer->add_option("--out", out_dir, "output directory")->required();
  infer->add_option("--n-points", n_points, "cloud size fed to the model");
  infer->add_option("--top-k", top_k, "votes kept per node");
  infer->add_option("--radius", radius, "field radius (gt replay only)");
  infer->add_option("--threshold", fc.visibility_threshold, "fusion T");
  infer->add_option("--lambda", fc.lambda, "fusion regularization");
  infer->add_option("--beta", fc.beta, "fusion kernel width");
  infer->add_option("--seed", seed, "subsampling seed");

  std::string reg_path, vot_path, fuse_out;
  auto* fu = app.add_subcommand("fuse", "Fuse stored branch outputs");
  fu->add_option("--regression", reg_path, "regression .nodes file")->required();
  fu->add_option("--voting", vot_path, "voting .nodes file")->required();
  fu->add_option("--out", fuse_out, "fused .nodes output path")->required();
  fu->add_option("--threshold", fc.visibility_threshold, "fusion T");
  fu->add_option("--lambda", fc.lambda, "fusion regularization");
  fu->add_option("--beta", fc.beta, "fusion kernel width");
  fu->add_option("--max-iterations", fc.max_iterations, "fixed-point cap");
  fu->add_option("--tolerance", fc.tolerance, "sigma2 convergence tolerance");
  fu->add_option("--min-visible", fc.min_visible, "controls required to fuse");

  std::uint64_t gc_seed = 1;
  std::string corrupt;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference audit");
  gc->add_option("--seed", gc_seed, "probe seed");
  gc->add_option("--corrupt", corrupt,
                 "test hook: corrupt the named entry's gradient");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) return run_gen_data(cfg_path, sets, out_dir);
    if (train->parsed())
      return run_train(cfg_path, sets, data_dir, out_dir, resume, overfit);
    if (ev->parsed())
      return run_eval(cfg_path, sets, ckpt, data_dir, out_dir, sweep, split);
    if (infer->parsed())
      return run_infer(ckpt, cloud_path, frame_path, gt_replay, out_dir,
                       n_points, top_k, radius, fc, seed);
    if (fu->parsed()) return run_fuse(reg_path, vot_path, fuse_out, fc);
    if (gc->parsed()) return run_gradcheck(gc_seed, corrupt);
  } catch (const io::ConfigError& e) {
    std::cerr << "error: [config] " << e.what() << "\n";
    return 2;
  } catch (const ContractViolation& e) {
    std::cerr << "error: [contract] " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: [numeric] " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: [runtime] " << e.what() << "\n";
    return 1;
  }
  return 0;
}
