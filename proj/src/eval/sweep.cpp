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

#include "dloest/eval/sweep.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "dloest/heads/heads.hpp"
#include "dloest/synth/dataset.hpp"
#include "dloest/synth/frame.hpp"

namespace dloest::eval {

namespace {

using nlohmann::json;

struct Accumulator {
  int frames = 0;
  double all = 0, unocc = 0, occ = 0, uni = 0;
  int n_unocc = 0, n_occ = 0;

  void add(const NodeError& e, double uniformity_value) {
    ++frames;
    all += e.all;
    uni += uniformity_value;
    if (e.unoccluded) {
      unocc += *e.unoccluded;
      ++n_unocc;
    }
    if (e.occluded) {
      occ += *e.occluded;
      ++n_occ;
    }
  }

  MethodAggregate finish(const std::string& method, double setting) const {
    MethodAggregate m;
    m.method = method;
    m.setting = setting;
    m.frames = frames;
    if (frames > 0) {
      m.err_all = all / frames;
      m.uniformity = uni / frames;
    }
    if (n_unocc > 0) m.err_unoccluded = unocc / n_unocc;
    if (n_occ > 0) m.err_occluded = occ / n_occ;
    return m;
  }
};

json frame_record(const std::string& swept, double setting,
                  const std::string& method, int frame, const NodeError& e,
                  double uni, bool fused) {
  json j;
  j["swept"] = swept;
  j["setting"] = setting;
  j["method"] = method;
  j["frame"] = frame;
  j["err_all"] = e.all;
  j["err_unoccluded"] =
      e.unoccluded ? json(*e.unoccluded) : json(nullptr);
  j["err_occluded"] = e.occluded ? json(*e.occluded) : json(nullptr);
  j["uniformity"] = uni;
  j["fused"] = fused;
  return j;
}

// Settings are (occlusion ratio, jitter mm, fusion threshold) triples; the
// swept label picks which one lands in the reports.
struct Setting {
  double value = 0;
  double ratio = 0;
  double jitter_mm = 0;
  double threshold = 0.5;
};

SweepResult run_sweep(const heads::ModelConfig& model,
                      const numkit::ParamStore<float>& params,
                      const std::vector<std::string>& frame_paths,
                      const SweepConfig& cfg, const std::string& swept,
                      const std::vector<Setting>& settings,
                      const std::string& jsonl_path,
                      const std::string& csv_path) {
  check(!frame_paths.empty(), "sweep: no frames to evaluate");
  check(cfg.n_points >= 4, "sweep: n_points too small");
  const Index k = std::min<Index>(cfg.top_k, std::max<Index>(1, cfg.n_points / 4));
  const int limit = cfg.max_frames > 0
                        ? std::min<int>(cfg.max_frames,
                                        static_cast<int>(frame_paths.size()))
                        : static_cast<int>(frame_paths.size());

  std::ofstream jsonl;
  if (!jsonl_path.empty()) {
    jsonl.open(jsonl_path, std::ios::trunc);
    check(bool(jsonl), "sweep: cannot open " + jsonl_path);
  }

  SweepResult result;
  result.swept = swept;
  for (std::size_t si = 0; si < settings.size(); ++si) {
    const Setting& st = settings[si];
    fusion::FusionConfig fcfg = cfg.fusion;
    fcfg.visibility_threshold = st.threshold;
    Accumulator acc_reg, acc_vot, acc_fus;
    for (int fi = 0; fi < limit; ++fi) {
      const synth::FrameRecord rec =
          synth::read_frame(frame_paths[static_cast<std::size_t>(fi)]);
      const Matd cloud = rec.cloud.cast<double>();
      const Matd nodes = rec.nodes.cast<double>();

      synth::AugmentConfig aug_cfg;
      aug_cfg.occlusion_ratio = st.ratio;
      aug_cfg.jitter_sigma = st.jitter_mm * 1e-3;
      aug_cfg.rotation_deg = 0.0;
      const std::uint64_t frame_seed =
          mix_seed(mix_seed(cfg.seed, 0x6576616c), // eval salt
                   static_cast<std::uint64_t>(si) * 1000003u +
                       static_cast<std::uint64_t>(fi));
      const synth::AugmentResult aug =
          synth::augment(cloud, nodes, aug_cfg, frame_seed);
      if (!aug.usable) {
        ++result.skipped_frames;
        continue;
      }
      const std::vector<std::uint8_t> mask =
          synth::occlusion_mask(aug.cloud, aug.nodes, cfg.voting_radius);
      const Matd x = synth::fps_sample(aug.cloud, static_cast<int>(cfg.n_points),
                                       mix_seed(frame_seed, 0x667073));

      numkit::Tape<float> tape;
      const auto bound = params.bind(tape);
      const Mat<float> xf = x.cast<float>();
      const auto out = heads::model_forward(tape, xf, model, params, bound);
      const Matd y_reg = out.y_reg.value().cast<double>();
      const auto voted = heads::vote<float>(
          xf, out.h.value(), out.u.value(),
          static_cast<float>(cfg.voting_radius), k);
      const Matd y_vot = voted.nodes.cast<double>();
      const Eigen::VectorXd vis = voted.visibility.cast<double>();
      const fusion::FusionOutcome fus = fusion::fuse(y_reg, y_vot, vis, fcfg);

      struct Row {
        const char* method;
        const Matd* pred;
        Accumulator* acc;
        bool fused;
      } rows[] = {{"regression", &y_reg, &acc_reg, false},
                  {"voting", &y_vot, &acc_vot, false},
                  {"fusion", &fus.nodes, &acc_fus, fus.fused}};
      for (const Row& row : rows) {
        const NodeError e = aligned_node_error(*row.pred, aug.nodes, mask);
        const double uni = uniformity(*row.pred);
        row.acc->add(e, uni);
        if (jsonl.is_open()) {
          jsonl << frame_record(swept, st.value, row.method, fi, e, uni,
                                row.fused)
                       .dump()
                << "\n";
        }
      }
    }
    result.table.push_back(acc_reg.finish("regression", st.value));
    result.table.push_back(acc_vot.finish("voting", st.value));
    result.table.push_back(acc_fus.finish("fusion", st.value));
  }
  if (jsonl.is_open()) check(bool(jsonl), "sweep: JSONL write failed");
  if (!csv_path.empty()) write_csv(csv_path, result);
  return result;
}

}  // namespace

void write_csv(const std::string& path, const SweepResult& result) {
  std::ofstream os(path, std::ios::trunc);
  check(bool(os), "sweep: cannot open " + path);
  os << result.swept
     << ",method,frames,err_all_mm,err_unoccluded_mm,err_occluded_mm,"
        "uniformity_mm\n";
  char buf[64];
  auto mm = [&](double v) -> std::string {
    std::snprintf(buf, sizeof buf, "%.6f", v * 1000.0);
    return buf;
  };
  auto opt_mm = [&](const std::optional<double>& v) -> std::string {
    return v ? mm(*v) : std::string();
  };
  for (const MethodAggregate& m : result.table) {
    std::snprintf(buf, sizeof buf, "%.4g", m.setting);
    os << buf << "," << m.method << "," << m.frames << "," << mm(m.err_all)
       << "," << opt_mm(m.err_unoccluded) << "," << opt_mm(m.err_occluded)
       << "," << mm(m.uniformity) << "\n";
  }
  check(bool(os), "sweep: CSV write failed");
}

SweepResult occlusion_sweep(const heads::ModelConfig& model,
                            const numkit::ParamStore<float>& params,
                            const std::vector<std::string>& frame_paths,
                            const SweepConfig& cfg,
                            const std::string& jsonl_path,
                            const std::string& csv_path) {
  std::vector<Setting> settings;
  for (double r : cfg.ratios)
    settings.push_back({r, r, 0.0, cfg.fusion.visibility_threshold});
  return run_sweep(model, params, frame_paths, cfg, "ratio", settings,
                   jsonl_path, csv_path);
}

SweepResult noise_sweep(const heads::ModelConfig& model,
                        const numkit::ParamStore<float>& params,
                        const std::vector<std::string>& frame_paths,
                        const SweepConfig& cfg, const std::string& jsonl_path,
                        const std::string& csv_path) {
  std::vector<Setting> settings;
  for (double j : cfg.jitters_mm)
    settings.push_back({j, cfg.fixed_ratio, j, cfg.fusion.visibility_threshold});
  return run_sweep(model, params, frame_paths, cfg, "jitter_mm", settings,
                   jsonl_path, csv_path);
}

SweepResult threshold_sweep(const heads::ModelConfig& model,
                            const numkit::ParamStore<float>& params,
                            const std::vector<std::string>& frame_paths,
                            const SweepConfig& cfg,
                            const std::string& jsonl_path,
                            const std::string& csv_path) {
  std::vector<Setting> settings;
  for (double t : cfg.thresholds)
    settings.push_back({t, cfg.fixed_ratio, 0.0, t});
  return run_sweep(model, params, frame_paths, cfg, "threshold", settings,
                   jsonl_path, csv_path);
}

}  // namespace dloest::eval
