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

#include "dloest/synth/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "dloest/synth/frame.hpp"

namespace dloest::synth {

namespace fs = std::filesystem;

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void write_frame(const std::string& path, const FrameRecord& rec) {
  check(rec.cloud.cols() == 3 && rec.nodes.cols() == 3,
        "frame record wants 3-column coordinates");
  check(static_cast<Index>(rec.occluded.size()) == rec.nodes.rows(),
        "occlusion mask length must equal node count");
  std::ofstream os(path, std::ios::binary);
  check(os.good(), "cannot open for writing: " + path);
  os.write(kFrameMagic, sizeof(kFrameMagic));
  write_u32(os, kFrameVersion);
  write_u32(os, static_cast<std::uint32_t>(rec.cloud.rows()));
  write_u32(os, static_cast<std::uint32_t>(rec.nodes.rows()));
  os.write(reinterpret_cast<const char*>(rec.cloud.data()),
           sizeof(float) * rec.cloud.size());
  os.write(reinterpret_cast<const char*>(rec.nodes.data()),
           sizeof(float) * rec.nodes.size());
  os.write(reinterpret_cast<const char*>(rec.occluded.data()),
           static_cast<std::streamsize>(rec.occluded.size()));
  write_u32(os, static_cast<std::uint32_t>(rec.meta_json.size()));
  os.write(rec.meta_json.data(),
           static_cast<std::streamsize>(rec.meta_json.size()));
  check(os.good(), "write failed: " + path);
}

FrameRecord read_frame(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), "cannot open frame: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  check(is.good() && std::memcmp(magic, kFrameMagic, 8) == 0,
        "bad frame magic in " + path);
  const std::uint32_t version = read_u32(is);
  check(version == kFrameVersion,
        "unsupported frame version " + std::to_string(version));
  const std::uint32_t n = read_u32(is);
  const std::uint32_t m = read_u32(is);
  check(is.good() && n > 0 && m >= 2, "corrupt frame header in " + path);

  FrameRecord rec;
  rec.cloud.resize(n, 3);
  rec.nodes.resize(m, 3);
  rec.occluded.resize(m);
  is.read(reinterpret_cast<char*>(rec.cloud.data()), sizeof(float) * n * 3);
  is.read(reinterpret_cast<char*>(rec.nodes.data()), sizeof(float) * m * 3);
  is.read(reinterpret_cast<char*>(rec.occluded.data()), m);
  const std::uint32_t meta_len = read_u32(is);
  rec.meta_json.resize(meta_len);
  is.read(rec.meta_json.data(), meta_len);
  check(is.good(), "truncated frame: " + path);
  return rec;
}

void validate(const DatasetConfig& cfg) {
  check(cfg.sequences >= 2, "need at least 2 sequences for a split");
  check(cfg.frames_per_sequence >= 1, "need at least 1 frame per sequence");
  check(cfg.nodes >= 2, "need at least 2 nodes");
  check(cfg.particles >= 2 * cfg.nodes,
        "particle count must be at least twice the node count");
  check(cfg.density > 0, "density must be positive");
  check(cfg.train_fraction > 0 && cfg.train_fraction < 1,
        "train fraction must lie in (0,1)");
  check(cfg.min_length > 0 && cfg.max_length >= cfg.min_length,
        "invalid length range");
  check(cfg.min_radius > 0 && cfg.max_radius >= cfg.min_radius,
        "invalid radius range");
  check(cfg.min_bend >= 0 && cfg.max_bend <= 1 && cfg.max_bend >= cfg.min_bend,
        "invalid bend stiffness range");
  check(cfg.voting_radius > 0, "voting radius must be positive");
}

DatasetSummary gen_dataset(const DatasetConfig& cfg, const std::string& out_dir,
                           const std::string& config_text) {
  validate(cfg);
  fs::create_directories(fs::path(out_dir) / "train");
  fs::create_directories(fs::path(out_dir) / "val");

  Rng master(mix_seed(cfg.seed, 0x64617461));
  std::vector<int> order(cfg.sequences);
  for (int i = 0; i < cfg.sequences; ++i) order[i] = i;
  master.shuffle(order);
  const int train_count = std::clamp(
      static_cast<int>(std::lround(cfg.train_fraction * cfg.sequences)), 1,
      cfg.sequences - 1);
  std::vector<int> train_seqs(order.begin(), order.begin() + train_count);
  std::vector<int> val_seqs(order.begin() + train_count, order.end());
  std::sort(train_seqs.begin(), train_seqs.end());
  std::sort(val_seqs.begin(), val_seqs.end());

  DatasetSummary summary;
  std::vector<std::string> train_index, val_index;

  for (int s = 0; s < cfg.sequences; ++s) {
    const std::uint64_t seq_seed = mix_seed(cfg.seed, s);
    Rng seq_rng(seq_seed);
    RopeSpec spec;
    spec.length = seq_rng.uniform(cfg.min_length, cfg.max_length);
    spec.radius = seq_rng.uniform(cfg.min_radius, cfg.max_radius);
    spec.bend_stiffness = seq_rng.uniform(cfg.min_bend, cfg.max_bend);
    spec.particles = cfg.particles;

    SimParams sim;
    const SimResult rollout = simulate_sequence(
        spec, sim, mix_seed(seq_seed, 1), cfg.frames_per_sequence);
    summary.rejected_frames += rollout.rejected;

    const bool is_train =
        std::binary_search(train_seqs.begin(), train_seqs.end(), s);
    const fs::path split_dir =
        fs::path(out_dir) / (is_train ? "train" : "val");

    for (int f = 0; f < cfg.frames_per_sequence; ++f) {
      const Matd nodes = resample_nodes(rollout.frames[f], cfg.nodes);
      const Matd cloud = render_cloud(rollout.frames[f], spec, cfg.density,
                                      mix_seed(seq_seed, 100 + f));
      FrameRecord rec;
      rec.cloud = cloud.cast<float>();
      rec.nodes = nodes.cast<float>();
      rec.occluded = occlusion_mask(cloud, nodes, cfg.voting_radius);

      nlohmann::json meta;
      meta["sequence"] = s;
      meta["frame"] = f;
      meta["seed"] = seq_seed;
      meta["rope_length"] = spec.length;
      meta["rope_radius"] = spec.radius;
      meta["bend_stiffness"] = spec.bend_stiffness;
      rec.meta_json = meta.dump();

      char name[32];
      std::snprintf(name, sizeof(name), "seq%04d_frm%04d.bin", s, f);
      write_frame((split_dir / name).string(), rec);
      (is_train ? train_index : val_index).push_back(name);
      ++(is_train ? summary.train_frames : summary.val_frames);
    }
  }

  for (const auto& [split, index] :
       {std::pair{"train", &train_index}, std::pair{"val", &val_index}}) {
    std::ofstream os(fs::path(out_dir) / split / "index.txt");
    for (const auto& name : *index) os << name << "\n";
    check(os.good(), "failed writing index for split " + std::string(split));
  }

  nlohmann::json manifest;
  manifest["config"] = config_text;
  manifest["config_hash"] = fnv1a(config_text);
  manifest["master_seed"] = cfg.seed;
  manifest["sequences"] = cfg.sequences;
  manifest["frames_per_sequence"] = cfg.frames_per_sequence;
  manifest["nodes"] = cfg.nodes;
  manifest["train_sequences"] = train_seqs;
  manifest["val_sequences"] = val_seqs;
  manifest["rejected_frames"] = summary.rejected_frames;
  const fs::path mpath = fs::path(out_dir) / "manifest.json";
  std::ofstream os(mpath);
  os << manifest.dump(2) << "\n";
  check(os.good(), "failed writing manifest");
  summary.manifest_path = mpath.string();
  return summary;
}

std::vector<std::string> read_index(const std::string& split_dir) {
  const fs::path index_path = fs::path(split_dir) / "index.txt";
  std::ifstream is(index_path);
  check(is.good(), "cannot open index: " + index_path.string());
  std::vector<std::string> paths;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) paths.push_back((fs::path(split_dir) / line).string());
  }
  check(!paths.empty(), "empty index: " + index_path.string());
  return paths;
}

}  // namespace dloest::synth
