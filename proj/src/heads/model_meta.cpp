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

#include "dloest/heads/model.hpp"

#include <json.hpp>

namespace dloest::heads {

namespace {
using nlohmann::json;

json widths_json(const std::vector<Index>& w) { return json(w); }

std::vector<Index> widths_from(const json& j) {
  return j.get<std::vector<Index>>();
}
}  // namespace

std::string model_meta_json(const ModelConfig& cfg) {
  json j;
  j["format"] = "dloest-model";
  j["version"] = 1;
  json sa = json::array();
  for (const auto& lvl : cfg.enc.sa) {
    sa.push_back({{"centroids", lvl.centroids},
                  {"radius", lvl.radius},
                  {"group", lvl.group},
                  {"mlp", widths_json(lvl.mlp)}});
  }
  j["encoder"] = {{"sa", sa}, {"fp", widths_json(cfg.enc.fp)}};
  j["heads"] = {{"nodes", cfg.heads.nodes},
                {"feature", cfg.heads.feature},
                {"reg_hidden", widths_json(cfg.heads.reg_hidden)},
                {"heat_hidden", widths_json(cfg.heads.heat_hidden)},
                {"offset_hidden", widths_json(cfg.heads.offset_hidden)},
                {"radius", cfg.heads.radius}};
  return j.dump();
}

ModelConfig parse_model_meta(const std::string& json_text) {
  json j = json::parse(json_text);
  check(j.value("format", "") == "dloest-model",
        "checkpoint metadata is not a model description");
  check(j.value("version", 0) == 1, "unsupported model metadata version");
  ModelConfig cfg;
  cfg.enc.sa.clear();
  for (const auto& lvl : j.at("encoder").at("sa")) {
    encoder::SALevel s;
    s.centroids = lvl.at("centroids").get<Index>();
    s.radius = lvl.at("radius").get<double>();
    s.group = lvl.at("group").get<Index>();
    s.mlp = widths_from(lvl.at("mlp"));
    cfg.enc.sa.push_back(s);
  }
  cfg.enc.fp = widths_from(j.at("encoder").at("fp"));
  const json& h = j.at("heads");
  cfg.heads.nodes = h.at("nodes").get<Index>();
  cfg.heads.feature = h.at("feature").get<Index>();
  cfg.heads.reg_hidden = widths_from(h.at("reg_hidden"));
  cfg.heads.heat_hidden = widths_from(h.at("heat_hidden"));
  cfg.heads.offset_hidden = widths_from(h.at("offset_hidden"));
  cfg.heads.radius = h.at("radius").get<double>();
  return cfg;
}

}  // namespace dloest::heads
