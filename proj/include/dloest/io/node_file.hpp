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
#include <utility>
#include <vector>

#include "dloest/common.hpp"

namespace dloest::io {

// Estimated node sequence with per-node visibility. Binary layout
// (little-endian): magic "DLONODES" | u32 version | u32 nodes
// | f64 coords (row-major, M x 3) | f64 visibility (M) | u32 meta_len | meta.
// Doubles are written raw, so round trips are bit-exact.
inline constexpr char kNodeMagic[8] = {'D', 'L', 'O', 'N', 'O', 'D', 'E', 'S'};
inline constexpr std::uint32_t kNodeVersion = 1;

struct NodeFile {
  Matd nodes;                 // M x 3
  Eigen::VectorXd visibility; // M entries in [0, 1]
  std::string meta_json = "{}";
};

void write_nodes(const std::string& path, const NodeFile& file);
NodeFile read_nodes(const std::string& path);

// Plain-text export: '#'-prefixed "key: value" header lines, then one
// "x y z" line per row at full double precision.
void write_xyz(const std::string& path, const Matd& points,
               const std::vector<std::pair<std::string, std::string>>& header);

// Parses an XYZ file back into rows; '#' lines and blank lines are skipped.
Matd read_xyz(const std::string& path);

}  // namespace dloest::io
