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

#include "dloest/io/node_file.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dloest::io {

namespace {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  check(bool(is), "node file: truncated " + path);
  return v;
}

}  // namespace

void write_nodes(const std::string& path, const NodeFile& file) {
  check(file.nodes.cols() == 3, "node file: nodes must be M x 3");
  check(file.visibility.size() == file.nodes.rows(),
        "node file: one visibility entry per node");
  std::ofstream os(path, std::ios::binary);
  check(bool(os), "node file: cannot open " + path + " for writing");
  os.write(kNodeMagic, 8);
  write_pod(os, kNodeVersion);
  write_pod(os, static_cast<std::uint32_t>(file.nodes.rows()));
  os.write(reinterpret_cast<const char*>(file.nodes.data()),
           static_cast<std::streamsize>(sizeof(double) * file.nodes.size()));
  os.write(reinterpret_cast<const char*>(file.visibility.data()),
           static_cast<std::streamsize>(sizeof(double) * file.visibility.size()));
  write_pod(os, static_cast<std::uint32_t>(file.meta_json.size()));
  os.write(file.meta_json.data(),
           static_cast<std::streamsize>(file.meta_json.size()));
  check(bool(os), "node file: write failed for " + path);
}

NodeFile read_nodes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(bool(is), "node file: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  check(bool(is) && std::memcmp(magic, kNodeMagic, 8) == 0,
        "node file: bad magic in " + path);
  const auto version = read_pod<std::uint32_t>(is, path);
  check(version == kNodeVersion,
        "node file: unsupported version " + std::to_string(version));
  const auto m = static_cast<Index>(read_pod<std::uint32_t>(is, path));
  NodeFile file;
  file.nodes.resize(m, 3);
  is.read(reinterpret_cast<char*>(file.nodes.data()),
          static_cast<std::streamsize>(sizeof(double) * file.nodes.size()));
  file.visibility.resize(m);
  is.read(reinterpret_cast<char*>(file.visibility.data()),
          static_cast<std::streamsize>(sizeof(double) * file.visibility.size()));
  const auto meta_len = read_pod<std::uint32_t>(is, path);
  file.meta_json.resize(meta_len);
  is.read(file.meta_json.data(), meta_len);
  check(bool(is), "node file: truncated " + path);
  return file;
}

void write_xyz(const std::string& path, const Matd& points,
               const std::vector<std::pair<std::string, std::string>>& header) {
  check(points.cols() == 3, "xyz: points must be N x 3");
  std::ofstream os(path);
  check(bool(os), "xyz: cannot open " + path + " for writing");
  for (const auto& [key, value] : header) os << "# " << key << ": " << value << "\n";
  char line[128];
  for (Index i = 0; i < points.rows(); ++i) {
    std::snprintf(line, sizeof line, "%.17g %.17g %.17g\n", points(i, 0),
                  points(i, 1), points(i, 2));
    os << line;
  }
  check(bool(os), "xyz: write failed for " + path);
}

Matd read_xyz(const std::string& path) {
  std::ifstream is(path);
  check(bool(is), "xyz: cannot open " + path);
  std::vector<Eigen::Vector3d> rows;
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::istringstream ss(line);
    Eigen::Vector3d p;
    std::string rest;
    check(bool(ss >> p.x() >> p.y() >> p.z()) && !(ss >> rest),
          "xyz: " + path + " line " + std::to_string(n) +
              ": expected three numbers");
    rows.push_back(p);
  }
  check(!rows.empty(), "xyz: " + path + " has no points");
  Matd out(static_cast<Index>(rows.size()), 3);
  for (Index i = 0; i < out.rows(); ++i) out.row(i) = rows[static_cast<std::size_t>(i)];
  return out;
}

}  // namespace dloest::io
