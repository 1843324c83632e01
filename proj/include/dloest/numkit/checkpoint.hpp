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

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "dloest/numkit/params.hpp"

namespace dloest::numkit {

// Checkpoint container. Layout (little-endian, see docs/FORMATS.md):
//   magic "DLOESTCK" | u32 version | u32 scalar_size | u32 meta_len | meta
//   | u32 count | count * { u32 name_len | name | u32 ndim | u64 dims[]
//                           | row-major payload }
inline constexpr char kCheckpointMagic[8] = {'D', 'L', 'O', 'E', 'S', 'T', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  check(bool(is), "checkpoint: truncated file");
  return v;
}

}  // namespace detail

template <typename Scalar>
void save_checkpoint(const std::string& path, const ParamStore<Scalar>& store,
                     const std::string& meta_json = "{}") {
  std::ofstream os(path, std::ios::binary);
  check(bool(os), "checkpoint: cannot open " + path + " for writing");
  os.write(kCheckpointMagic, 8);
  detail::write_pod(os, kCheckpointVersion);
  detail::write_pod(os, static_cast<std::uint32_t>(sizeof(Scalar)));
  detail::write_pod(os, static_cast<std::uint32_t>(meta_json.size()));
  os.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
  detail::write_pod(os, static_cast<std::uint32_t>(store.size()));
  for (int i = 0; i < static_cast<int>(store.size()); ++i) {
    const std::string& name = store.name(i);
    const Mat<Scalar>& m = store.value(i);
    detail::write_pod(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod(os, static_cast<std::uint32_t>(2));
    detail::write_pod(os, static_cast<std::uint64_t>(m.rows()));
    detail::write_pod(os, static_cast<std::uint64_t>(m.cols()));
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(sizeof(Scalar) * m.size()));
  }
  check(bool(os), "checkpoint: write failed for " + path);
}

// Returns the metadata JSON; tensors land in `store` in file order. Payloads
// stored at a different precision are converted on load.
template <typename Scalar>
std::string load_checkpoint(const std::string& path, ParamStore<Scalar>& store) {
  std::ifstream is(path, std::ios::binary);
  check(bool(is), "checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  check(bool(is) && std::memcmp(magic, kCheckpointMagic, 8) == 0,
        "checkpoint: bad magic in " + path);
  const auto version = detail::read_pod<std::uint32_t>(is);
  check(version == kCheckpointVersion,
        "checkpoint: unsupported version " + std::to_string(version));
  const auto scalar_size = detail::read_pod<std::uint32_t>(is);
  check(scalar_size == 4 || scalar_size == 8, "checkpoint: bad scalar size");
  const auto meta_len = detail::read_pod<std::uint32_t>(is);
  std::string meta(meta_len, '\0');
  is.read(meta.data(), meta_len);
  const auto count = detail::read_pod<std::uint32_t>(is);
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto name_len = detail::read_pod<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto ndim = detail::read_pod<std::uint32_t>(is);
    check(ndim == 2, "checkpoint: expected 2-d tensor for " + name);
    const auto rows = static_cast<Index>(detail::read_pod<std::uint64_t>(is));
    const auto cols = static_cast<Index>(detail::read_pod<std::uint64_t>(is));
    Mat<Scalar> m(rows, cols);
    if (scalar_size == sizeof(Scalar)) {
      is.read(reinterpret_cast<char*>(m.data()),
              static_cast<std::streamsize>(sizeof(Scalar) * m.size()));
    } else if (scalar_size == 4) {
      Mat<float> tmp(rows, cols);
      is.read(reinterpret_cast<char*>(tmp.data()),
              static_cast<std::streamsize>(sizeof(float) * tmp.size()));
      m = tmp.template cast<Scalar>();
    } else {
      Mat<double> tmp(rows, cols);
      is.read(reinterpret_cast<char*>(tmp.data()),
              static_cast<std::streamsize>(sizeof(double) * tmp.size()));
      m = tmp.template cast<Scalar>();
    }
    check(bool(is), "checkpoint: truncated payload for " + name);
    store.add(name, std::move(m));
  }
  return meta;
}

}  // namespace dloest::numkit
