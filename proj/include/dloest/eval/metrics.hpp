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
#include <optional>
#include <vector>

#include "dloest/common.hpp"

namespace dloest::eval {

// Mean Euclidean node errors, split by the occlusion mask. A mean over an
// empty group is reported absent rather than zero.
struct NodeError {
  double all = 0.0;
  std::optional<double> unoccluded;
  std::optional<double> occluded;
};

inline NodeError node_error(const Matd& pred, const Matd& gt,
                            const std::vector<std::uint8_t>& occluded_mask) {
  check(pred.rows() == gt.rows() && pred.cols() == 3 && gt.cols() == 3,
        "node_error: shape mismatch");
  check(static_cast<Index>(occluded_mask.size()) == gt.rows(),
        "node_error: mask size mismatch");
  const Index m = gt.rows();
  double sum_all = 0, sum_occ = 0, sum_vis = 0;
  Index n_occ = 0;
  for (Index j = 0; j < m; ++j) {
    const double e = (pred.row(j) - gt.row(j)).norm();
    sum_all += e;
    if (occluded_mask[static_cast<std::size_t>(j)]) {
      sum_occ += e;
      ++n_occ;
    } else {
      sum_vis += e;
    }
  }
  NodeError out;
  out.all = sum_all / static_cast<double>(m);
  if (n_occ < m) out.unoccluded = sum_vis / static_cast<double>(m - n_occ);
  if (n_occ > 0) out.occluded = sum_occ / static_cast<double>(n_occ);
  return out;
}

// Node order is ambiguous end-to-end; score both orders of the ground truth
// (mask riding along) and keep the better overall mean.
inline NodeError aligned_node_error(const Matd& pred, const Matd& gt,
                                    const std::vector<std::uint8_t>& mask) {
  NodeError fwd = node_error(pred, gt, mask);
  std::vector<std::uint8_t> rmask(mask.rbegin(), mask.rend());
  NodeError rev = node_error(pred, gt.colwise().reverse().eval(), rmask);
  return rev.all < fwd.all ? rev : fwd;
}

// Population standard deviation of adjacent-node spacing.
inline double uniformity(const Matd& y) {
  check(y.rows() >= 3, "uniformity: need at least 3 nodes");
  const Index gaps = y.rows() - 1;
  Eigen::VectorXd d(gaps);
  for (Index j = 0; j < gaps; ++j) d(j) = (y.row(j + 1) - y.row(j)).norm();
  const double mean = d.mean();
  return std::sqrt((d.array() - mean).square().mean());
}

}  // namespace dloest::eval
