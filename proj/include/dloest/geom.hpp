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

#include <algorithm>
#include <vector>

#include "dloest/common.hpp"

namespace dloest::geom {

// Point-set primitives shared by data generation and the encoder. All
// orderings break distance ties lexicographically on coordinates so results
// are invariant to input point permutation.

template <typename Scalar>
bool lex_less(const Mat<Scalar>& m, Index a, Index b) {
  for (Index c = 0; c < m.cols(); ++c) {
    if (m(a, c) != m(b, c)) return m(a, c) < m(b, c);
  }
  return false;
}

template <typename Scalar>
Index lex_min_index(const Mat<Scalar>& pts) {
  check(pts.rows() > 0, "lex_min_index: empty point set");
  Index best = 0;
  for (Index i = 1; i < pts.rows(); ++i) {
    if (lex_less(pts, i, best)) best = i;
  }
  return best;
}

// Greedy farthest-point selection of n indices starting at `start`.
// Requires n <= pts.rows().
template <typename Scalar>
std::vector<int> fps_indices(const Mat<Scalar>& pts, int n, Index start) {
  const Index rows = pts.rows();
  check(rows > 0, "fps: empty point set");
  check(n >= 1 && n <= rows, "fps: invalid sample count");
  check(start >= 0 && start < rows, "fps: start index out of range");

  std::vector<int> picked;
  picked.reserve(n);
  std::vector<Scalar> dist(rows, std::numeric_limits<Scalar>::max());
  Index current = start;
  for (int k = 0; k < n; ++k) {
    picked.push_back(static_cast<int>(current));
    Index next = -1;
    for (Index i = 0; i < rows; ++i) {
      const Scalar d = (pts.row(i) - pts.row(current)).squaredNorm();
      if (d < dist[i]) dist[i] = d;
      if (next < 0 || dist[i] > dist[next] ||
          (dist[i] == dist[next] && lex_less(pts, i, next))) {
        next = i;
      }
    }
    current = next;
  }
  return picked;
}

// Indices of points within `radius` of `center`, nearest first, truncated to
// group_size; underfull groups repeat the nearest member. The center point
// itself always qualifies when it belongs to `pts`.
template <typename Scalar>
std::vector<int> ball_query(const Mat<Scalar>& pts,
                            const Eigen::Matrix<Scalar, 1, 3>& center,
                            Scalar radius, int group_size) {
  check(group_size >= 1, "ball_query: group size must be positive");
  const Scalar r2 = radius * radius;
  std::vector<std::pair<Scalar, int>> hits;
  for (Index i = 0; i < pts.rows(); ++i) {
    const Scalar d = (pts.row(i) - center).squaredNorm();
    if (d <= r2) hits.emplace_back(d, static_cast<int>(i));
  }
  check(!hits.empty(), "ball_query: empty ball");
  std::sort(hits.begin(), hits.end(),
            [&](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first < b.first;
              return lex_less(pts, a.second, b.second);
            });
  std::vector<int> out;
  out.reserve(group_size);
  for (int k = 0; k < group_size; ++k) {
    out.push_back(k < static_cast<int>(hits.size()) ? hits[k].second
                                                    : hits[0].second);
  }
  return out;
}

// k nearest reference points for each query row, nearest first.
template <typename Scalar>
Mat<int> knn_indices(const Mat<Scalar>& query, const Mat<Scalar>& ref, int k) {
  check(ref.rows() >= k && k >= 1, "knn: not enough reference points");
  Mat<int> idx(query.rows(), k);
  std::vector<std::pair<Scalar, int>> hits(ref.rows());
  for (Index q = 0; q < query.rows(); ++q) {
    for (Index i = 0; i < ref.rows(); ++i) {
      hits[i] = {(ref.row(i) - query.row(q)).squaredNorm(),
                 static_cast<int>(i)};
    }
    std::partial_sort(hits.begin(), hits.begin() + k, hits.end(),
                      [&](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first < b.first;
                        return lex_less(ref, a.second, b.second);
                      });
    for (int j = 0; j < k; ++j) idx(q, j) = hits[j].second;
  }
  return idx;
}

}  // namespace dloest::geom
