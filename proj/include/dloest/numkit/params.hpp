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

#include <map>
#include <string>
#include <vector>

#include "dloest/common.hpp"
#include "dloest/numkit/tape.hpp"

namespace dloest::numkit {

// Named trainable tensors in a stable registration order. Gradients live in a
// parallel buffer so several tapes can accumulate into one batch gradient.
template <typename Scalar>
class ParamStore {
 public:
  int add(const std::string& name, Mat<Scalar> init) {
    check(index_.find(name) == index_.end(), "duplicate parameter " + name);
    index_[name] = static_cast<int>(names_.size());
    names_.push_back(name);
    values_.push_back(std::move(init));
    return static_cast<int>(names_.size()) - 1;
  }

  int find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  std::size_t size() const { return values_.size(); }
  const std::string& name(int i) const { return names_[i]; }
  Mat<Scalar>& value(int i) { return values_[i]; }
  const Mat<Scalar>& value(int i) const { return values_[i]; }
  Mat<Scalar>& value(const std::string& name) {
    int i = find(name);
    check(i >= 0, "unknown parameter " + name);
    return values_[i];
  }

  std::vector<Mat<Scalar>> zero_grads() const {
    std::vector<Mat<Scalar>> g;
    g.reserve(values_.size());
    for (const auto& v : values_) g.push_back(Mat<Scalar>::Zero(v.rows(), v.cols()));
    return g;
  }

  // Registers every parameter as a tracked leaf on the tape.
  std::vector<Var<Scalar>> bind(Tape<Scalar>& tape) const {
    std::vector<Var<Scalar>> vars;
    vars.reserve(values_.size());
    for (const auto& v : values_) vars.push_back(tape.leaf(v, true));
    return vars;
  }

  // Adds the bound leaves' gradients into acc, in registration order.
  void accumulate_grads(const std::vector<Var<Scalar>>& bound,
                        std::vector<Mat<Scalar>>& acc) const {
    check(bound.size() == values_.size() && acc.size() == values_.size(),
          "accumulate_grads: store/tape mismatch");
    for (std::size_t i = 0; i < bound.size(); ++i) {
      const Mat<Scalar>& g = bound[i].grad();
      if (g.size() > 0) acc[i] += g;
    }
  }

  double squared_norm() const {
    double s = 0;
    for (const auto& v : values_) s += static_cast<double>(v.squaredNorm());
    return s;
  }

  template <typename Other>
  ParamStore<Other> cast() const {
    ParamStore<Other> out;
    for (std::size_t i = 0; i < values_.size(); ++i) {
      out.add(names_[i], values_[i].template cast<Other>());
    }
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Mat<Scalar>> values_;
  std::map<std::string, int> index_;
};

}  // namespace dloest::numkit
