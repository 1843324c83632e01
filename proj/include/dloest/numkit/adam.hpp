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

#include <cmath>
#include <vector>

#include "dloest/numkit/params.hpp"

namespace dloest::numkit {

// Adam with bias correction, a step-wise learning-rate decay schedule, and
// decoupled weight decay (zero gradient leaves only the decay shrinkage).
template <typename Scalar>
struct AdamState {
  long step = 0;  // completed steps
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double decay_ratio = 1.0;  // lr multiplier applied every decay_interval steps
  long decay_interval = 0;   // 0 disables the schedule
  std::vector<Mat<Scalar>> m, v;

  void init(const ParamStore<Scalar>& params) {
    m = params.zero_grads();
    v = params.zero_grads();
    step = 0;
  }

  double effective_lr() const {
    if (decay_interval <= 0) return lr;
    return lr * std::pow(decay_ratio, static_cast<double>(step / decay_interval));
  }
};

template <typename Scalar>
void adam_step(ParamStore<Scalar>& params, const std::vector<Mat<Scalar>>& grads,
               AdamState<Scalar>& st) {
  check(st.m.size() == params.size() && grads.size() == params.size(),
        "adam_step: state/parameter count mismatch");
  const double lr_t = st.effective_lr();
  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Mat<Scalar>& p = params.value(static_cast<int>(i));
    const Mat<Scalar>& g = grads[i];
    check(g.rows() == p.rows() && g.cols() == p.cols(),
          "adam_step: gradient shape mismatch for " +
              params.name(static_cast<int>(i)) + " " +
              shape_str(g.rows(), g.cols()) + " vs " +
              shape_str(p.rows(), p.cols()));
    Mat<Scalar>& m = st.m[i];
    Mat<Scalar>& v = st.v[i];
    m = Scalar(st.beta1) * m + Scalar(1.0 - st.beta1) * g;
    v = Scalar(st.beta2) * v + Scalar(1.0 - st.beta2) * g.cwiseProduct(g);
    p.array() -=
        Scalar(lr_t) * (m.array() / Scalar(bc1)) /
        ((v.array() / Scalar(bc2)).sqrt() + Scalar(st.eps));
    if (st.weight_decay > 0.0) {
      p *= Scalar(1.0 - lr_t * st.weight_decay);
    }
  }
}

}  // namespace dloest::numkit
