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
#include <string>
#include <vector>

#include "dloest/numkit/params.hpp"
#include "dloest/numkit/tape.hpp"

namespace dloest::numkit {

struct GradCheckReport {
  std::string name;
  double max_rel_err = 0.0;
  long entries = 0;
  bool pass = false;
};

// Central-difference check of reverse-mode gradients for a scalar loss built
// from the parameter store. The finite-difference side never touches the
// reverse path, so it is an independent reference.
//
// `corrupt` injects an offset into one analytic gradient entry; it exists so
// callers can verify the checker itself flags wrong gradients.
template <typename LossFn>
GradCheckReport check_gradients(const std::string& name,
                                const ParamStore<double>& params, LossFn&& loss_fn,
                                double step = 1e-5, double tol = 1e-4,
                                double corrupt = 0.0) {
  auto eval = [&](const ParamStore<double>& p) {
    Tape<double> tape;
    std::vector<Var<double>> vars = p.bind(tape);
    Var<double> loss = loss_fn(tape, vars);
    return loss.value()(0, 0);
  };

  // analytic gradients
  Tape<double> tape;
  std::vector<Var<double>> vars = params.bind(tape);
  Var<double> loss = loss_fn(tape, vars);
  tape.backward(loss);
  std::vector<Matd> analytic;
  analytic.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matd& g = vars[i].grad();
    analytic.push_back(g.size() > 0
                           ? g
                           : Matd::Zero(params.value(static_cast<int>(i)).rows(),
                                        params.value(static_cast<int>(i)).cols()));
  }
  if (corrupt != 0.0 && !analytic.empty() && analytic[0].size() > 0) {
    analytic[0](0, 0) += corrupt * (1.0 + std::abs(analytic[0](0, 0)));
  }

  GradCheckReport report;
  report.name = name;
  ParamStore<double> probe = params.template cast<double>();
  for (std::size_t i = 0; i < probe.size(); ++i) {
    Matd& p = probe.value(static_cast<int>(i));
    for (Index r = 0; r < p.rows(); ++r) {
      for (Index c = 0; c < p.cols(); ++c) {
        const double saved = p(r, c);
        p(r, c) = saved + step;
        const double fp = eval(probe);
        p(r, c) = saved - step;
        const double fm = eval(probe);
        p(r, c) = saved;
        const double fd = (fp - fm) / (2.0 * step);
        const double a = analytic[i](r, c);
        const double rel =
            std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
        report.max_rel_err = std::max(report.max_rel_err, rel);
        ++report.entries;
      }
    }
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

// Uniform random matrix in [-scale, scale], seeded.
inline Matd uniform_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  Matd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-scale, scale);
  }
  return m;
}

}  // namespace dloest::numkit
