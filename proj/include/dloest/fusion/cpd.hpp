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

#include <Eigen/Cholesky>
#include <optional>
#include <vector>

#include "dloest/common.hpp"

// Occlusion-aware fusion: fit a Gaussian-RBF displacement field from the
// regression nodes to the reliably-visible voting nodes (coherent point
// drift with the correspondence fixed to identity), then carry the whole
// regression sequence through it. Everything here runs at 64-bit.

namespace dloest::fusion {

struct FusionConfig {
  double visibility_threshold = 0.5;  // T
  double lambda = 0.25;               // smoothness regularization
  double beta = 0.5;                  // kernel width
  int max_iterations = 50;
  double tolerance = 1e-8;            // on |change in sigma^2|
  Index min_visible = 3;              // below this the RBF fit is unconstrained
};

inline void validate(const FusionConfig& cfg) {
  check(cfg.visibility_threshold > 0 && cfg.visibility_threshold < 1,
        "fusion config: threshold must be inside (0,1)");
  check(cfg.lambda > 0, "fusion config: lambda must be positive");
  check(cfg.beta > 0, "fusion config: beta must be positive");
  check(cfg.max_iterations >= 1 && cfg.tolerance > 0 && cfg.min_visible >= 1,
        "fusion config: iteration controls must be positive");
}

// G_ij = exp(-|a_i - b_j|^2 / (2 beta^2)); depends only on pairwise
// distances, which is what makes the whole fit rigid-motion equivariant.
inline Matd gaussian_kernel(const Matd& a, const Matd& b, double beta) {
  check(beta > 0, "gaussian_kernel: beta must be positive");
  Matd g(a.rows(), b.rows());
  const double inv = 1.0 / (2.0 * beta * beta);
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.rows(); ++j)
      g(i, j) = std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
  return g;
}

inline std::vector<int> select_visible(const Eigen::VectorXd& v, double t) {
  std::vector<int> idx;
  for (Index j = 0; j < v.rows(); ++j) {
    check(v(j) >= 0.0 && v(j) <= 1.0, "select_visible: v outside [0,1]");
    if (v(j) >= t) idx.push_back(static_cast<int>(j));
  }
  return idx;
}

struct FusionTransform {
  Matd control;   // Y_reg^nrr, S×3
  Matd w;         // S×3 coefficients
  double beta = 0.5;
  double sigma2 = 0.0;
  int iterations = 0;
};

// Alternates the regularized linear solve for W with the variance update
// (which collapses to the mean-free residual trace, divided by D=3) until
// sigma^2 settles. Ill-conditioned solves retry with 10× diagonal loading,
// at most 3 times; nullopt means the caller should fall back to regression.
inline std::optional<FusionTransform> fit_transform(const Matd& y_reg,
                                                    const Matd& y_vot,
                                                    const FusionConfig& cfg) {
  validate(cfg);
  check(y_reg.rows() == y_vot.rows() && y_reg.cols() == 3 && y_vot.cols() == 3,
        "fit_transform: control sets must be matched S×3");
  check(y_reg.allFinite() && y_vot.allFinite(),
        "fit_transform: non-finite input");
  const Index s = y_reg.rows();
  const Matd g = gaussian_kernel(y_reg, y_reg, cfg.beta);
  const Matd rhs = y_vot - y_reg;
  constexpr double kFloor = 1e-10;
  constexpr double kD = 3.0;

  FusionTransform t;
  t.control = y_reg;
  t.beta = cfg.beta;
  t.sigma2 = std::max(rhs.squaredNorm() / (static_cast<double>(s) * kD), kFloor);
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    Matd w;
    double loading = cfg.lambda * t.sigma2;
    bool solved = false;
    for (int attempt = 0; attempt <= 3; ++attempt) {
      Matd system = g + loading * Matd::Identity(s, s);
      Eigen::LDLT<Matd> ldlt(system);
      if (ldlt.info() == Eigen::Success) {
        w = ldlt.solve(rhs);
        if (w.allFinite() &&
            (system * w - rhs).norm() <= 1e-6 * (rhs.norm() + 1.0)) {
          solved = true;
          break;
        }
      }
      loading *= 10.0;
    }
    if (!solved) return std::nullopt;
    t.w = w;
    t.iterations = it;
    const Matd moved = y_reg + g * w;
    const double next = std::max((y_vot - moved).squaredNorm() / kD, kFloor);
    const double delta = std::abs(next - t.sigma2);
    t.sigma2 = next;
    if (delta < cfg.tolerance) break;
  }
  return t;
}

// Y_fus = Y + G(Y, control) W.
inline Matd apply_transform(const Matd& y, const FusionTransform& t) {
  check(y.cols() == 3, "apply_transform: expected xyz rows");
  return y + gaussian_kernel(y, t.control, t.beta) * t.w;
}

struct FusionOutcome {
  Matd nodes;                  // always M×3
  bool fused = false;          // false: regression fallback
  std::vector<int> selected;   // visible node indices used as controls
  double sigma2 = 0.0;
  int iterations = 0;
};

inline FusionOutcome fuse(const Matd& y_reg, const Matd& y_vot,
                          const Eigen::VectorXd& visibility,
                          const FusionConfig& cfg) {
  validate(cfg);
  check(y_reg.rows() == y_vot.rows() && visibility.rows() == y_reg.rows(),
        "fuse: branch outputs must agree on the node count");
  FusionOutcome out;
  out.selected = select_visible(visibility, cfg.visibility_threshold);
  if (static_cast<Index>(out.selected.size()) < cfg.min_visible) {
    out.nodes = y_reg;
    return out;
  }
  const Index s = static_cast<Index>(out.selected.size());
  Matd ctrl_reg(s, 3), ctrl_vot(s, 3);
  for (Index k = 0; k < s; ++k) {
    ctrl_reg.row(k) = y_reg.row(out.selected[static_cast<std::size_t>(k)]);
    ctrl_vot.row(k) = y_vot.row(out.selected[static_cast<std::size_t>(k)]);
  }
  auto t = fit_transform(ctrl_reg, ctrl_vot, cfg);
  if (!t) {
    out.nodes = y_reg;
    return out;
  }
  out.nodes = apply_transform(y_reg, *t);
  out.fused = true;
  out.sigma2 = t->sigma2;
  out.iterations = t->iterations;
  return out;
}

}  // namespace dloest::fusion
