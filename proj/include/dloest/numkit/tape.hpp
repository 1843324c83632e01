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

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "dloest/common.hpp"

namespace dloest::numkit {

// Reverse-mode autodiff over dense row-major matrices.
//
// A Tape owns every intermediate value of one forward pass; Var is a cheap
// handle into it. Ops are free functions that append a node plus a pullback
// closure. Values are immutable once created; backward() walks the tape in
// reverse and accumulates gradients into tracked nodes only.

template <typename Scalar>
class Tape;

template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  Index id = -1;

  const Mat<Scalar>& value() const { return tape->value(id); }
  const Mat<Scalar>& grad() const { return tape->grad(id); }
  bool valid() const { return tape != nullptr && id >= 0; }
};

template <typename Scalar>
class Tape {
 public:
  using M = Mat<Scalar>;
  using Pullback = std::function<void(Tape&, const M& upstream)>;

  struct Node {
    M value;
    M grad;  // empty until backward reaches this node
    Pullback back;
    bool tracked = false;
  };

  Var<Scalar> leaf(M value, bool tracked = false) {
    return emit(std::move(value), tracked, nullptr);
  }

  template <typename Derived>
  Var<Scalar> leaf(const Eigen::MatrixBase<Derived>& value,
                   bool tracked = false) {
    return emit(M(value), tracked, nullptr);
  }

  Var<Scalar> emit(M value, bool tracked, Pullback back) {
    nodes_.push_back(Node{std::move(value), M(), std::move(back), tracked});
    return Var<Scalar>{this, static_cast<Index>(nodes_.size()) - 1};
  }

  const M& value(Index id) const { return nodes_[id].value; }
  const M& grad(Index id) const { return nodes_[id].grad; }
  bool tracked(Index id) const { return nodes_[id].tracked; }
  Index size() const { return static_cast<Index>(nodes_.size()); }
  void clear() { nodes_.clear(); }

  // Lazily allocates the gradient buffer; constants stay untouched.
  template <typename Expr>
  void accumulate(Index id, const Expr& e) {
    Node& n = nodes_[id];
    if (!n.tracked) return;
    if (n.grad.size() == 0) n.grad = M::Zero(n.value.rows(), n.value.cols());
    n.grad += e;
  }

  void backward(Var<Scalar> loss) {
    check(loss.valid() && loss.tape == this, "backward: loss not on this tape");
    check(size() > 0, "backward: empty tape");
    const Node& ln = nodes_[loss.id];
    check(ln.value.rows() == 1 && ln.value.cols() == 1,
          "backward: loss must be scalar, got " +
              shape_str(ln.value.rows(), ln.value.cols()));
    accumulate(loss.id, M::Ones(1, 1));
    for (Index i = loss.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.tracked || !n.back || n.grad.size() == 0) continue;
      n.back(*this, n.grad);
    }
  }

 private:
  std::vector<Node> nodes_;
};

namespace detail {

template <typename Scalar>
Tape<Scalar>& same_tape(Var<Scalar> a, Var<Scalar> b) {
  check(a.valid() && b.valid() && a.tape == b.tape,
        "operands must live on the same tape");
  return *a.tape;
}

template <typename Scalar>
void check_same_shape(const Mat<Scalar>& a, const Mat<Scalar>& b,
                      const char* op) {
  check(a.rows() == b.rows() && a.cols() == b.cols(),
        std::string(op) + ": shape mismatch " + shape_str(a.rows(), a.cols()) +
            " vs " + shape_str(b.rows(), b.cols()));
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> constant(Tape<Scalar>& tape, Mat<Scalar> value) {
  return tape.leaf(std::move(value), false);
}

template <typename Scalar, typename Derived>
Var<Scalar> constant(Tape<Scalar>& tape, const Eigen::MatrixBase<Derived>& value) {
  return tape.leaf(Mat<Scalar>(value), false);
}

// ---------------------------------------------------------------------------
// arithmetic

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  Tape<Scalar>& t = detail::same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  check(av.cols() == bv.rows(),
        "matmul: inner dimensions differ " + shape_str(av.rows(), av.cols()) +
            " * " + shape_str(bv.rows(), bv.cols()));
  Mat<Scalar> y = av * bv;
  const bool tracked = t.tracked(a.id) || t.tracked(b.id);
  Index ai = a.id, bi = b.id;
  return t.emit(std::move(y), tracked,
                [ai, bi](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  tp.accumulate(ai, g * tp.value(bi).transpose());
                  tp.accumulate(bi, tp.value(ai).transpose() * g);
                });
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  Tape<Scalar>& t = detail::same_tape(a, b);
  detail::check_same_shape(a.value(), b.value(), "add");
  Mat<Scalar> y = a.value() + b.value();
  Index ai = a.id, bi = b.id;
  return t.emit(std::move(y), t.tracked(ai) || t.tracked(bi),
                [ai, bi](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  tp.accumulate(ai, g);
                  tp.accumulate(bi, g);
                });
}

template <typename Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
  Tape<Scalar>& t = detail::same_tape(a, b);
  detail::check_same_shape(a.value(), b.value(), "sub");
  Mat<Scalar> y = a.value() - b.value();
  Index ai = a.id, bi = b.id;
  return t.emit(std::move(y), t.tracked(ai) || t.tracked(bi),
                [ai, bi](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  tp.accumulate(ai, g);
                  tp.accumulate(bi, -g);
                });
}

template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  Tape<Scalar>& t = detail::same_tape(a, b);
  detail::check_same_shape(a.value(), b.value(), "mul");
  Mat<Scalar> y = a.value().cwiseProduct(b.value());
  Index ai = a.id, bi = b.id;
  return t.emit(std::move(y), t.tracked(ai) || t.tracked(bi),
                [ai, bi](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  tp.accumulate(ai, g.cwiseProduct(tp.value(bi)));
                  tp.accumulate(bi, g.cwiseProduct(tp.value(ai)));
                });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar c) {
  Tape<Scalar>& t = *a.tape;
  Mat<Scalar> y = a.value() * c;
  Index ai = a.id;
  return t.emit(std::move(y), t.tracked(ai),
                [ai, c](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  tp.accumulate(ai, g * c);
                });
}

// Broadcasts a 1 x C bias over every row.
template <typename Scalar>
Var<Scalar> add_row(Var<Scalar> a, Var<Scalar> bias) {
  Tape<Scalar>& t = detail::same_tape(a, bias);
  const auto& av = a.value();
  const auto& bv = bias.value();
  check(bv.rows() == 1 && bv.cols() == av.cols(),
        "add_row: bias " + shape_str(bv.rows(), bv.cols()) +
            " does not broadcast over " + shape_str(av.rows(), av.cols()));
  Mat<Scalar> y = av.rowwise() + bv.row(0);
  Index ai = a.id, bi = bias.id;
  return t.emit(std::move(y), t.tracked(ai) || t.tracked(bi),
                [ai, bi](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  tp.accumulate(ai, g);
                  tp.accumulate(bi, g.colwise().sum());
                });
}

// Scales row r by weights(r); weights are not differentiated.
template <typename Scalar>
Var<Scalar> scale_rows(Var<Scalar> a, Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w) {
  Tape<Scalar>& t = *a.tape;
  const auto& av = a.value();
  check(w.size() == av.rows(), "scale_rows: weight count " +
                                   std::to_string(w.size()) + " vs rows " +
                                   std::to_string(av.rows()));
  Mat<Scalar> y = w.asDiagonal() * av;
  Index ai = a.id;
  auto wp = std::make_shared<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(std::move(w));
  return t.emit(std::move(y), t.tracked(ai),
                [ai, wp](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  tp.accumulate(ai, wp->asDiagonal() * g);
                });
}

// ---------------------------------------------------------------------------
// nonlinearities

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> a) {
  Tape<Scalar>& t = *a.tape;
  Mat<Scalar> y = a.value().cwiseMax(Scalar(0));
  Index ai = a.id;
  return t.emit(std::move(y), t.tracked(ai),
                [ai, self = t.size()](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  const auto& y = tp.value(self);
                  tp.accumulate(
                      ai, g.cwiseProduct((y.array() > Scalar(0))
                                             .template cast<Scalar>()
                                             .matrix()));
                });
}

template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> a) {
  Tape<Scalar>& t = *a.tape;
  Mat<Scalar> y =
      (Scalar(1) / (Scalar(1) + (-a.value().array()).exp())).matrix();
  Index ai = a.id;
  return t.emit(std::move(y), t.tracked(ai),
                [ai, self = t.size()](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  const auto& y = tp.value(self).array();
                  tp.accumulate(ai, (g.array() * y * (Scalar(1) - y)).matrix());
                });
}

// Normalizes each 3-vector row to unit length; epsilon keeps the map finite
// at the origin.
template <typename Scalar>
Var<Scalar> l2_normalize_rows(Var<Scalar> a) {
  constexpr Scalar kEps = Scalar(1e-8);
  Tape<Scalar>& t = *a.tape;
  const auto& av = a.value();
  check(av.cols() == 3, "l2_normalize_rows: expected 3 columns, got " +
                            shape_str(av.rows(), av.cols()));
  Mat<Scalar> y(av.rows(), 3);
  for (Index r = 0; r < av.rows(); ++r) {
    y.row(r) = av.row(r) / (av.row(r).norm() + kEps);
  }
  Index ai = a.id;
  return t.emit(std::move(y), t.tracked(ai),
                [ai](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  const auto& x = tp.value(ai);
                  Mat<Scalar> gx(x.rows(), 3);
                  for (Index r = 0; r < x.rows(); ++r) {
                    const Scalar n = x.row(r).norm();
                    const Scalar denom = n + kEps;
                    gx.row(r) = g.row(r) / denom;
                    if (n > Scalar(0)) {
                      gx.row(r) -= x.row(r) * (x.row(r).dot(g.row(r))) /
                                   (n * denom * denom);
                    }
                  }
                  tp.accumulate(ai, gx);
                });
}

// ---------------------------------------------------------------------------
// reductions

// Column-wise max over all rows (the point axis); ties keep the lowest row so
// the forward output is permutation-invariant and the pullback deterministic.
template <typename Scalar>
Var<Scalar> max_pool_over_set(Var<Scalar> a) {
  Tape<Scalar>& t = *a.tape;
  const auto& av = a.value();
  check(av.rows() >= 1, "max_pool_over_set: empty input");
  Mat<Scalar> y(1, av.cols());
  auto argmax = std::make_shared<std::vector<Index>>(av.cols());
  for (Index c = 0; c < av.cols(); ++c) {
    Index best = 0;
    for (Index r = 1; r < av.rows(); ++r) {
      if (av(r, c) > av(best, c)) best = r;
    }
    (*argmax)[c] = best;
    y(0, c) = av(best, c);
  }
  Index ai = a.id;
  return t.emit(std::move(y), t.tracked(ai),
                [ai, argmax](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  const auto& x = tp.value(ai);
                  Mat<Scalar> gx = Mat<Scalar>::Zero(x.rows(), x.cols());
                  for (Index c = 0; c < x.cols(); ++c) {
                    gx((*argmax)[c], c) = g(0, c);
                  }
                  tp.accumulate(ai, gx);
                });
}

// Max over fixed-size blocks of consecutive rows: (G*K) x C -> G x C.
template <typename Scalar>
Var<Scalar> rowgroup_max(Var<Scalar> a, Index group_size) {
  Tape<Scalar>& t = *a.tape;
  const auto& av = a.value();
  check(group_size > 0 && av.rows() % group_size == 0,
        "rowgroup_max: rows " + std::to_string(av.rows()) +
            " not divisible by group size " + std::to_string(group_size));
  const Index groups = av.rows() / group_size;
  Mat<Scalar> y(groups, av.cols());
  auto argmax = std::make_shared<Mat<int>>(groups, av.cols());
  for (Index gdx = 0; gdx < groups; ++gdx) {
    for (Index c = 0; c < av.cols(); ++c) {
      Index best = gdx * group_size;
      for (Index r = best + 1; r < (gdx + 1) * group_size; ++r) {
        if (av(r, c) > av(best, c)) best = r;
      }
      (*argmax)(gdx, c) = static_cast<int>(best);
      y(gdx, c) = av(best, c);
    }
  }
  Index ai = a.id;
  return t.emit(std::move(y), t.tracked(ai),
                [ai, argmax](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  const auto& x = tp.value(ai);
                  Mat<Scalar> gx = Mat<Scalar>::Zero(x.rows(), x.cols());
                  for (Index gdx = 0; gdx < g.rows(); ++gdx) {
                    for (Index c = 0; c < g.cols(); ++c) {
                      gx((*argmax)(gdx, c), c) += g(gdx, c);
                    }
                  }
                  tp.accumulate(ai, gx);
                });
}

template <typename Scalar>
Var<Scalar> sum_all(Var<Scalar> a) {
  Tape<Scalar>& t = *a.tape;
  Mat<Scalar> y(1, 1);
  y(0, 0) = a.value().sum();
  Index ai = a.id;
  return t.emit(std::move(y), t.tracked(ai),
                [ai](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  const auto& x = tp.value(ai);
                  tp.accumulate(ai,
                                Mat<Scalar>::Constant(x.rows(), x.cols(), g(0, 0)));
                });
}

// Mean of squared differences over all elements.
template <typename Scalar>
Var<Scalar> mse(Var<Scalar> a, Var<Scalar> b) {
  Tape<Scalar>& t = detail::same_tape(a, b);
  detail::check_same_shape(a.value(), b.value(), "mse");
  const Scalar n = static_cast<Scalar>(a.value().size());
  Mat<Scalar> y(1, 1);
  y(0, 0) = (a.value() - b.value()).squaredNorm() / n;
  Index ai = a.id, bi = b.id;
  return t.emit(std::move(y), t.tracked(ai) || t.tracked(bi),
                [ai, bi, n](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  Mat<Scalar> d =
                      (tp.value(ai) - tp.value(bi)) * (Scalar(2) * g(0, 0) / n);
                  tp.accumulate(ai, d);
                  tp.accumulate(bi, -d);
                });
}

// min of two scalars; gradient flows to the chosen branch (ties pick a).
template <typename Scalar>
Var<Scalar> select_min(Var<Scalar> a, Var<Scalar> b) {
  Tape<Scalar>& t = detail::same_tape(a, b);
  check(a.value().size() == 1 && b.value().size() == 1,
        "select_min: operands must be scalar");
  const bool pick_a = a.value()(0, 0) <= b.value()(0, 0);
  Mat<Scalar> y = pick_a ? a.value() : b.value();
  Index chosen = pick_a ? a.id : b.id;
  return t.emit(std::move(y), t.tracked(a.id) || t.tracked(b.id),
                [chosen](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  tp.accumulate(chosen, g);
                });
}

// ---------------------------------------------------------------------------
// structure

template <typename Scalar>
Var<Scalar> gather_rows(Var<Scalar> a, std::vector<int> rows) {
  Tape<Scalar>& t = *a.tape;
  const auto& av = a.value();
  Mat<Scalar> y(static_cast<Index>(rows.size()), av.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    check(rows[i] >= 0 && rows[i] < av.rows(), "gather_rows: index out of range");
    y.row(static_cast<Index>(i)) = av.row(rows[i]);
  }
  Index ai = a.id;
  auto idx = std::make_shared<std::vector<int>>(std::move(rows));
  return t.emit(std::move(y), t.tracked(ai),
                [ai, idx](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  const auto& x = tp.value(ai);
                  Mat<Scalar> gx = Mat<Scalar>::Zero(x.rows(), x.cols());
                  for (std::size_t i = 0; i < idx->size(); ++i) {
                    gx.row((*idx)[i]) += g.row(static_cast<Index>(i));
                  }
                  tp.accumulate(ai, gx);
                });
}

// out.row(f) = sum_k w(f,k) * a.row(idx(f,k)); idx and w are constants.
template <typename Scalar>
Var<Scalar> weighted_gather_rows(Var<Scalar> a, Mat<int> idx, Mat<Scalar> w) {
  Tape<Scalar>& t = *a.tape;
  const auto& av = a.value();
  check(idx.rows() == w.rows() && idx.cols() == w.cols(),
        "weighted_gather_rows: index/weight shape mismatch " +
            shape_str(idx.rows(), idx.cols()) + " vs " +
            shape_str(w.rows(), w.cols()));
  Mat<Scalar> y = Mat<Scalar>::Zero(idx.rows(), av.cols());
  for (Index f = 0; f < idx.rows(); ++f) {
    for (Index k = 0; k < idx.cols(); ++k) {
      y.row(f) += w(f, k) * av.row(idx(f, k));
    }
  }
  Index ai = a.id;
  auto ip = std::make_shared<Mat<int>>(std::move(idx));
  auto wp = std::make_shared<Mat<Scalar>>(std::move(w));
  return t.emit(std::move(y), t.tracked(ai),
                [ai, ip, wp](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  const auto& x = tp.value(ai);
                  Mat<Scalar> gx = Mat<Scalar>::Zero(x.rows(), x.cols());
                  for (Index f = 0; f < ip->rows(); ++f) {
                    for (Index k = 0; k < ip->cols(); ++k) {
                      gx.row((*ip)(f, k)) += (*wp)(f, k) * g.row(f);
                    }
                  }
                  tp.accumulate(ai, gx);
                });
}

template <typename Scalar>
Var<Scalar> concat_cols(Var<Scalar> a, Var<Scalar> b) {
  Tape<Scalar>& t = detail::same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  check(av.rows() == bv.rows(),
        "concat_cols: row counts differ " + shape_str(av.rows(), av.cols()) +
            " vs " + shape_str(bv.rows(), bv.cols()));
  Mat<Scalar> y(av.rows(), av.cols() + bv.cols());
  y.leftCols(av.cols()) = av;
  y.rightCols(bv.cols()) = bv;
  Index ai = a.id, bi = b.id;
  Index ac = av.cols(), bc = bv.cols();
  return t.emit(std::move(y), t.tracked(ai) || t.tracked(bi),
                [ai, bi, ac, bc](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  tp.accumulate(ai, g.leftCols(ac));
                  tp.accumulate(bi, g.rightCols(bc));
                });
}

// Row-major reinterpretation; element order is preserved.
template <typename Scalar>
Var<Scalar> reshape(Var<Scalar> a, Index rows, Index cols) {
  Tape<Scalar>& t = *a.tape;
  const auto& av = a.value();
  check(rows * cols == av.size(),
        "reshape: cannot view " + shape_str(av.rows(), av.cols()) + " as " +
            shape_str(rows, cols));
  Mat<Scalar> y = Eigen::Map<const Mat<Scalar>>(av.data(), rows, cols);
  Index ai = a.id;
  return t.emit(std::move(y), t.tracked(ai),
                [ai](Tape<Scalar>& tp, const Mat<Scalar>& g) {
                  const auto& x = tp.value(ai);
                  tp.accumulate(ai, Eigen::Map<const Mat<Scalar>>(
                                        g.data(), x.rows(), x.cols()));
                });
}

}  // namespace dloest::numkit
