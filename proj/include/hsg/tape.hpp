// Copyright 2026 The HSG Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hsg/common.hpp"
#include "hsg/numeric.hpp"

namespace hsg::ad {

class Tape;

/// Lightweight handle to a tape node. Vectors are n-by-1, scalars 1-by-1.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const;
  Eigen::Index cols() const;
  bool is_scalar() const { return rows() == 1 && cols() == 1; }
  double scalar() const;
};

/// Reverse-mode tape over dense double matrices.
///
/// Construction order is the evaluation order; backward() replays the
/// recorded adjoint closures in exact reverse, so gradients are deterministic
/// for a fixed tape. A tape is single-owner while it is being built or
/// differentiated; independent tapes may run concurrently.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// New leaf holding `v`. Leaves have no adjoint closure.
  Var input(Matrix v);
  Var scalar_input(double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return input(std::move(m));
  }

  /// New interior node. `bwd` reads this node's accumulated gradient and adds
  /// each parent's contribution; op implementations and tests build on this.
  /// Pass nullptr and attach the closure with set_backward once the node id
  /// is known.
  Var emplace(Matrix value, std::function<void(Tape&)> bwd);
  void set_backward(Var node, std::function<void(Tape&)> bwd);

  /// Seeds the scalar `root` with gradient 1 and sweeps the tape in reverse.
  /// Every gradient (including disconnected leaves, which stay zero) is
  /// repopulated from scratch on each call.
  void backward(Var root);

  const Matrix& value_of(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Matrix& grad_of(int id) const;
  Matrix& grad_mut(int id);

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&)> bwd;
  };
  std::vector<Node> nodes_;
  bool grads_valid_ = false;
};

inline const Matrix& Var::value() const { return tape->value_of(id); }
inline const Matrix& Var::grad() const { return tape->grad_of(id); }
inline Eigen::Index Var::rows() const { return value().rows(); }
inline Eigen::Index Var::cols() const { return value().cols(); }
inline double Var::scalar() const {
  if (!is_scalar()) throw ShapeError("Var::scalar: node is not 1x1");
  return value()(0, 0);
}

// ---------------------------------------------------------------------------
// Ops. Each one validates shapes, computes the forward value eagerly, checks
// it for finiteness, and records the exact adjoint.
// ---------------------------------------------------------------------------

/// y_j = sum_i x_i W_ij for x in R^d, W in R^{d x m}.
Var linear(Var x, Var w);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var neg(Var a);

/// y = c * x for a plain constant c.
Var scale(Var x, double c);
/// y = s * x for a 1x1 tape node s; gradient flows into both factors.
Var scale(Var x, Var s);

Var sigmoid(Var x);
Var softmax(Var x);
Var log(Var x);
Var softplus(Var x);

/// Stacks column vectors (and scalars) into one column vector.
Var concat(std::span<const Var> parts);

/// Mean over the selected columns of a channels-by-cells grid; an empty
/// selection yields the zero vector.
Var mean_pool(Var grid, const std::vector<int>& cells);

/// Zeroes the non-selected columns of a channels-by-cells grid.
Var keep_columns(Var grid, const std::vector<int>& cells, int total_cells);

Var dot(Var a, Var b);
Var sum(Var x);
Var logsumexp(Var x);
Var pick(Var x, int index);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double c, Var x) { return scale(x, c); }
inline Var operator*(Var x, double c) { return scale(x, c); }

// ---------------------------------------------------------------------------
// Gradient checking.
// ---------------------------------------------------------------------------

/// Builds the graph once for analytic gradients, then re-evaluates it with
/// every leaf entry perturbed by +-eps. Returns
///   max over leaf entries of |analytic - central_difference| / max(1, |analytic|).
double grad_check(std::span<const Matrix> leaf_values,
                  const std::function<Var(Tape&, std::span<const Var>)>& build,
                  double eps = 1e-6);

}  // namespace hsg::ad
