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
#include "hsg/tape.hpp"

#include <cmath>

namespace hsg::ad {

namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw Error(std::string(op) + ": operands must live on the same tape");
}

void require_column(Var x, const char* op) {
  if (x.cols() != 1) throw ShapeError(std::string(op) + ": expected a column vector");
}

}  // namespace

Var Tape::input(Matrix v) {
  require_finite(v, "input");
  nodes_.push_back(Node{std::move(v), Matrix(), nullptr});
  grads_valid_ = false;
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::emplace(Matrix value, std::function<void(Tape&)> bwd) {
  require_finite(value, "op");
  nodes_.push_back(Node{std::move(value), Matrix(), std::move(bwd)});
  grads_valid_ = false;
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::set_backward(Var node, std::function<void(Tape&)> bwd) {
  if (node.tape != this) throw Error("set_backward: node lives on another tape");
  nodes_[static_cast<std::size_t>(node.id)].bwd = std::move(bwd);
}

const Matrix& Tape::grad_of(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!grads_valid_ || n.grad.size() == 0)
    throw Error("grad_of: backward() has not populated this tape");
  return n.grad;
}

Matrix& Tape::grad_mut(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }

void Tape::backward(Var root) {
  if (root.tape != this) throw Error("backward: root lives on another tape");
  const Matrix& rv = value_of(root.id);
  if (rv.rows() != 1 || rv.cols() != 1)
    throw ShapeError("backward: root must be scalar");
  for (Node& n : nodes_) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  grads_valid_ = true;
  nodes_[static_cast<std::size_t>(root.id)].grad(0, 0) = 1.0;
  for (int i = root.id; i >= 0; --i) {
    const auto& bwd = nodes_[static_cast<std::size_t>(i)].bwd;
    if (bwd) bwd(*this);
  }
}

// Helper: create the output node, then attach an adjoint closure that knows
// its own id.
template <typename Fn>
static Var make_op(Tape* t, Matrix value, Fn&& attach) {
  Var out = t->emplace(std::move(value), nullptr);
  t->set_backward(out, attach(out.id));
  return out;
}

Var linear(Var x, Var w) {
  require_same_tape(x, w, "linear");
  require_column(x, "linear");
  if (w.rows() != x.rows())
    throw ShapeError("linear: inner dimensions disagree (x has " +
                     std::to_string(x.rows()) + " rows, W has " +
                     std::to_string(w.rows()) + ")");
  Matrix y = w.value().transpose() * x.value();
  const int xi = x.id, wi = w.id;
  return make_op(x.tape, std::move(y), [xi, wi](int yi) {
    return [xi, wi, yi](Tape& t) {
      const Matrix& gy = t.grad_of(yi);
      t.grad_mut(xi).noalias() += t.value_of(wi) * gy;
      t.grad_mut(wi).noalias() += t.value_of(xi) * gy.transpose();
    };
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("add: shape mismatch");
  const int ai = a.id, bi = b.id;
  return make_op(a.tape, a.value() + b.value(), [ai, bi](int yi) {
    return [ai, bi, yi](Tape& t) {
      t.grad_mut(ai) += t.grad_of(yi);
      t.grad_mut(bi) += t.grad_of(yi);
    };
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("sub: shape mismatch");
  const int ai = a.id, bi = b.id;
  return make_op(a.tape, a.value() - b.value(), [ai, bi](int yi) {
    return [ai, bi, yi](Tape& t) {
      t.grad_mut(ai) += t.grad_of(yi);
      t.grad_mut(bi) -= t.grad_of(yi);
    };
  });
}

Var neg(Var a) {
  const int ai = a.id;
  return make_op(a.tape, -a.value(), [ai](int yi) {
    return [ai, yi](Tape& t) { t.grad_mut(ai) -= t.grad_of(yi); };
  });
}

Var scale(Var x, double c) {
  if (!std::isfinite(c)) throw NumericError("scale: non-finite constant");
  const int xi = x.id;
  return make_op(x.tape, c * x.value(), [xi, c](int yi) {
    return [xi, c, yi](Tape& t) { t.grad_mut(xi) += c * t.grad_of(yi); };
  });
}

Var scale(Var x, Var s) {
  require_same_tape(x, s, "scale");
  if (!s.is_scalar()) throw ShapeError("scale: scale factor must be 1x1");
  const int xi = x.id, si = s.id;
  return make_op(x.tape, s.scalar() * x.value(), [xi, si](int yi) {
    return [xi, si, yi](Tape& t) {
      const Matrix& gy = t.grad_of(yi);
      t.grad_mut(xi) += t.value_of(si)(0, 0) * gy;
      t.grad_mut(si)(0, 0) += (gy.array() * t.value_of(xi).array()).sum();
    };
  });
}

Var sigmoid(Var x) {
  Matrix y = x.value().unaryExpr([](double v) { return hsg::sigmoid(v); });
  const int xi = x.id;
  return make_op(x.tape, std::move(y), [xi](int yi) {
    return [xi, yi](Tape& t) {
      const Matrix& y = t.value_of(yi);
      t.grad_mut(xi).array() +=
          t.grad_of(yi).array() * y.array() * (1.0 - y.array());
    };
  });
}

Var softmax(Var x) {
  require_column(x, "softmax");
  if (x.rows() == 0) throw ShapeError("softmax: empty input");
  Vector p = hsg::softmax(x.value().col(0));
  const int xi = x.id;
  return make_op(x.tape, Matrix(p), [xi](int yi) {
    return [xi, yi](Tape& t) {
      const auto y = t.value_of(yi).col(0).array();
      const auto gy = t.grad_of(yi).col(0).array();
      const double inner = (gy * y).sum();
      t.grad_mut(xi).col(0).array() += y * (gy - inner);
    };
  });
}

Var log(Var x) {
  if ((x.value().array() <= 0.0).any())
    throw NumericError("log: input must be strictly positive");
  const int xi = x.id;
  return make_op(x.tape, Matrix(x.value().array().log()), [xi](int yi) {
    return [xi, yi](Tape& t) {
      t.grad_mut(xi).array() += t.grad_of(yi).array() / t.value_of(xi).array();
    };
  });
}

Var softplus(Var x) {
  Matrix y = x.value().unaryExpr([](double v) { return hsg::softplus(v); });
  const int xi = x.id;
  return make_op(x.tape, std::move(y), [xi](int yi) {
    return [xi, yi](Tape& t) {
      const auto x = t.value_of(xi).array();
      t.grad_mut(xi).array() +=
          t.grad_of(yi).array() *
          x.unaryExpr([](double v) { return hsg::sigmoid(v); });
    };
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: empty input");
  Tape* t = parts.front().tape;
  Eigen::Index total = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> sizes;
  for (const Var& p : parts) {
    require_same_tape(parts.front(), p, "concat");
    require_column(p, "concat");
    ids.push_back(p.id);
    sizes.push_back(p.rows());
    total += p.rows();
  }
  Matrix y(total, 1);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    y.block(off, 0, p.rows(), 1) = p.value();
    off += p.rows();
  }
  return make_op(t, std::move(y), [ids, sizes](int yi) {
    return [ids, sizes, yi](Tape& t) {
      const Matrix& gy = t.grad_of(yi);
      Eigen::Index off = 0;
      for (std::size_t k = 0; k < ids.size(); ++k) {
        t.grad_mut(ids[k]) += gy.block(off, 0, sizes[k], 1);
        off += sizes[k];
      }
    };
  });
}

Var mean_pool(Var grid, const std::vector<int>& cells) {
  const Matrix& g = grid.value();
  for (int c : cells)
    if (c < 0 || c >= g.cols()) throw ShapeError("mean_pool: cell index out of range");
  Matrix y = Matrix::Zero(g.rows(), 1);
  if (!cells.empty()) {
    for (int c : cells) y.col(0) += g.col(c);
    y /= static_cast<double>(cells.size());
  }
  const int gi = grid.id;
  return make_op(grid.tape, std::move(y), [gi, cells](int yi) {
    return [gi, cells, yi](Tape& t) {
      if (cells.empty()) return;
      const Matrix& gy = t.grad_of(yi);
      const double inv = 1.0 / static_cast<double>(cells.size());
      for (int c : cells) t.grad_mut(gi).col(c) += inv * gy.col(0);
    };
  });
}

Var keep_columns(Var grid, const std::vector<int>& cells, int total_cells) {
  const Matrix& g = grid.value();
  if (g.cols() != total_cells) throw ShapeError("keep_columns: cell count mismatch");
  std::vector<char> keep(static_cast<std::size_t>(total_cells), 0);
  for (int c : cells) {
    if (c < 0 || c >= total_cells) throw ShapeError("keep_columns: cell index out of range");
    keep[static_cast<std::size_t>(c)] = 1;
  }
  Matrix y = Matrix::Zero(g.rows(), g.cols());
  for (int c = 0; c < total_cells; ++c)
    if (keep[static_cast<std::size_t>(c)]) y.col(c) = g.col(c);
  const int gi = grid.id;
  return make_op(grid.tape, std::move(y), [gi, keep](int yi) {
    return [gi, keep, yi](Tape& t) {
      const Matrix& gy = t.grad_of(yi);
      for (int c = 0; c < gy.cols(); ++c)
        if (keep[static_cast<std::size_t>(c)]) t.grad_mut(gi).col(c) += gy.col(c);
    };
  });
}

Var dot(Var a, Var b) {
  require_same_tape(a, b, "dot");
  require_column(a, "dot");
  require_column(b, "dot");
  if (a.rows() != b.rows()) throw ShapeError("dot: length mismatch");
  Matrix y = Matrix::Constant(1, 1, a.value().col(0).dot(b.value().col(0)));
  const int ai = a.id, bi = b.id;
  return make_op(a.tape, std::move(y), [ai, bi](int yi) {
    return [ai, bi, yi](Tape& t) {
      const double gy = t.grad_of(yi)(0, 0);
      t.grad_mut(ai) += gy * t.value_of(bi);
      t.grad_mut(bi) += gy * t.value_of(ai);
    };
  });
}

Var sum(Var x) {
  const int xi = x.id;
  return make_op(x.tape, Matrix::Constant(1, 1, x.value().sum()), [xi](int yi) {
    return [xi, yi](Tape& t) {
      t.grad_mut(xi).array() += t.grad_of(yi)(0, 0);
    };
  });
}

Var logsumexp(Var x) {
  require_column(x, "logsumexp");
  if (x.rows() == 0) throw ShapeError("logsumexp: empty input");
  const double lse = hsg::logsumexp(x.value().col(0));
  const int xi = x.id;
  return make_op(x.tape, Matrix::Constant(1, 1, lse), [xi, lse](int yi) {
    return [xi, lse, yi](Tape& t) {
      const double gy = t.grad_of(yi)(0, 0);
      t.grad_mut(xi).col(0).array() +=
          gy * (t.value_of(xi).col(0).array() - lse).exp();
    };
  });
}

Var pick(Var x, int index) {
  require_column(x, "pick");
  if (index < 0 || index >= x.rows()) throw ShapeError("pick: index out of range");
  const int xi = x.id;
  return make_op(x.tape, Matrix::Constant(1, 1, x.value()(index, 0)), [xi, index](int yi) {
    return [xi, index, yi](Tape& t) {
      t.grad_mut(xi)(index, 0) += t.grad_of(yi)(0, 0);
    };
  });
}

double grad_check(std::span<const Matrix> leaf_values,
                  const std::function<Var(Tape&, std::span<const Var>)>& build,
                  double eps) {
  if (eps <= 0.0) throw Error("grad_check: eps must be positive");

  auto evaluate = [&](std::span<const Matrix> vals) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(vals.size());
    for (const Matrix& v : vals) leaves.push_back(tape.input(v));
    Var root = build(tape, leaves);
    if (!root.is_scalar()) throw ShapeError("grad_check: build must return a scalar");
    return root.scalar();
  };

  // Analytic pass.
  Tape tape;
  std::vector<Var> leaves;
  for (const Matrix& v : leaf_values) leaves.push_back(tape.input(v));
  Var root = build(tape, leaves);
  if (!root.is_scalar()) throw ShapeError("grad_check: build must return a scalar");
  tape.backward(root);
  std::vector<Matrix> analytic;
  analytic.reserve(leaves.size());
  for (const Var& l : leaves) analytic.push_back(l.grad());

  std::vector<Matrix> work(leaf_values.begin(), leaf_values.end());
  double max_rel = 0.0;
  for (std::size_t k = 0; k < work.size(); ++k) {
    for (Eigen::Index r = 0; r < work[k].rows(); ++r) {
      for (Eigen::Index c = 0; c < work[k].cols(); ++c) {
        const double saved = work[k](r, c);
        work[k](r, c) = saved + eps;
        const double fp = evaluate(work);
        work[k](r, c) = saved - eps;
        const double fm = evaluate(work);
        work[k](r, c) = saved;
        const double fd = (fp - fm) / (2.0 * eps);
        const double a = analytic[k](r, c);
        if (!std::isfinite(fd)) throw NumericError("grad_check: non-finite difference");
        const double rel = std::abs(a - fd) / std::max(1.0, std::abs(a));
        max_rel = std::max(max_rel, rel);
      }
    }
  }
  return max_rel;
}

}  // namespace hsg::ad
