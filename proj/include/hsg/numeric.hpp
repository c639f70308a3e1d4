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

#include <cmath>

#include "hsg/common.hpp"

namespace hsg {

// Shared scalar/vector kernels. Softmax and log-sum-exp are always
// max-subtracted; sigmoid and softplus never evaluate exp on a positive
// argument larger than 0.

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

/// log(sum(exp(z))) over a dense vector expression.
template <typename Derived>
typename Derived::Scalar logsumexp(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Vector<Scalar, Eigen::Dynamic> z = logits;
  if (z.size() == 0) throw ShapeError("logsumexp: empty input");
  const Scalar m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

/// Probability simplex from logits.
template <typename Derived>
Eigen::Vector<typename Derived::Scalar, Eigen::Dynamic> softmax(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Vector<Scalar, Eigen::Dynamic> z = logits;
  if (z.size() == 0) throw ShapeError("softmax: empty input");
  const Scalar m = z.maxCoeff();
  Eigen::Array<Scalar, Eigen::Dynamic, 1> e = (z.array() - m).exp();
  return (e / e.sum()).matrix();
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite value");
}

}  // namespace hsg
