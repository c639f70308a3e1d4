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

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hsg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Array = Eigen::ArrayXd;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor/matrix dimensions do not line up.
struct ShapeError : Error {
  using Error::Error;
};

/// A computation produced a non-finite value or was fed one.
struct NumericError : Error {
  using Error::Error;
};

/// Structurally invalid input file (JSON schema, vocabulary, simplex).
struct ParseError : Error {
  using Error::Error;
};

/// Filesystem or binary-container failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace hsg
