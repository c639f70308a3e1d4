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

#include <cstdint>

#include "hsg/checkpoint.hpp"

namespace hsg {

/// Builds a randomized micro pipeline (grid -> assembly -> head -> all loss
/// terms) and runs central-difference gradient checking over every projection
/// and head parameter entry. Returns the max relative error.
double gradcheck_pipeline(std::uint64_t seed, HeadKind kind, HeadMode mode,
                          double eps = 1e-6);

/// Max over `num_seeds` seeds and all three head configurations
/// (bayes/bayes_consistent, bayes/literal_eq3, flat).
double run_gradcheck(std::uint64_t base_seed, int num_seeds, double eps = 1e-6);

}  // namespace hsg
