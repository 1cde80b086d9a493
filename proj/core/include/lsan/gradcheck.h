// Copyright 2026 The LSAN Authors.
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

#ifndef LSAN_GRADCHECK_H_
#define LSAN_GRADCHECK_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lsan/tensor.h"

namespace lsan {

struct GradCheckOptions {
  // Central-difference step; must lie in [1e-7, 1e-3].
  double eps = 1e-5;
  // Coordinates sampled per tensor; 0 checks every coordinate.
  std::size_t max_coordinates_per_tensor = 0;
  std::uint64_t seed = 0;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|,
  // floor), so near-zero gradients are compared absolutely.
  double relative_floor = 1e-6;
};

struct GradCheckEntry {
  std::string name;
  std::size_t coordinates_checked = 0;
  double max_relative_error = 0;
  double max_absolute_error = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;

  double max_relative_error() const;
};

// Compares reverse-mode gradients of `forward` (a scalar-valued closure over
// `params`) against central finite differences. Parameters are perturbed in
// place and restored. Informational: thresholds belong to the caller.
GradCheckReport FiniteDiffCheck(
    const std::function<Tensor<double>()>& forward,
    std::span<NamedTensor<double>> params,
    const GradCheckOptions& options = {});

}  // namespace lsan

#endif  // LSAN_GRADCHECK_H_
