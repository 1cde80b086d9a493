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

#include "lsan/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lsan/error.h"

namespace lsan {

double GradCheckReport::max_relative_error() const {
  double worst = 0;
  for (const auto& e : entries) worst = std::max(worst, e.max_relative_error);
  return worst;
}

GradCheckReport FiniteDiffCheck(
    const std::function<Tensor<double>()>& forward,
    std::span<NamedTensor<double>> params, const GradCheckOptions& options) {
  if (!(options.eps >= 1e-7 && options.eps <= 1e-3)) {
    throw ContractError("finite-difference eps must lie in [1e-7, 1e-3]");
  }
  for (auto& p : params) p.tensor.ZeroGrad();
  forward().Backward();

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (auto& p : params) {
    GradCheckEntry entry;
    entry.name = p.name;
    const std::vector<double> analytic(p.tensor.grad().begin(),
                                       p.tensor.grad().end());
    std::vector<std::size_t> coords(p.tensor.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coordinates_per_tensor > 0 &&
        coords.size() > options.max_coordinates_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coordinates_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    auto values = p.tensor.mutable_values();
    for (std::size_t c : coords) {
      const double original = values[c];
      double plus;
      double minus;
      {
        NoGradGuard no_grad;
        values[c] = original + options.eps;
        plus = forward().item();
        values[c] = original - options.eps;
        minus = forward().item();
      }
      values[c] = original;
      const double numeric = (plus - minus) / (2 * options.eps);
      const double abs_err = std::abs(analytic[c] - numeric);
      const double denom = std::max({std::abs(analytic[c]), std::abs(numeric),
                                     options.relative_floor});
      entry.max_absolute_error = std::max(entry.max_absolute_error, abs_err);
      entry.max_relative_error =
          std::max(entry.max_relative_error, abs_err / denom);
      ++entry.coordinates_checked;
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace lsan
