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

#ifndef LSAN_OPTIMIZER_H_
#define LSAN_OPTIMIZER_H_

#include <cstdint>
#include <span>
#include <vector>

#include "lsan/tensor.h"

namespace lsan {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over a fixed parameter set. Moments are kept per
// parameter value in the parameters' own precision.
template <typename Real>
class Adam {
 public:
  Adam(std::span<const NamedTensor<Real>> params, AdamConfig config);

  // Applies one update to every parameter and advances the step count.
  // Throws ContractError if any parameter has no gradient buffer, which
  // means it was detached from the loss.
  void Step();

  std::int64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  std::span<const Real> first_moment(std::size_t param) const {
    return m_[param];
  }
  std::span<const Real> second_moment(std::size_t param) const {
    return v_[param];
  }

 private:
  std::vector<NamedTensor<Real>> params_;
  AdamConfig config_;
  std::vector<std::vector<Real>> m_;
  std::vector<std::vector<Real>> v_;
  std::int64_t steps_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace lsan

#endif  // LSAN_OPTIMIZER_H_
