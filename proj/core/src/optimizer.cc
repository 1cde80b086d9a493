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

#include "lsan/optimizer.h"

#include <cmath>

#include "lsan/error.h"

namespace lsan {

template <typename Real>
Adam<Real>::Adam(std::span<const NamedTensor<Real>> params, AdamConfig config)
    : params_(params.begin(), params.end()), config_(config) {
  if (!(config_.learning_rate > 0) || !(config_.epsilon > 0) ||
      !(config_.beta1 >= 0 && config_.beta1 < 1) ||
      !(config_.beta2 >= 0 && config_.beta2 < 1)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.size(), Real(0));
    v_.emplace_back(p.tensor.size(), Real(0));
  }
}

template <typename Real>
void Adam<Real>::Step() {
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) {
      throw ContractError("parameter '" + p.name +
                          "' has no gradient; it is detached from the loss");
    }
  }
  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto values = params_[i].tensor.mutable_values();
    const auto grad = params_[i].tensor.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double g = grad[k];
      const double mk = b1 * m[k] + (1.0 - b1) * g;
      const double vk = b2 * v[k] + (1.0 - b2) * g * g;
      m[k] = static_cast<Real>(mk);
      v[k] = static_cast<Real>(vk);
      const double m_hat = mk / correction1;
      const double v_hat = vk / correction2;
      values[k] = static_cast<Real>(
          values[k] - config_.learning_rate * m_hat /
                          (std::sqrt(v_hat) + config_.epsilon));
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace lsan
