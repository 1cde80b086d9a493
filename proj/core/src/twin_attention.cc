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

#include "lsan/twin_attention.h"

#include <cmath>
#include <string>

#include "lsan/embedding.h"
#include "lsan/error.h"
#include "lsan/ops.h"

namespace lsan {

template <typename Real>
Tensor<Real> ConvBranch(const Tensor<Real>& h, const ConvHead<Real>& head) {
  return DepthwiseConv1d(h, head.kernels);
}

template <typename Real>
AttnOutput<Real> AttnBranch(const Tensor<Real>& h,
                            const PositionTable<Real>& positions,
                            const AttnHead<Real>& head, std::size_t head_count,
                            std::span<const std::uint8_t> valid) {
  const std::size_t length = h.rows();
  const std::size_t dim = h.cols();
  if (length > positions.table.rows()) {
    throw ContractError("sequence length " + std::to_string(length) +
                        " exceeds the position table (" +
                        std::to_string(positions.table.rows()) + ")");
  }
  if (valid.size() != length) {
    throw ContractError("validity mask length differs from sequence length");
  }
  if (head_count == 0) throw ContractError("head count must be positive");
  const Tensor<Real> shifted =
      Add(h, length == positions.table.rows()
                 ? positions.table
                 : Slice(positions.table, 0, 0, length));
  const Tensor<Real> q = Matmul(shifted, head.w_q, true);
  const Tensor<Real> k = Matmul(shifted, head.w_k, true);
  const Tensor<Real> v = Matmul(shifted, head.w_v, true);
  const Real scale = static_cast<Real>(
      1.0 / std::sqrt(static_cast<double>(dim) / head_count));
  const Mask mask{{length}, std::vector<std::uint8_t>(valid.begin(),
                                                      valid.end())};
  Tensor<Real> weights = Softmax(Scale(Matmul(q, k, true), scale), 1, &mask);
  return {Matmul(weights, v), weights};
}

template <typename Real>
TwinOutput<Real> TwinForward(const Tensor<Real>& h,
                             std::span<const ConvHead<Real>> conv_heads,
                             std::span<const AttnHead<Real>> attn_heads,
                             const PositionTable<Real>& positions,
                             std::span<const std::uint8_t> valid,
                             std::size_t scale_heads) {
  if (attn_heads.empty()) throw ContractError("no attention heads");
  if (!conv_heads.empty() && conv_heads.size() != attn_heads.size()) {
    throw ContractError("twin branches need equal head counts, got " +
                        std::to_string(conv_heads.size()) + " conv and " +
                        std::to_string(attn_heads.size()) + " attention");
  }
  TwinOutput<Real> result;
  std::vector<Tensor<Real>> parts;
  parts.reserve(conv_heads.size() + attn_heads.size());
  for (const auto& head : conv_heads) parts.push_back(ConvBranch(h, head));
  for (const auto& head : attn_heads) {
    AttnOutput<Real> out = AttnBranch(h, positions, head, scale_heads, valid);
    parts.push_back(std::move(out.output));
    result.attention.push_back(std::move(out.weights));
  }
  for (const auto& part : parts) {
    if (part.rows() != h.rows() || part.cols() != h.cols()) {
      throw ContractError("head output " + ShapeToString(part.shape()) +
                          " does not match input " + ShapeToString(h.shape()));
    }
  }
  result.features = parts.size() == 1
                        ? parts[0]
                        : Concat(std::span<const Tensor<Real>>(parts), 1);
  return result;
}

BranchParamCount CountBranchParams(std::int64_t heads, std::int64_t window,
                                   std::int64_t dim) {
  if (heads <= 0 || window <= 0 || dim <= 0) {
    throw ContractError("branch parameter counts need positive arguments");
  }
  return {heads * (window * dim + 3 * dim * dim), 6 * heads * dim * dim};
}

template <typename Real>
TwinAttentionLayer<Real>::TwinAttentionLayer(std::size_t dim,
                                             std::size_t window,
                                             std::size_t heads,
                                             std::size_t max_len,
                                             bool plain_attention,
                                             std::mt19937_64& rng)
    : dim_(dim) {
  if (heads == 0) throw ConfigError("head count must be positive");
  if (window == 0 || window % 2 == 0) {
    throw ConfigError("convolution window must be odd and positive");
  }
  if (max_len == 0) throw ConfigError("maximum sequence length must be positive");
  positions_.table = UniformInit<Real>({max_len, dim}, dim, rng);
  if (!plain_attention) {
    for (std::size_t i = 0; i < heads; ++i) {
      conv_heads_.push_back({UniformInit<Real>({window, dim}, dim, rng)});
    }
  }
  const std::size_t attn_count = plain_attention ? 2 * heads : heads;
  for (std::size_t i = 0; i < attn_count; ++i) {
    AttnHead<Real> head;
    head.w_q = UniformInit<Real>({dim, dim}, dim, rng);
    head.w_k = UniformInit<Real>({dim, dim}, dim, rng);
    head.w_v = UniformInit<Real>({dim, dim}, dim, rng);
    attn_heads_.push_back(std::move(head));
  }
}

template <typename Real>
TwinOutput<Real> TwinAttentionLayer<Real>::Forward(
    const Tensor<Real>& h, std::span<const std::uint8_t> valid) const {
  return TwinForward(h, std::span<const ConvHead<Real>>(conv_heads_),
                     std::span<const AttnHead<Real>>(attn_heads_), positions_,
                     valid, attn_heads_.size());
}

template <typename Real>
void TwinAttentionLayer<Real>::AppendParameters(
    const std::string& prefix, std::vector<NamedTensor<Real>>& out) const {
  out.push_back({prefix + "position", positions_.table});
  for (std::size_t i = 0; i < conv_heads_.size(); ++i) {
    out.push_back({prefix + "conv" + std::to_string(i) + ".kernels",
                   conv_heads_[i].kernels});
  }
  for (std::size_t i = 0; i < attn_heads_.size(); ++i) {
    const std::string head = prefix + "attn" + std::to_string(i) + ".";
    out.push_back({head + "w_q", attn_heads_[i].w_q});
    out.push_back({head + "w_k", attn_heads_[i].w_k});
    out.push_back({head + "w_v", attn_heads_[i].w_v});
  }
}

#define LSAN_INSTANTIATE_TWIN(Real)                                          \
  template Tensor<Real> ConvBranch(const Tensor<Real>&,                      \
                                   const ConvHead<Real>&);                   \
  template AttnOutput<Real> AttnBranch(                                      \
      const Tensor<Real>&, const PositionTable<Real>&, const AttnHead<Real>&, \
      std::size_t, std::span<const std::uint8_t>);                           \
  template TwinOutput<Real> TwinForward(                                     \
      const Tensor<Real>&, std::span<const ConvHead<Real>>,                  \
      std::span<const AttnHead<Real>>, const PositionTable<Real>&,           \
      std::span<const std::uint8_t>, std::size_t);                           \
  template class TwinAttentionLayer<Real>;

LSAN_INSTANTIATE_TWIN(float)
LSAN_INSTANTIATE_TWIN(double)

#undef LSAN_INSTANTIATE_TWIN

}  // namespace lsan
