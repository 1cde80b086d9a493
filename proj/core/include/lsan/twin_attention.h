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

#ifndef LSAN_TWIN_ATTENTION_H_
#define LSAN_TWIN_ATTENTION_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lsan/tensor.h"

namespace lsan {

// Depthwise convolution head: one length-L kernel per channel.
template <typename Real>
struct ConvHead {
  Tensor<Real> kernels;  // L x D
};

// Scaled dot-product attention head.
template <typename Real>
struct AttnHead {
  Tensor<Real> w_q;  // D x D
  Tensor<Real> w_k;  // D x D
  Tensor<Real> w_v;  // D x D
};

// Learnable absolute position embeddings, row t for position t.
template <typename Real>
struct PositionTable {
  Tensor<Real> table;  // T_max x D
};

// Local branch: centred depthwise convolution with zero padding, so row i
// only sees rows i - L/2 .. i + L/2 of h.
template <typename Real>
Tensor<Real> ConvBranch(const Tensor<Real>& h, const ConvHead<Real>& head);

template <typename Real>
struct AttnOutput {
  Tensor<Real> output;   // T x D
  Tensor<Real> weights;  // T x T, rows sum to 1
};

// Global branch: H~ = h + P[0..T), Q = H~ Wq^T, K = H~ Wk^T, V = H~ Wv^T,
// A = softmax(Q K^T / sqrt(D / head_count)) with padded key columns masked,
// output = A V. Bidirectional: no causal mask. `valid` has one entry per
// row (nonzero = real item). Throws ContractError when T exceeds the
// position table.
template <typename Real>
AttnOutput<Real> AttnBranch(const Tensor<Real>& h,
                            const PositionTable<Real>& positions,
                            const AttnHead<Real>& head, std::size_t head_count,
                            std::span<const std::uint8_t> valid);

template <typename Real>
struct TwinOutput {
  Tensor<Real> features;                    // T x (heads * D)
  std::vector<Tensor<Real>> attention;      // one T x T matrix per attn head
};

// Concatenates [conv_1 .. conv_H ; attn_1 .. attn_H] along features, conv
// heads first. Either both branches have the same head count, or there are
// no conv heads (pure multi-head attention). `scale_heads` is the H in
// sqrt(D / H).
template <typename Real>
TwinOutput<Real> TwinForward(const Tensor<Real>& h,
                             std::span<const ConvHead<Real>> conv_heads,
                             std::span<const AttnHead<Real>> attn_heads,
                             const PositionTable<Real>& positions,
                             std::span<const std::uint8_t> valid,
                             std::size_t scale_heads);

struct BranchParamCount {
  std::int64_t twin = 0;   // H * (L * D + 3 * D^2)
  std::int64_t plain = 0;  // 6 * H * D^2
};

BranchParamCount CountBranchParams(std::int64_t heads, std::int64_t window,
                                   std::int64_t dim);

// One encoder layer: H conv + H attention heads (twin) or 2H attention
// heads (plain), plus its position table.
template <typename Real>
class TwinAttentionLayer {
 public:
  TwinAttentionLayer(std::size_t dim, std::size_t window, std::size_t heads,
                     std::size_t max_len, bool plain_attention,
                     std::mt19937_64& rng);

  TwinOutput<Real> Forward(const Tensor<Real>& h,
                           std::span<const std::uint8_t> valid) const;

  std::size_t output_width() const {
    return (conv_heads_.size() + attn_heads_.size()) * dim_;
  }
  std::span<const ConvHead<Real>> conv_heads() const { return conv_heads_; }
  std::span<const AttnHead<Real>> attn_heads() const { return attn_heads_; }
  const PositionTable<Real>& positions() const { return positions_; }

  // Names are prefixed with `prefix` (e.g. "layer0.").
  void AppendParameters(const std::string& prefix,
                        std::vector<NamedTensor<Real>>& out) const;

 private:
  std::size_t dim_;
  std::vector<ConvHead<Real>> conv_heads_;
  std::vector<AttnHead<Real>> attn_heads_;
  PositionTable<Real> positions_;
};

extern template class TwinAttentionLayer<float>;
extern template class TwinAttentionLayer<double>;

}  // namespace lsan

#endif  // LSAN_TWIN_ATTENTION_H_
