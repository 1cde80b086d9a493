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

#ifndef LSAN_MODEL_H_
#define LSAN_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsan/embedding.h"
#include "lsan/tensor.h"
#include "lsan/twin_attention.h"

namespace lsan {

enum class VariantKind {
  kFull,            // compositional embedding + dynamic fusion + twin attention
  kFullEmbedding,   // one |V| x D table, no compression
  kWithoutDynamic,  // bases summed instead of attentively fused
  kPlainAttention,  // conv heads replaced by attention heads (2H in total)
};

inline constexpr VariantKind kAllVariants[] = {
    VariantKind::kFull, VariantKind::kFullEmbedding,
    VariantKind::kWithoutDynamic, VariantKind::kPlainAttention};

// "full", "full_emb", "wo_dynamic", "plain_attn".
std::string_view VariantName(VariantKind kind);
// Throws ConfigError for unknown names.
VariantKind ParseVariant(std::string_view name);

struct ModelConfig {
  std::int64_t num_items = 0;     // |V|
  std::int64_t num_contexts = 1;  // context table rows, unknown row included
  std::size_t dim = 128;          // D
  std::size_t window = 5;         // L
  std::size_t heads = 2;          // H, per branch
  std::size_t layers = 1;
  std::size_t max_len = 50;       // T_max
  std::size_t num_tables = 2;     // N
  std::int64_t m1 = 2;
  // Explicit base table sizes; empty means DefaultTableSizes(|V|, N, m1).
  std::vector<std::int64_t> table_sizes;
  VariantKind variant = VariantKind::kFull;
  std::uint64_t seed = 42;

  // Table sizes after applying the variant (full_emb forces {|V|}).
  std::vector<std::int64_t> ResolvedTableSizes() const;
  // Throws ConfigError on inconsistent values.
  void Validate() const;
  // key=value lines in a fixed order, used for checkpoints and hashing.
  std::map<std::string, std::string> ToKeyValues() const;
  static ModelConfig FromKeyValues(const std::map<std::string, std::string>& kv);
};

// One model input: items (kPaddingItem allowed) with aligned contexts.
struct SequenceInput {
  std::vector<ItemIndex> items;
  std::vector<ContextIndex> contexts;
};

struct TrainingExample {
  SequenceInput input;
  ItemIndex target = kPaddingItem;
};

// Per-layer point-wise FFN: GeLU(x W1 + b1) W2 + b2.
template <typename Real>
struct FeedForward {
  Tensor<Real> w1;  // 2HD x 2HD
  Tensor<Real> b1;  // 1 x 2HD
  Tensor<Real> w2;  // 2HD x D
  Tensor<Real> b2;  // 1 x D
};

template <typename Real>
struct ForwardTrace {
  Tensor<Real> logits;                              // 1 x |V|
  std::vector<std::vector<Tensor<Real>>> attention;  // [layer][head] T x T
  Tensor<Real> fusion_weights;                      // T x N
};

template <typename Real>
class LsanModel {
 public:
  // Builds and randomly initialises every parameter from config.seed.
  explicit LsanModel(ModelConfig config);

  LsanModel(const LsanModel&) = delete;
  LsanModel& operator=(const LsanModel&) = delete;
  LsanModel(LsanModel&&) noexcept = default;
  LsanModel& operator=(LsanModel&&) noexcept = default;

  const ModelConfig& config() const { return config_; }
  const CompositionalEmbedding<Real>& embedding() const { return *embedding_; }
  std::span<const TwinAttentionLayer<Real>> layers() const { return layers_; }
  std::span<const FeedForward<Real>> feed_forwards() const { return ffn_; }
  const Tensor<Real>& output_weight() const { return output_weight_; }
  const Tensor<Real>& output_bias() const { return output_bias_; }

  // The trainable set, in a stable order that checkpoints rely on.
  std::span<const NamedTensor<Real>> parameters() const { return params_; }
  std::span<NamedTensor<Real>> mutable_parameters() { return params_; }

  // Unnormalised next-item scores over all |V| items, read out at the last
  // non-padded position. Throws ContractError on empty, all-padding or
  // over-long input.
  Tensor<Real> Logits(const SequenceInput& input) const;
  ForwardTrace<Real> Trace(const SequenceInput& input) const;

  void ZeroGrad();

 private:
  ForwardTrace<Real> Run(const SequenceInput& input, bool keep_trace) const;

  ModelConfig config_;
  std::unique_ptr<CompositionalEmbedding<Real>> embedding_;
  std::vector<TwinAttentionLayer<Real>> layers_;
  std::vector<FeedForward<Real>> ffn_;
  Tensor<Real> output_weight_;  // |V| x D
  Tensor<Real> output_bias_;    // 1 x |V|
  std::vector<NamedTensor<Real>> params_;
};

// Next-item probability vector (1 x |V|), softmax of Logits.
template <typename Real>
Tensor<Real> ForwardScores(const SequenceInput& input,
                           const LsanModel<Real>& model);

// Mean cross-entropy over the batch plus l2 * (sum of squares over every
// trainable value). Scalar, differentiable end to end. Throws IndexError
// for invalid targets.
template <typename Real>
Tensor<Real> TrainingLoss(std::span<const TrainingExample> batch,
                          const LsanModel<Real>& model, double l2);

// Same value and gradients as TrainingLoss, but runs backward one sample
// at a time so only one sample's graph is alive. Gradients accumulate into
// the parameters; the caller zeroes them. Returns the loss value.
template <typename Real>
double AccumulateLossGradients(std::span<const TrainingExample> batch,
                               LsanModel<Real>& model, double l2);

// Indices of the K highest scores, ties broken by lower index first.
// Throws ContractError unless 1 <= K <= scores.size().
template <typename Real>
std::vector<ItemIndex> TopK(std::span<const Real> scores, std::size_t k);

template <typename Real>
std::vector<ItemIndex> PredictTopK(const SequenceInput& input,
                                   const LsanModel<Real>& model, std::size_t k);

template <typename Real>
LsanModel<Real> BuildVariant(VariantKind kind, ModelConfig config);

struct ParameterBreakdown {
  std::int64_t embedding = 0;  // base tables
  std::int64_t context = 0;    // context table
  std::int64_t fusion = 0;     // W_a + context-injection MLP
  std::int64_t position = 0;   // position tables
  std::int64_t encoder = 0;    // conv kernels + attention projections
  std::int64_t ffn = 0;
  std::int64_t output = 0;     // W_o + b_o
  std::int64_t total = 0;
  // Base-table values over an uncompressed |V| x D table.
  double embedding_ratio = 0;
};

// Exact counts obtained by enumerating the trainable set.
template <typename Real>
ParameterBreakdown CountParameters(const LsanModel<Real>& model);

extern template class LsanModel<float>;
extern template class LsanModel<double>;

}  // namespace lsan

#endif  // LSAN_MODEL_H_
