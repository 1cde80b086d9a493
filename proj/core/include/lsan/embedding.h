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

#ifndef LSAN_EMBEDDING_H_
#define LSAN_EMBEDDING_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "lsan/tensor.h"

namespace lsan {

// Items are numbered 0..|V|-1. Padding lives outside that range.
using ItemIndex = std::int32_t;
inline constexpr ItemIndex kPaddingItem = -1;

// Categories are numbered from 1; 0 marks "no previous item".
using CategoryIndex = std::int32_t;
inline constexpr CategoryIndex kPadCategory = 0;

// Row of the context table. Row 0 is shared by every unseen triplet.
using ContextIndex = std::int32_t;
inline constexpr ContextIndex kUnknownContext = 0;

// Quotient-remainder decomposition of an item index into one row per base
// table: row_1 = g mod m_1, row_n = (g div (m_1 * ... * m_{n-1})) mod m_n.
// Injective on [0, m_1 * ... * m_N).
class QuotientRemainder {
 public:
  // Throws ConfigError unless every size is >= 1 and their product covers
  // num_items.
  QuotientRemainder(std::vector<std::int64_t> sizes, std::int64_t num_items);

  std::span<const std::int64_t> sizes() const { return sizes_; }
  std::size_t num_tables() const { return sizes_.size(); }
  std::int64_t num_items() const { return num_items_; }

  // Throws IndexError for g outside [0, num_items).
  std::vector<std::int32_t> Decompose(ItemIndex g) const;
  void Decompose(ItemIndex g, std::span<std::int32_t> rows) const;

 private:
  std::vector<std::int64_t> sizes_;
  std::int64_t num_items_;
};

// Table sizes for N tables when only m_1 is chosen: N = 1 gives the full
// table; otherwise the remaining N-1 tables share the smallest size q with
// m_1 * q^(N-1) >= num_items (q = ceil(|V| / m_1) for N = 2).
std::vector<std::int64_t> DefaultTableSizes(std::int64_t num_items,
                                            std::size_t num_tables,
                                            std::int64_t m1);

// Triplet (previous category, current category, hour of day).
struct ContextKey {
  CategoryIndex previous = kPadCategory;
  CategoryIndex current = kPadCategory;
  std::int32_t hour = 0;

  friend bool operator==(const ContextKey&, const ContextKey&) = default;
};

// Dense numbering of observed context triplets. Index 0 is reserved for
// unseen triplets; observed ones are numbered from 1 in insertion order.
class ContextVocab {
 public:
  ContextVocab() = default;

  // Returns the existing index or assigns the next one. Throws
  // ContractError when the hour is outside 0..23 or a category is negative.
  ContextIndex Add(const ContextKey& key);
  // Never fails: unseen triplets map to kUnknownContext.
  ContextIndex Lookup(const ContextKey& key) const;

  // Number of table rows, including the unknown row.
  std::size_t size() const { return keys_.size() + 1; }
  // Observed triplets; keys()[i] has index i + 1.
  std::span<const ContextKey> keys() const { return keys_; }

  // Tab-separated "prev-cat cur-cat hour index", one observed triplet per
  // line.
  void Save(const std::filesystem::path& path) const;
  static ContextVocab Load(const std::filesystem::path& path);

 private:
  struct KeyHash {
    std::size_t operator()(const ContextKey& key) const;
  };

  std::vector<ContextKey> keys_;
  std::unordered_map<ContextKey, ContextIndex, KeyHash> index_;
};

// How selected base embeddings are merged into one item vector.
enum class FusionMode {
  kDynamic,  // context-conditioned softmax weights over the N bases
  kSum,      // plain sum of the bases
};

// W_a (absent when fusion is not dynamic or N = 1) and the one-layer
// 2D -> D context-injection perceptron.
template <typename Real>
struct FusionParams {
  Tensor<Real> w_a;         // D x D
  Tensor<Real> mlp_weight;  // 2D x D
  Tensor<Real> mlp_bias;    // 1 x D
};

template <typename Real>
struct FusionResult {
  Tensor<Real> embedding;  // rows x D
  Tensor<Real> weights;    // rows x N, each row a probability vector
};

// Row-wise dynamic fusion. bases[n] and context are rows x D; for each row
//   alpha_n = softmax_n(context . SiLU(W_a base_n)),  h = sum_n alpha_n base_n.
template <typename Real>
FusionResult<Real> FuseDynamic(std::span<const Tensor<Real>> bases,
                               const Tensor<Real>& context,
                               const Tensor<Real>& w_a);

// Unweighted sum of the bases.
template <typename Real>
Tensor<Real> FuseSum(std::span<const Tensor<Real>> bases);

// SiLU([h ; context] * mlp_weight + mlp_bias), row-wise.
template <typename Real>
Tensor<Real> Contextualize(const Tensor<Real>& h, const Tensor<Real>& context,
                           const FusionParams<Real>& params);

// Base tables, context table and fusion parameters of the item embedding
// layer. Replaces a |V| x D table with sum_n m_n x D rows.
template <typename Real>
class CompositionalEmbedding {
 public:
  CompositionalEmbedding(QuotientRemainder decomposition,
                         std::size_t num_contexts, std::size_t dim,
                         FusionMode mode, std::mt19937_64& rng);

  const QuotientRemainder& decomposition() const { return decomposition_; }
  std::size_t dim() const { return dim_; }
  FusionMode mode() const { return mode_; }
  bool uses_attention() const { return fusion_.w_a.defined(); }

  // One 1 x D row per base table: row Decompose(item)[n] of table n.
  std::vector<Tensor<Real>> LookupBases(ItemIndex item) const;

  // T x D matrix of contextualised compositional embeddings. Padding items
  // produce zero rows. Throws ContractError when the spans differ in length
  // or are empty.
  Tensor<Real> Embed(std::span<const ItemIndex> items,
                     std::span<const ContextIndex> contexts) const;

  // Same as Embed but also returns the T x N fusion weights (uniform 1/N
  // rows when fusion is a plain sum).
  FusionResult<Real> EmbedWithWeights(
      std::span<const ItemIndex> items,
      std::span<const ContextIndex> contexts) const;

  std::span<const Tensor<Real>> base_tables() const { return tables_; }
  const Tensor<Real>& context_table() const { return context_table_; }
  const FusionParams<Real>& fusion() const { return fusion_; }

  void AppendParameters(std::vector<NamedTensor<Real>>& out) const;

 private:
  QuotientRemainder decomposition_;
  std::size_t dim_;
  FusionMode mode_;
  std::vector<Tensor<Real>> tables_;
  Tensor<Real> context_table_;
  FusionParams<Real> fusion_;
};

// Leaf tensor of the given shape with values uniform in
// [-1/sqrt(fan), 1/sqrt(fan)].
template <typename Real>
Tensor<Real> UniformInit(Shape shape, std::size_t fan, std::mt19937_64& rng);

extern template class CompositionalEmbedding<float>;
extern template class CompositionalEmbedding<double>;

}  // namespace lsan

#endif  // LSAN_EMBEDDING_H_
