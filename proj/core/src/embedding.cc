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

#include "lsan/embedding.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "lsan/error.h"
#include "lsan/ops.h"

namespace lsan {
namespace {

// Saturating product; anything past int64 range already covers any |V|.
std::int64_t SaturatingProduct(std::span<const std::int64_t> sizes) {
  std::int64_t product = 1;
  for (std::int64_t m : sizes) {
    if (product > std::numeric_limits<std::int64_t>::max() / m) {
      return std::numeric_limits<std::int64_t>::max();
    }
    product *= m;
  }
  return product;
}

}  // namespace

QuotientRemainder::QuotientRemainder(std::vector<std::int64_t> sizes,
                                     std::int64_t num_items)
    : sizes_(std::move(sizes)), num_items_(num_items) {
  if (sizes_.empty()) throw ConfigError("at least one base table is required");
  if (num_items_ < 1) throw ConfigError("item count must be positive");
  for (std::int64_t m : sizes_) {
    if (m < 1) throw ConfigError("base table sizes must be >= 1");
    if (m > std::numeric_limits<std::int32_t>::max()) {
      throw ConfigError("base table size exceeds 32-bit row range");
    }
  }
  if (SaturatingProduct(sizes_) < num_items_) {
    std::ostringstream msg;
    msg << "product of base table sizes (";
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
      msg << (i ? "*" : "") << sizes_[i];
    }
    msg << ") is smaller than the item count " << num_items_;
    throw ConfigError(msg.str());
  }
}

std::vector<std::int32_t> QuotientRemainder::Decompose(ItemIndex g) const {
  std::vector<std::int32_t> rows(sizes_.size());
  Decompose(g, rows);
  return rows;
}

void QuotientRemainder::Decompose(ItemIndex g,
                                  std::span<std::int32_t> rows) const {
  if (g < 0 || g >= num_items_) {
    throw IndexError("item index " + std::to_string(g) + " outside [0, " +
                     std::to_string(num_items_) + ")");
  }
  if (rows.size() != sizes_.size()) {
    throw ContractError("decomposition needs one slot per base table");
  }
  std::int64_t rest = g;
  for (std::size_t n = 0; n < sizes_.size(); ++n) {
    rows[n] = static_cast<std::int32_t>(rest % sizes_[n]);
    rest /= sizes_[n];
  }
}

std::vector<std::int64_t> DefaultTableSizes(std::int64_t num_items,
                                            std::size_t num_tables,
                                            std::int64_t m1) {
  if (num_items < 1) throw ConfigError("item count must be positive");
  if (num_tables < 1) throw ConfigError("at least one base table is required");
  if (num_tables == 1) return {num_items};
  if (m1 < 1) throw ConfigError("m1 must be >= 1");
  const std::int64_t remaining = (num_items + m1 - 1) / m1;
  const std::size_t others = num_tables - 1;
  // Smallest q with q^others >= remaining.
  auto q = static_cast<std::int64_t>(
      std::floor(std::pow(static_cast<double>(remaining), 1.0 / others)));
  q = std::max<std::int64_t>(q - 1, 1);
  auto covers = [&](std::int64_t candidate) {
    std::int64_t product = 1;
    for (std::size_t i = 0; i < others; ++i) {
      product *= candidate;
      if (product >= remaining) return true;
    }
    return product >= remaining;
  };
  while (!covers(q)) ++q;
  std::vector<std::int64_t> sizes{m1};
  sizes.insert(sizes.end(), others, q);
  return sizes;
}

std::size_t ContextVocab::KeyHash::operator()(const ContextKey& key) const {
  std::uint64_t h = static_cast<std::uint32_t>(key.previous);
  h = h * 0x9E3779B97F4A7C15ULL + static_cast<std::uint32_t>(key.current);
  h = h * 0x9E3779B97F4A7C15ULL + static_cast<std::uint32_t>(key.hour);
  return static_cast<std::size_t>(h ^ (h >> 29));
}

ContextIndex ContextVocab::Add(const ContextKey& key) {
  if (key.hour < 0 || key.hour > 23) {
    throw ContractError("hour of day must lie in 0..23, got " +
                        std::to_string(key.hour));
  }
  if (key.previous < 0 || key.current < 0) {
    throw ContractError("category indices must be non-negative");
  }
  const auto [it, inserted] =
      index_.try_emplace(key, static_cast<ContextIndex>(size()));
  if (inserted) keys_.push_back(key);
  return it->second;
}

ContextIndex ContextVocab::Lookup(const ContextKey& key) const {
  if (key.hour < 0 || key.hour > 23 || key.previous < 0 || key.current < 0) {
    return kUnknownContext;
  }
  const auto it = index_.find(key);
  return it == index_.end() ? kUnknownContext : it->second;
}

void ContextVocab::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write context vocab " + path.string());
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    out << keys_[i].previous << '\t' << keys_[i].current << '\t'
        << keys_[i].hour << '\t' << i + 1 << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

ContextVocab ContextVocab::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read context vocab " + path.string());
  ContextVocab vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    ContextKey key;
    long long index = 0;
    if (!(fields >> key.previous >> key.current >> key.hour >> index)) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": malformed context vocab line");
    }
    if (vocab.Add(key) != index) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": context indices must be dense and ordered from 1");
    }
  }
  return vocab;
}

template <typename Real>
Tensor<Real> UniformInit(Shape shape, std::size_t fan, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<Real> values(NumElements(shape));
  for (Real& v : values) v = static_cast<Real>(dist(rng));
  return Tensor<Real>::FromValues(std::move(shape), std::move(values), true);
}

template <typename Real>
FusionResult<Real> FuseDynamic(std::span<const Tensor<Real>> bases,
                               const Tensor<Real>& context,
                               const Tensor<Real>& w_a) {
  if (bases.empty()) throw ContractError("fusion needs at least one base");
  std::vector<Tensor<Real>> scores;
  scores.reserve(bases.size());
  for (const auto& base : bases) {
    scores.push_back(RowDot(context, Silu(Matmul(base, w_a, true))));
  }
  const Tensor<Real> logits =
      scores.size() == 1 ? scores[0]
                         : Concat(std::span<const Tensor<Real>>(scores), 1);
  Tensor<Real> weights = Softmax(logits, 1);
  Tensor<Real> h;
  for (std::size_t n = 0; n < bases.size(); ++n) {
    Tensor<Real> term =
        MulColumn(bases[n], bases.size() == 1 ? weights
                                              : Slice(weights, 1, n, n + 1));
    h = h.defined() ? Add(h, term) : term;
  }
  return {h, weights};
}

template <typename Real>
Tensor<Real> FuseSum(std::span<const Tensor<Real>> bases) {
  if (bases.empty()) throw ContractError("fusion needs at least one base");
  Tensor<Real> h = bases[0];
  for (std::size_t n = 1; n < bases.size(); ++n) h = Add(h, bases[n]);
  return h;
}

template <typename Real>
Tensor<Real> Contextualize(const Tensor<Real>& h, const Tensor<Real>& context,
                           const FusionParams<Real>& params) {
  const Tensor<Real> parts[] = {h, context};
  const Tensor<Real> joined = Concat(std::span<const Tensor<Real>>(parts), 1);
  return Silu(AddRow(Matmul(joined, params.mlp_weight), params.mlp_bias));
}

template <typename Real>
CompositionalEmbedding<Real>::CompositionalEmbedding(
    QuotientRemainder decomposition, std::size_t num_contexts,
    std::size_t dim, FusionMode mode, std::mt19937_64& rng)
    : decomposition_(std::move(decomposition)), dim_(dim), mode_(mode) {
  if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
  if (num_contexts == 0) {
    throw ConfigError("context table needs at least the unknown row");
  }
  for (std::int64_t m : decomposition_.sizes()) {
    tables_.push_back(
        UniformInit<Real>({static_cast<std::size_t>(m), dim_}, dim_, rng));
  }
  context_table_ = UniformInit<Real>({num_contexts, dim_}, dim_, rng);
  // With a single base the softmax is constant 1, so W_a has no effect.
  if (mode_ == FusionMode::kDynamic && tables_.size() > 1) {
    fusion_.w_a = UniformInit<Real>({dim_, dim_}, dim_, rng);
  }
  fusion_.mlp_weight = UniformInit<Real>({2 * dim_, dim_}, dim_, rng);
  fusion_.mlp_bias = Tensor<Real>::Zeros({1, dim_}, true);
}

template <typename Real>
std::vector<Tensor<Real>> CompositionalEmbedding<Real>::LookupBases(
    ItemIndex item) const {
  const std::vector<std::int32_t> rows = decomposition_.Decompose(item);
  std::vector<Tensor<Real>> bases;
  bases.reserve(rows.size());
  for (std::size_t n = 0; n < rows.size(); ++n) {
    bases.push_back(IndexSelect(tables_[n], std::span(&rows[n], 1)));
  }
  return bases;
}

template <typename Real>
Tensor<Real> CompositionalEmbedding<Real>::Embed(
    std::span<const ItemIndex> items,
    std::span<const ContextIndex> contexts) const {
  return EmbedWithWeights(items, contexts).embedding;
}

template <typename Real>
FusionResult<Real> CompositionalEmbedding<Real>::EmbedWithWeights(
    std::span<const ItemIndex> items,
    std::span<const ContextIndex> contexts) const {
  if (items.empty()) throw ContractError("cannot embed an empty sequence");
  if (items.size() != contexts.size()) {
    throw ContractError("sequence has " + std::to_string(items.size()) +
                        " items but " + std::to_string(contexts.size()) +
                        " contexts");
  }
  const std::size_t length = items.size();
  const std::size_t num_tables = tables_.size();
  std::vector<std::vector<std::int32_t>> rows(
      num_tables, std::vector<std::int32_t>(length, 0));
  std::vector<std::int32_t> context_rows(length, kUnknownContext);
  std::vector<Real> valid(length, Real(1));
  bool any_padding = false;
  std::vector<std::int32_t> scratch(num_tables);
  for (std::size_t t = 0; t < length; ++t) {
    if (items[t] == kPaddingItem) {
      valid[t] = Real(0);
      any_padding = true;
      continue;
    }
    decomposition_.Decompose(items[t], scratch);
    for (std::size_t n = 0; n < num_tables; ++n) rows[n][t] = scratch[n];
    if (contexts[t] < 0 ||
        static_cast<std::size_t>(contexts[t]) >= context_table_.rows()) {
      throw IndexError("context index " + std::to_string(contexts[t]) +
                       " outside table of " +
                       std::to_string(context_table_.rows()) + " rows");
    }
    context_rows[t] = contexts[t];
  }

  std::vector<Tensor<Real>> bases;
  bases.reserve(num_tables);
  for (std::size_t n = 0; n < num_tables; ++n) {
    bases.push_back(IndexSelect(tables_[n], std::span<const std::int32_t>(rows[n])));
  }
  const Tensor<Real> context = IndexSelect(
      context_table_, std::span<const std::int32_t>(context_rows));

  FusionResult<Real> fused;
  if (uses_attention()) {
    fused = FuseDynamic(std::span<const Tensor<Real>>(bases), context,
                        fusion_.w_a);
  } else {
    fused.embedding = num_tables == 1
                          ? bases[0]
                          : FuseSum(std::span<const Tensor<Real>>(bases));
    fused.weights = Tensor<Real>::FromValues(
        {length, num_tables},
        std::vector<Real>(length * num_tables, Real(1) / Real(num_tables)));
  }
  fused.embedding = Contextualize(fused.embedding, context, fusion_);
  if (any_padding) {
    fused.embedding = MulColumn(
        fused.embedding, Tensor<Real>::FromValues({length, 1}, valid));
  }
  return fused;
}

template <typename Real>
void CompositionalEmbedding<Real>::AppendParameters(
    std::vector<NamedTensor<Real>>& out) const {
  for (std::size_t n = 0; n < tables_.size(); ++n) {
    out.push_back({"embedding.base." + std::to_string(n), tables_[n]});
  }
  out.push_back({"embedding.context", context_table_});
  if (fusion_.w_a.defined()) out.push_back({"fusion.w_a", fusion_.w_a});
  out.push_back({"fusion.mlp.weight", fusion_.mlp_weight});
  out.push_back({"fusion.mlp.bias", fusion_.mlp_bias});
}

#define LSAN_INSTANTIATE_EMBEDDING(Real)                                      \
  template Tensor<Real> UniformInit(Shape, std::size_t, std::mt19937_64&);    \
  template FusionResult<Real> FuseDynamic(std::span<const Tensor<Real>>,      \
                                          const Tensor<Real>&,                \
                                          const Tensor<Real>&);               \
  template Tensor<Real> FuseSum(std::span<const Tensor<Real>>);               \
  template Tensor<Real> Contextualize(const Tensor<Real>&,                    \
                                      const Tensor<Real>&,                    \
                                      const FusionParams<Real>&);             \
  template class CompositionalEmbedding<Real>;

LSAN_INSTANTIATE_EMBEDDING(float)
LSAN_INSTANTIATE_EMBEDDING(double)

#undef LSAN_INSTANTIATE_EMBEDDING

}  // namespace lsan
