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

#include "lsan/model.h"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "lsan/error.h"
#include "lsan/ops.h"

namespace lsan {
namespace {

std::string JoinSizes(std::span<const std::int64_t> sizes) {
  std::string out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(sizes[i]);
  }
  return out;
}

std::int64_t ParseInt(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long parsed = 0;
  try {
    parsed = std::stoll(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) {
    throw ConfigError("'" + key + "' expects an integer, got '" + value + "'");
  }
  return parsed;
}

std::size_t ParseCount(const std::string& key, const std::string& value) {
  const std::int64_t v = ParseInt(key, value);
  if (v < 0) throw ConfigError("'" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

bool StartsWith(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

}  // namespace

std::string_view VariantName(VariantKind kind) {
  switch (kind) {
    case VariantKind::kFull: return "full";
    case VariantKind::kFullEmbedding: return "full_emb";
    case VariantKind::kWithoutDynamic: return "wo_dynamic";
    case VariantKind::kPlainAttention: return "plain_attn";
  }
  return "unknown";
}

VariantKind ParseVariant(std::string_view name) {
  for (VariantKind kind : kAllVariants) {
    if (VariantName(kind) == name) return kind;
  }
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected full, full_emb, wo_dynamic or plain_attn)");
}

std::vector<std::int64_t> ModelConfig::ResolvedTableSizes() const {
  if (variant == VariantKind::kFullEmbedding) return {num_items};
  if (!table_sizes.empty()) return table_sizes;
  return DefaultTableSizes(num_items, num_tables, m1);
}

void ModelConfig::Validate() const {
  if (num_items < 1) throw ConfigError("num_items must be positive");
  if (num_contexts < 1) throw ConfigError("num_contexts must be positive");
  if (dim < 1) throw ConfigError("dim must be positive");
  if (window < 1 || window % 2 == 0) {
    throw ConfigError("kernel window must be odd and positive");
  }
  if (heads < 1) throw ConfigError("heads must be positive");
  if (layers < 1) throw ConfigError("layers must be positive");
  if (max_len < 1) throw ConfigError("t_max must be positive");
  if (num_tables < 1) throw ConfigError("num_tables must be positive");
  if (m1 < 1) throw ConfigError("m1 must be positive");
  if (!table_sizes.empty() && table_sizes.size() != num_tables &&
      variant != VariantKind::kFullEmbedding) {
    throw ConfigError("table_sizes lists " +
                      std::to_string(table_sizes.size()) +
                      " sizes but num_tables is " +
                      std::to_string(num_tables));
  }
  // Throws when the product of the sizes cannot cover every item.
  QuotientRemainder(ResolvedTableSizes(), num_items);
}

std::map<std::string, std::string> ModelConfig::ToKeyValues() const {
  return {
      {"num_items", std::to_string(num_items)},
      {"num_contexts", std::to_string(num_contexts)},
      {"dim", std::to_string(dim)},
      {"kernel", std::to_string(window)},
      {"heads", std::to_string(heads)},
      {"layers", std::to_string(layers)},
      {"t_max", std::to_string(max_len)},
      {"num_tables", std::to_string(num_tables)},
      {"m1", std::to_string(m1)},
      {"table_sizes", JoinSizes(table_sizes)},
      {"variant", std::string(VariantName(variant))},
      {"seed", std::to_string(seed)},
  };
}

ModelConfig ModelConfig::FromKeyValues(
    const std::map<std::string, std::string>& kv) {
  ModelConfig config;
  for (const auto& [key, value] : kv) {
    if (key == "num_items") {
      config.num_items = ParseInt(key, value);
    } else if (key == "num_contexts") {
      config.num_contexts = ParseInt(key, value);
    } else if (key == "dim") {
      config.dim = ParseCount(key, value);
    } else if (key == "kernel") {
      config.window = ParseCount(key, value);
    } else if (key == "heads") {
      config.heads = ParseCount(key, value);
    } else if (key == "layers") {
      config.layers = ParseCount(key, value);
    } else if (key == "t_max") {
      config.max_len = ParseCount(key, value);
    } else if (key == "num_tables") {
      config.num_tables = ParseCount(key, value);
    } else if (key == "m1") {
      config.m1 = ParseInt(key, value);
    } else if (key == "table_sizes") {
      config.table_sizes.clear();
      std::stringstream items(value);
      std::string item;
      while (std::getline(items, item, ',')) {
        if (!item.empty()) config.table_sizes.push_back(ParseInt(key, item));
      }
    } else if (key == "variant") {
      config.variant = ParseVariant(value);
    } else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(ParseInt(key, value));
    } else {
      throw ConfigError("unknown model key '" + key + "'");
    }
  }
  return config;
}

template <typename Real>
LsanModel<Real>::LsanModel(ModelConfig config) : config_(std::move(config)) {
  config_.Validate();
  std::mt19937_64 rng(config_.seed);
  const std::size_t dim = config_.dim;
  const FusionMode mode = config_.variant == VariantKind::kWithoutDynamic
                              ? FusionMode::kSum
                              : FusionMode::kDynamic;
  embedding_ = std::make_unique<CompositionalEmbedding<Real>>(
      QuotientRemainder(config_.ResolvedTableSizes(), config_.num_items),
      static_cast<std::size_t>(config_.num_contexts), dim, mode, rng);
  const bool plain = config_.variant == VariantKind::kPlainAttention;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    layers_.emplace_back(dim, config_.window, config_.heads, config_.max_len,
                         plain, rng);
    const std::size_t width = layers_.back().output_width();
    FeedForward<Real> ffn;
    ffn.w1 = UniformInit<Real>({width, width}, dim, rng);
    ffn.b1 = Tensor<Real>::Zeros({1, width}, true);
    ffn.w2 = UniformInit<Real>({width, dim}, dim, rng);
    ffn.b2 = Tensor<Real>::Zeros({1, dim}, true);
    ffn_.push_back(std::move(ffn));
  }
  const auto items = static_cast<std::size_t>(config_.num_items);
  output_weight_ = UniformInit<Real>({items, dim}, dim, rng);
  output_bias_ = Tensor<Real>::Zeros({1, items}, true);

  embedding_->AppendParameters(params_);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    layers_[l].AppendParameters(prefix, params_);
    params_.push_back({prefix + "ffn.w1", ffn_[l].w1});
    params_.push_back({prefix + "ffn.b1", ffn_[l].b1});
    params_.push_back({prefix + "ffn.w2", ffn_[l].w2});
    params_.push_back({prefix + "ffn.b2", ffn_[l].b2});
  }
  params_.push_back({"output.weight", output_weight_});
  params_.push_back({"output.bias", output_bias_});
}

template <typename Real>
Tensor<Real> LsanModel<Real>::Logits(const SequenceInput& input) const {
  return Run(input, false).logits;
}

template <typename Real>
ForwardTrace<Real> LsanModel<Real>::Trace(const SequenceInput& input) const {
  return Run(input, true);
}

template <typename Real>
void LsanModel<Real>::ZeroGrad() {
  for (auto& p : params_) p.tensor.ZeroGrad();
}

template <typename Real>
ForwardTrace<Real> LsanModel<Real>::Run(const SequenceInput& input,
                                        bool keep_trace) const {
  const std::size_t length = input.items.size();
  if (length == 0) throw ContractError("cannot score an empty sequence");
  if (length != input.contexts.size()) {
    throw ContractError("sequence has " + std::to_string(length) +
                        " items but " + std::to_string(input.contexts.size()) +
                        " contexts");
  }
  if (length > config_.max_len) {
    throw ContractError("sequence length " + std::to_string(length) +
                        " exceeds t_max " + std::to_string(config_.max_len));
  }
  std::vector<std::uint8_t> valid(length);
  std::vector<Real> valid_column(length);
  std::ptrdiff_t last = -1;
  for (std::size_t t = 0; t < length; ++t) {
    valid[t] = input.items[t] != kPaddingItem;
    valid_column[t] = valid[t] ? Real(1) : Real(0);
    if (valid[t]) last = static_cast<std::ptrdiff_t>(t);
  }
  if (last < 0) throw ContractError("sequence contains only padding");
  const bool any_padding =
      std::find(valid.begin(), valid.end(), 0) != valid.end();

  ForwardTrace<Real> trace;
  FusionResult<Real> fused =
      embedding_->EmbedWithWeights(input.items, input.contexts);
  if (keep_trace) trace.fusion_weights = fused.weights;
  Tensor<Real> hidden = fused.embedding;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    TwinOutput<Real> twin = layers_[l].Forward(hidden, valid);
    if (keep_trace) trace.attention.push_back(std::move(twin.attention));
    const bool final_layer = l + 1 == layers_.size();
    // The FFN is point-wise, so the final layer only needs the readout row.
    Tensor<Real> x = final_layer ? Slice(twin.features, 0, last, last + 1)
                                 : twin.features;
    const FeedForward<Real>& ffn = ffn_[l];
    Tensor<Real> y =
        AddRow(Matmul(Gelu(AddRow(Matmul(x, ffn.w1), ffn.b1)), ffn.w2),
               ffn.b2);
    if (!final_layer && any_padding) {
      y = MulColumn(y, Tensor<Real>::FromValues({length, 1}, valid_column));
    }
    hidden = y;
  }
  trace.logits = AddRow(Matmul(hidden, output_weight_, true), output_bias_);
  return trace;
}

template <typename Real>
Tensor<Real> ForwardScores(const SequenceInput& input,
                           const LsanModel<Real>& model) {
  return Softmax(model.Logits(input), 1);
}

namespace {

template <typename Real>
void CheckTarget(const LsanModel<Real>& model, ItemIndex target) {
  if (target < 0 || target >= model.config().num_items) {
    throw IndexError("target item " + std::to_string(target) +
                     " outside [0, " + std::to_string(model.config().num_items) +
                     ")");
  }
}

}  // namespace

template <typename Real>
Tensor<Real> TrainingLoss(std::span<const TrainingExample> batch,
                          const LsanModel<Real>& model, double l2) {
  if (batch.empty()) throw ContractError("training loss of an empty batch");
  const Real inv = Real(1) / static_cast<Real>(batch.size());
  Tensor<Real> loss;
  for (const auto& example : batch) {
    CheckTarget(model, example.target);
    Tensor<Real> term = Scale(
        CrossEntropy(model.Logits(example.input),
                     static_cast<std::size_t>(example.target)),
        inv);
    loss = loss.defined() ? Add(loss, term) : term;
  }
  if (l2 != 0) {
    for (const auto& p : model.parameters()) {
      loss = Add(loss, Scale(SumSquares(p.tensor), static_cast<Real>(l2)));
    }
  }
  return loss;
}

template <typename Real>
double AccumulateLossGradients(std::span<const TrainingExample> batch,
                               LsanModel<Real>& model, double l2) {
  if (batch.empty()) throw ContractError("training loss of an empty batch");
  const Real inv = Real(1) / static_cast<Real>(batch.size());
  double total = 0;
  for (const auto& example : batch) {
    CheckTarget(model, example.target);
    const Tensor<Real> term = Scale(
        CrossEntropy(model.Logits(example.input),
                     static_cast<std::size_t>(example.target)),
        inv);
    term.Backward();
    total += term.item();
  }
  if (l2 != 0) {
    for (const auto& p : model.parameters()) {
      const Tensor<Real> term =
          Scale(SumSquares(p.tensor), static_cast<Real>(l2));
      term.Backward();
      total += term.item();
    }
  }
  return total;
}

template <typename Real>
std::vector<ItemIndex> TopK(std::span<const Real> scores, std::size_t k) {
  if (k < 1 || k > scores.size()) {
    throw ContractError("K must lie in [1, " + std::to_string(scores.size()) +
                        "], got " + std::to_string(k));
  }
  std::vector<ItemIndex> order(scores.size());
  std::iota(order.begin(), order.end(), ItemIndex{0});
  auto better = [&](ItemIndex a, ItemIndex b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + k, order.end(), better);
  order.resize(k);
  return order;
}

template <typename Real>
std::vector<ItemIndex> PredictTopK(const SequenceInput& input,
                                   const LsanModel<Real>& model,
                                   std::size_t k) {
  NoGradGuard no_grad;
  const Tensor<Real> logits = model.Logits(input);
  return TopK(logits.values(), k);
}

template <typename Real>
LsanModel<Real> BuildVariant(VariantKind kind, ModelConfig config) {
  config.variant = kind;
  return LsanModel<Real>(std::move(config));
}

template <typename Real>
ParameterBreakdown CountParameters(const LsanModel<Real>& model) {
  ParameterBreakdown counts;
  for (const auto& p : model.parameters()) {
    const auto n = static_cast<std::int64_t>(p.tensor.size());
    const std::string_view name = p.name;
    if (StartsWith(name, "embedding.base.")) {
      counts.embedding += n;
    } else if (name == "embedding.context") {
      counts.context += n;
    } else if (StartsWith(name, "fusion.")) {
      counts.fusion += n;
    } else if (StartsWith(name, "output.")) {
      counts.output += n;
    } else if (name.find(".ffn.") != std::string_view::npos) {
      counts.ffn += n;
    } else if (name.ends_with(".position")) {
      counts.position += n;
    } else {
      counts.encoder += n;
    }
    counts.total += n;
  }
  const auto full = static_cast<double>(model.config().num_items) *
                    static_cast<double>(model.config().dim);
  counts.embedding_ratio = static_cast<double>(counts.embedding) / full;
  return counts;
}

#define LSAN_INSTANTIATE_MODEL(Real)                                        \
  template class LsanModel<Real>;                                           \
  template Tensor<Real> ForwardScores(const SequenceInput&,                 \
                                      const LsanModel<Real>&);              \
  template Tensor<Real> TrainingLoss(std::span<const TrainingExample>,      \
                                     const LsanModel<Real>&, double);       \
  template double AccumulateLossGradients(std::span<const TrainingExample>, \
                                          LsanModel<Real>&, double);        \
  template std::vector<ItemIndex> TopK(std::span<const Real>, std::size_t); \
  template std::vector<ItemIndex> PredictTopK(                              \
      const SequenceInput&, const LsanModel<Real>&, std::size_t);           \
  template LsanModel<Real> BuildVariant(VariantKind, ModelConfig);          \
  template ParameterBreakdown CountParameters(const LsanModel<Real>&);

LSAN_INSTANTIATE_MODEL(float)
LSAN_INSTANTIATE_MODEL(double)

#undef LSAN_INSTANTIATE_MODEL

}  // namespace lsan
