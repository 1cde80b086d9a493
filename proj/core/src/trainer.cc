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

#include "lsan/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "lsan/error.h"

namespace lsan {

void TrainConfig::Validate() const {
  if (batch_size == 0) throw ConfigError("batch must be positive");
  if (!(adam.learning_rate > 0)) throw ConfigError("lr must be positive");
  if (!(l2 >= 0)) throw ConfigError("lambda must be non-negative");
}

std::string_view SplitName(Split split) {
  return split == Split::kValidation ? "val" : "test";
}

Split ParseSplit(std::string_view name) {
  if (name == "val" || name == "validation") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + std::string(name) +
                    "' (expected val or test)");
}

SequenceInput MakeInput(std::span<const Step> window,
                        const ContextVocab& vocab) {
  SequenceInput input;
  input.items.reserve(window.size());
  input.contexts.reserve(window.size());
  const auto keys = ContextKeysFor(window);
  for (std::size_t i = 0; i < window.size(); ++i) {
    input.items.push_back(window[i].item);
    input.contexts.push_back(vocab.Lookup(keys[i]));
  }
  return input;
}

std::vector<TrainingExample> MakeTrainingExamples(const Dataset& dataset,
                                                  const ContextVocab& vocab,
                                                  std::size_t max_len) {
  std::vector<TrainingExample> examples;
  for (const auto& seq : dataset.sequences) {
    const auto split = SplitLeaveOneOut(seq);
    if (!split) continue;
    for (const auto& window : GenerateTrainingSamples(split->train, max_len)) {
      examples.push_back({MakeInput(window.input, vocab), window.target.item});
    }
  }
  return examples;
}

std::vector<EvalCase> MakeEvalCases(const Dataset& dataset,
                                    const ContextVocab& vocab, Split split,
                                    std::size_t max_len) {
  if (max_len == 0) throw ContractError("max_len must be positive");
  std::vector<EvalCase> cases;
  for (std::size_t u = 0; u < dataset.sequences.size(); ++u) {
    const auto& steps = dataset.sequences[u].steps;
    const auto parts = SplitLeaveOneOut(dataset.sequences[u]);
    if (!parts) continue;
    const std::size_t end =
        split == Split::kValidation ? steps.size() - 2 : steps.size() - 1;
    const std::size_t begin = end > max_len ? end - max_len : 0;
    const std::span<const Step> window(steps.data() + begin, end - begin);
    const Step& target = split == Split::kValidation ? parts->validation
                                                     : parts->test;
    cases.push_back({u, MakeInput(window, vocab), target.item});
  }
  return cases;
}

template <typename Real>
EvalReport Evaluate(const LsanModel<Real>& model,
                    std::span<const EvalCase> cases,
                    std::span<const int> cutoffs, std::size_t threads) {
  std::vector<std::size_t> ranks(cases.size(), 0);
  auto work = [&](std::size_t begin, std::size_t end) {
    NoGradGuard no_grad;
    for (std::size_t i = begin; i < end; ++i) {
      const Tensor<Real> logits = model.Logits(cases[i].input);
      ranks[i] = RankOfTarget<Real>(logits.values(), cases[i].target);
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, cases.size()));
  if (threads == 1) {
    work(0, cases.size());
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> failures(threads);
    const std::size_t chunk = (cases.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t begin = std::min(cases.size(), t * chunk);
      const std::size_t end = std::min(cases.size(), begin + chunk);
      pool.emplace_back([&, t, begin, end] {
        try {
          work(begin, end);
        } catch (...) {
          failures[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
  }
  EvalReport report = SummarizeRanks(ranks, cutoffs);
  report.params = CountParameters(model);
  return report;
}

namespace {

template <typename Real>
std::vector<std::vector<Real>> Snapshot(const LsanModel<Real>& model) {
  std::vector<std::vector<Real>> values;
  for (const auto& p : model.parameters()) {
    const auto v = p.tensor.values();
    values.emplace_back(v.begin(), v.end());
  }
  return values;
}

template <typename Real>
void Restore(LsanModel<Real>& model,
             const std::vector<std::vector<Real>>& values) {
  auto params = model.mutable_parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_values();
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

}  // namespace

template <typename Real>
TrainResult Train(LsanModel<Real>& model,
                  std::span<const TrainingExample> samples,
                  std::span<const EvalCase> validation,
                  const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.Validate();
  if (samples.empty()) throw ContractError("no training samples");

  Adam<Real> optimizer(model.parameters(), config.adam);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<TrainingExample> batch;
  const int cutoff10[] = {10};

  TrainResult result;
  result.best_val_ndcg10 = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<Real>> best = Snapshot(model);
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(samples[order[i]]);
      auto where = [&] {
        std::ostringstream msg;
        msg << "epoch " << epoch << ", batch " << batches
            << " (shuffled positions " << begin << ".." << end - 1
            << ", first sample " << order[begin] << ", target "
            << samples[order[begin]].target << ")";
        return msg.str();
      };
      model.ZeroGrad();
      double loss = 0;
      try {
        loss = AccumulateLossGradients<Real>(batch, model, config.l2);
      } catch (const NumericDomainError& e) {
        throw NumericDomainError(std::string(e.what()) + " in " + where());
      }
      if (!std::isfinite(loss)) {
        throw NumericDomainError("non-finite loss " + std::to_string(loss) +
                                 " in " + where());
      }
      optimizer.Step();
      loss_sum += loss;
      ++batches;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.loss = loss_sum / static_cast<double>(batches);
    if (validation.empty()) {
      record.val_ndcg10 = std::numeric_limits<double>::quiet_NaN();
    } else {
      record.val_ndcg10 =
          Evaluate(model, validation, cutoff10, 1).at(10).ndcg;
    }
    record.seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    result.log.push_back(record);
    if (on_epoch) on_epoch(record);

    // Without validation data the latest epoch is kept.
    const bool better = validation.empty() ||
                        record.val_ndcg10 > result.best_val_ndcg10;
    if (better) {
      result.best_epoch = epoch;
      result.best_val_ndcg10 = record.val_ndcg10;
      best = Snapshot(model);
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  if (result.best_epoch == 0) result.best_val_ndcg10 = 0;
  Restore(model, best);
  model.ZeroGrad();
  return result;
}

#define LSAN_INSTANTIATE_TRAINER(Real)                                        \
  template EvalReport Evaluate(const LsanModel<Real>&,                        \
                               std::span<const EvalCase>,                     \
                               std::span<const int>, std::size_t);            \
  template TrainResult Train(LsanModel<Real>&,                                \
                             std::span<const TrainingExample>,                \
                             std::span<const EvalCase>, const TrainConfig&,   \
                             const std::function<void(const EpochRecord&)>&);

LSAN_INSTANTIATE_TRAINER(float)
LSAN_INSTANTIATE_TRAINER(double)

#undef LSAN_INSTANTIATE_TRAINER

}  // namespace lsan
