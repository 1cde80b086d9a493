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

#ifndef LSAN_TRAINER_H_
#define LSAN_TRAINER_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "lsan/data.h"
#include "lsan/metrics.h"
#include "lsan/model.h"
#include "lsan/optimizer.h"

namespace lsan {

struct TrainConfig {
  std::size_t batch_size = 256;
  AdamConfig adam;
  double l2 = 1e-5;  // lambda
  std::size_t epochs = 200;
  // Stop after this many epochs without a better validation nDCG@10;
  // zero disables early stopping.
  std::size_t patience = 10;
  std::uint64_t seed = 42;

  void Validate() const;
};

enum class Split { kValidation, kTest };

std::string_view SplitName(Split split);
Split ParseSplit(std::string_view name);

struct EvalCase {
  std::size_t user = 0;  // index into Dataset::sequences
  SequenceInput input;
  ItemIndex target = kPaddingItem;
};

SequenceInput MakeInput(std::span<const Step> window, const ContextVocab& vocab);

// One example per training prefix of every user with at least three steps.
std::vector<TrainingExample> MakeTrainingExamples(const Dataset& dataset,
                                                  const ContextVocab& vocab,
                                                  std::size_t max_len);

// Validation inputs are the training prefix; test inputs add the validation
// step. Both keep only the last max_len steps.
std::vector<EvalCase> MakeEvalCases(const Dataset& dataset,
                                    const ContextVocab& vocab, Split split,
                                    std::size_t max_len);

// Ranks every case's target against all |V| items. Users are split across
// `threads` workers; the result does not depend on the thread count.
template <typename Real>
EvalReport Evaluate(const LsanModel<Real>& model,
                    std::span<const EvalCase> cases,
                    std::span<const int> cutoffs = kDefaultCutoffs,
                    std::size_t threads = 1);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0;        // mean batch objective
  double val_ndcg10 = 0;  // NaN without validation cases
  double seconds = 0;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  double best_val_ndcg10 = 0;
  bool stopped_early = false;
};

// Mini-batch Adam over shuffled samples. After every epoch the model is
// scored on `validation`; on return it holds the parameters of the best
// epoch. Throws NumericDomainError naming the batch if the loss turns
// non-finite.
template <typename Real>
TrainResult Train(LsanModel<Real>& model,
                  std::span<const TrainingExample> samples,
                  std::span<const EvalCase> validation,
                  const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace lsan

#endif  // LSAN_TRAINER_H_
