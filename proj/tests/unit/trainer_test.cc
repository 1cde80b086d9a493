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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "lsan/error.h"
#include "test_util.h"

namespace lsan {
namespace {

// 20 items; user u walks u, u+1, ... (mod 20).
Dataset CyclicDataset(int users = 20, int items = 20, int length = 9) {
  std::vector<Interaction> rows;
  for (int u = 0; u < users; ++u) {
    for (int k = 0; k < length; ++k) {
      const int i = (u + k) % items;
      rows.push_back({"u" + std::to_string(u), "i" + std::to_string(i),
                      "c" + std::to_string(i % 2), 1'600'000'000 + k * 3600});
    }
  }
  return BuildSequences(rows);
}

struct Fixture {
  Dataset dataset = CyclicDataset();
  ContextVocab vocab;
  ModelConfig model;
  std::vector<TrainingExample> samples;
  std::vector<EvalCase> validation;

  explicit Fixture(std::size_t max_len = 5) {
    vocab = BuildContextVocab(dataset, max_len);
    model.num_items = static_cast<std::int64_t>(dataset.num_items());
    model.num_contexts = static_cast<std::int64_t>(vocab.size());
    model.dim = 16;
    model.window = 3;
    model.max_len = max_len;
    model.m1 = 4;
    model.seed = 3;
    samples = MakeTrainingExamples(dataset, vocab, max_len);
    validation = MakeEvalCases(dataset, vocab, Split::kValidation, max_len);
  }
};

TrainConfig SmallTrainConfig(std::size_t epochs) {
  TrainConfig t;
  t.batch_size = 16;
  t.adam.learning_rate = 0.01;
  t.epochs = epochs;
  t.patience = 0;
  t.seed = 5;
  return t;
}

TEST(EvalCasesTest, InputsEndBeforeHeldOutItem) {
  const Fixture f(50);
  const auto val = MakeEvalCases(f.dataset, f.vocab, Split::kValidation, 50);
  const auto test = MakeEvalCases(f.dataset, f.vocab, Split::kTest, 50);
  ASSERT_EQ(val.size(), f.dataset.num_users());
  for (std::size_t i = 0; i < val.size(); ++i) {
    const auto& steps = f.dataset.sequences[val[i].user].steps;
    EXPECT_EQ(val[i].input.items.size(), steps.size() - 2);
    EXPECT_EQ(val[i].target, steps[steps.size() - 2].item);
    EXPECT_EQ(test[i].input.items.size(), steps.size() - 1);
    EXPECT_EQ(test[i].target, steps.back().item);
    EXPECT_EQ(test[i].input.items.back(), val[i].target);
  }
  const auto truncated = MakeEvalCases(f.dataset, f.vocab, Split::kTest, 3);
  EXPECT_EQ(truncated[0].input.items.size(), 3u);
  EXPECT_EQ(truncated[0].input.items.back(), test[0].input.items.back());
}

TEST(EvalCasesTest, SamplesNeverSeeTheirTarget) {
  const Fixture f;
  // Cyclic walks never repeat within 9 steps, so any leak would show up as
  // the target inside its own input.
  for (const auto& s : f.samples) {
    for (ItemIndex item : s.input.items) EXPECT_NE(item, s.target);
  }
}

TEST(EvaluateTest, ThreadCountDoesNotChangeResults) {
  const Fixture f;
  const LsanModel<float> model(f.model);
  const auto one = Evaluate(model, f.validation, kDefaultCutoffs, 1);
  const auto three = Evaluate(model, f.validation, kDefaultCutoffs, 3);
  EXPECT_EQ(one.ranks, three.ranks);
  EXPECT_EQ(one.num_users, f.validation.size());
  EXPECT_EQ(one.params.total, CountParameters(model).total);
}

TEST(TrainTest, LossDecreasesOnMemorisableTask) {
  const Fixture f;
  LsanModel<float> model(f.model);
  const auto result = Train(model, f.samples, f.validation, SmallTrainConfig(5));
  ASSERT_EQ(result.log.size(), 5u);
  for (std::size_t e = 1; e < 5; ++e) {
    EXPECT_LT(result.log[e].loss, result.log[e - 1].loss) << "epoch " << e + 1;
  }
}

TEST(TrainTest, ZeroEpochsKeepsInitialisation) {
  const Fixture f;
  LsanModel<float> model(f.model);
  const LsanModel<float> fresh(f.model);
  const auto result = Train(model, f.samples, f.validation, SmallTrainConfig(0));
  EXPECT_TRUE(result.log.empty());
  EXPECT_EQ(result.best_epoch, 0u);
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    const auto a = model.parameters()[i].tensor.values();
    const auto b = fresh.parameters()[i].tensor.values();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST(TrainTest, SameSeedSameTrajectory) {
  const Fixture f;
  LsanModel<float> a(f.model);
  LsanModel<float> b(f.model);
  const auto ra = Train(a, f.samples, f.validation, SmallTrainConfig(3));
  const auto rb = Train(b, f.samples, f.validation, SmallTrainConfig(3));
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(ra.log[e].loss, rb.log[e].loss);
    EXPECT_EQ(ra.log[e].val_ndcg10, rb.log[e].val_ndcg10);
  }
}

TEST(TrainTest, KeepsBestValidationCheckpoint) {
  const Fixture f;
  LsanModel<float> model(f.model);
  TrainConfig config = SmallTrainConfig(12);
  config.patience = 2;
  config.adam.learning_rate = 0.05;  // noisy on purpose
  const auto result = Train(model, f.samples, f.validation, config);
  double best = -1;
  for (const auto& r : result.log) best = std::max(best, r.val_ndcg10);
  EXPECT_EQ(result.best_val_ndcg10, best);
  EXPECT_EQ(result.log[result.best_epoch - 1].val_ndcg10, best);
  const int cutoff[] = {10};
  EXPECT_EQ(Evaluate(model, f.validation, cutoff).at(10).ndcg, best);
  if (result.stopped_early) {
    EXPECT_EQ(result.log.size(), result.best_epoch + config.patience);
  }
}

TEST(TrainTest, NonFiniteLossNamesTheBatch) {
  const Fixture f;
  LsanModel<float> model(f.model);
  for (auto& p : model.mutable_parameters()) {
    if (p.name == "output.bias") {
      p.tensor.mutable_values()[0] = std::numeric_limits<float>::infinity();
    }
  }
  try {
    Train(model, f.samples, f.validation, SmallTrainConfig(1));
    FAIL() << "expected NumericDomainError";
  } catch (const NumericDomainError& e) {
    EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos);
  }
}

TEST(TrainTest, EmptySamplesAndBadConfigThrow) {
  const Fixture f;
  LsanModel<float> model(f.model);
  EXPECT_THROW(Train<float>(model, {}, f.validation, SmallTrainConfig(1)),
               ContractError);
  TrainConfig bad = SmallTrainConfig(1);
  bad.batch_size = 0;
  EXPECT_THROW(Train(model, f.samples, f.validation, bad), ConfigError);
}

TEST(SplitTest, Names) {
  EXPECT_EQ(ParseSplit("val"), Split::kValidation);
  EXPECT_EQ(ParseSplit("test"), Split::kTest);
  EXPECT_EQ(SplitName(Split::kValidation), "val");
  EXPECT_THROW(ParseSplit("train"), ConfigError);
}

}  // namespace
}  // namespace lsan
