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

#include "lsan/attention_export.h"

#include <gtest/gtest.h>

#include <random>

#include "lsan/error.h"
#include "oracles.h"
#include "test_util.h"

namespace lsan {
namespace {

ModelConfig ExportConfig() {
  ModelConfig c = testing::TinyConfig();
  c.max_len = 12;
  return c;
}

void ExpectRowsSumToOne(const Heatmap& h) {
  for (std::size_t r = 0; r < h.size; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < h.size; ++c) total += h.at(r, c);
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(AttentionExportTest, SingleItem) {
  const LsanModel<double> model(ExportConfig());
  const auto out = ExportAttention(model, {{3}, {1}});
  ASSERT_EQ(out.heads.size(), 2u);
  EXPECT_EQ(out.average.size, 1u);
  EXPECT_DOUBLE_EQ(out.average.at(0, 0), 1.0);
}

TEST(AttentionExportTest, UniformAttentionGivesConstantRows) {
  LsanModel<double> model(ExportConfig());
  for (auto& p : model.mutable_parameters()) {
    if (p.name.find("w_q") != std::string::npos) {
      for (double& v : p.tensor.mutable_values()) v = 0;
    }
  }
  std::mt19937_64 rng(1);
  const auto in = testing::RandomInput(model.config(), 12, 0, rng);
  const auto out = ExportAttention(model, in, 10);
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t c = 0; c < 10; ++c) {
      EXPECT_NEAR(out.average.at(r, c), 0.1, 1e-12);
    }
}

TEST(AttentionExportTest, MatchesSlicedOracleAttention) {
  const LsanModel<double> model(ExportConfig());
  std::mt19937_64 rng(2);
  const auto in = testing::RandomInput(model.config(), 12, 0, rng);
  const auto h = testing::ToMatrix(model.embedding().Embed(in.items, in.contexts));
  const auto params = testing::Params(model);
  const auto out = ExportAttention(model, in, 10);
  const std::vector<bool> valid(12, true);
  for (std::size_t head = 0; head < 2; ++head) {
    const std::string a = "layer0.attn" + std::to_string(head) + ".";
    const auto full = oracle::Attention(
        h, params.at("layer0.position"), params.at(a + "w_q"),
        params.at(a + "w_k"), params.at(a + "w_v"), 2, valid);
    for (std::size_t r = 0; r < 10; ++r) {
      double kept = 0;
      for (std::size_t c = 2; c < 12; ++c) kept += full.weights(r + 2, c);
      for (std::size_t c = 0; c < 10; ++c) {
        EXPECT_NEAR(out.heads[head].at(r, c), full.weights(r + 2, c + 2) / kept,
                    1e-10);
      }
    }
    ExpectRowsSumToOne(out.heads[head]);
  }
  ExpectRowsSumToOne(out.average);
  for (std::size_t i = 0; i < out.average.values.size(); ++i) {
    EXPECT_NEAR(out.average.values[i],
                (out.heads[0].values[i] + out.heads[1].values[i]) / 2, 1e-15);
  }
}

TEST(AttentionExportTest, PlainVariantExportsEveryHead) {
  ModelConfig c = ExportConfig();
  c.variant = VariantKind::kPlainAttention;
  const LsanModel<float> model(c);
  std::mt19937_64 rng(3);
  const auto out =
      ExportAttention(model, testing::RandomInput(c, 7, 0, rng), 10);
  EXPECT_EQ(out.heads.size(), 4u);
  EXPECT_EQ(out.average.size, 7u);
}

TEST(TailBlockTest, Errors) {
  const std::vector<double> w = {1, 0, 0, 1};
  EXPECT_THROW(TailBlock(w, 3, 2), ContractError);
  EXPECT_THROW(TailBlock(w, 2, 0), ContractError);
}

TEST(HeatmapCsvTest, SixSignificantDigits) {
  Heatmap h{2, {1.0 / 3, 2.0 / 3, 0.5, 0.5}};
  EXPECT_EQ(HeatmapToCsv(h), "0.333333,0.666667\n0.5,0.5\n");
  EXPECT_EQ(HeatmapToCsv(h, "tag"), "# tag\n0.333333,0.666667\n0.5,0.5\n");
}

}  // namespace
}  // namespace lsan
