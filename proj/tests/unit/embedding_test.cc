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

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "lsan/error.h"
#include "lsan/ops.h"
#include "oracles.h"
#include "test_util.h"

namespace lsan {
namespace {

using T = Tensor<double>;
using testing::FromMatrix;
using testing::RandomMatrix;
using testing::ToMatrix;

TEST(QuotientRemainderTest, Examples) {
  const QuotientRemainder beauty({2, 6051}, 12101);
  EXPECT_EQ(beauty.Decompose(0), (std::vector<std::int32_t>{0, 0}));
  const QuotientRemainder small({2, 8}, 16);
  EXPECT_EQ(small.Decompose(7), (std::vector<std::int32_t>{1, 3}));
}

TEST(QuotientRemainderTest, MatchesRepeatedDivisionOracle) {
  const std::vector<std::int64_t> sizes = {3, 4, 5};
  const QuotientRemainder qr(sizes, 60);
  for (std::int32_t g = 0; g < 60; ++g) {
    const auto got = qr.Decompose(g);
    const auto want = oracle::QrRows(g, sizes);
    for (std::size_t n = 0; n < sizes.size(); ++n) EXPECT_EQ(got[n], want[n]);
  }
}

TEST(QuotientRemainderTest, InjectiveOnExhaustiveScans) {
  for (std::int64_t num_items : {1, 2, 97, 12101, 20000}) {
    for (std::int64_t m1 : {1, 2, 3, 7, 64}) {
      for (std::size_t n : {1u, 2u, 3u}) {
        if (n == 1 && m1 != 1) continue;
        const auto sizes = DefaultTableSizes(num_items, n, m1);
        const QuotientRemainder qr(sizes, num_items);
        std::set<std::vector<std::int32_t>> seen;
        for (std::int64_t g = 0; g < num_items; ++g) {
          ASSERT_TRUE(seen.insert(qr.Decompose(static_cast<ItemIndex>(g))).second)
              << "collision at " << g << " |V|=" << num_items << " m1=" << m1;
        }
      }
    }
  }
}

TEST(QuotientRemainderTest, Errors) {
  EXPECT_THROW(QuotientRemainder({2, 5}, 11), ConfigError);
  EXPECT_THROW(QuotientRemainder({0, 20}, 10), ConfigError);
  EXPECT_THROW(QuotientRemainder({}, 10), ConfigError);
  const QuotientRemainder qr({2, 5}, 10);
  EXPECT_THROW(qr.Decompose(10), IndexError);
  EXPECT_THROW(qr.Decompose(-1), IndexError);
}

TEST(DefaultTableSizesTest, Rules) {
  EXPECT_EQ(DefaultTableSizes(12101, 2, 2),
            (std::vector<std::int64_t>{2, 6051}));
  EXPECT_EQ(DefaultTableSizes(12101, 2, 5),
            (std::vector<std::int64_t>{5, 2421}));
  EXPECT_EQ(DefaultTableSizes(12101, 1, 2), (std::vector<std::int64_t>{12101}));
  // 78^2 = 6084 >= ceil(12101 / 2) = 6051 > 77^2.
  EXPECT_EQ(DefaultTableSizes(12101, 3, 2),
            (std::vector<std::int64_t>{2, 78, 78}));
}

TEST(ContextVocabTest, AddLookupAndUnknown) {
  ContextVocab vocab;
  EXPECT_EQ(vocab.size(), 1u);
  const ContextKey a{kPadCategory, 3, 10};
  const ContextKey b{3, 4, 23};
  EXPECT_EQ(vocab.Add(a), 1);
  EXPECT_EQ(vocab.Add(b), 2);
  EXPECT_EQ(vocab.Add(a), 1);
  EXPECT_EQ(vocab.size(), 3u);
  EXPECT_EQ(vocab.Lookup(b), 2);
  EXPECT_EQ(vocab.Lookup({4, 3, 23}), kUnknownContext);
  EXPECT_THROW(vocab.Add({1, 2, 24}), ContractError);
  EXPECT_THROW(vocab.Add({-1, 2, 3}), ContractError);
}

TEST(ContextVocabTest, SaveLoadRoundTrip) {
  testing::TempDir dir("ctx");
  ContextVocab vocab;
  vocab.Add({0, 1, 0});
  vocab.Add({1, 2, 13});
  vocab.Add({2, 2, 5});
  vocab.Save(dir.path() / "contexts.tsv");
  const ContextVocab loaded = ContextVocab::Load(dir.path() / "contexts.tsv");
  ASSERT_EQ(loaded.size(), vocab.size());
  for (const auto& key : vocab.keys()) {
    EXPECT_EQ(loaded.Lookup(key), vocab.Lookup(key));
  }
}

TEST(FusionTest, SumOfBases) {
  const T bases[] = {T::FromValues({1, 2}, {1, 0}), T::FromValues({1, 2}, {0, 1})};
  const T h = FuseSum(std::span<const T>(bases));
  EXPECT_DOUBLE_EQ(h.values()[0], 1);
  EXPECT_DOUBLE_EQ(h.values()[1], 1);
}

TEST(FusionTest, SingleBaseGetsFullWeight) {
  std::mt19937_64 rng(1);
  const T base = FromMatrix<double>(RandomMatrix(3, 4, rng));
  const T ctx = FromMatrix<double>(RandomMatrix(3, 4, rng));
  const T w_a = FromMatrix<double>(RandomMatrix(4, 4, rng));
  const T bases[] = {base};
  const auto fused = FuseDynamic(std::span<const T>(bases), ctx, w_a);
  for (double w : fused.weights.values()) EXPECT_DOUBLE_EQ(w, 1.0);
  for (std::size_t i = 0; i < base.size(); ++i) {
    EXPECT_DOUBLE_EQ(fused.embedding.values()[i], base.values()[i]);
  }
}

TEST(FusionTest, EqualBasesGiveThatBase) {
  std::mt19937_64 rng(2);
  const auto e = RandomMatrix(2, 4, rng);
  const T bases[] = {FromMatrix<double>(e), FromMatrix<double>(e)};
  const auto fused = FuseDynamic(std::span<const T>(bases),
                                 FromMatrix<double>(RandomMatrix(2, 4, rng)),
                                 FromMatrix<double>(RandomMatrix(4, 4, rng)));
  for (std::size_t i = 0; i < e.v.size(); ++i) {
    EXPECT_NEAR(fused.embedding.values()[i], e.v[i], 1e-12);
  }
}

TEST(FusionTest, DynamicMatchesOracle) {
  std::mt19937_64 rng(3);
  const std::size_t d = 4;
  const auto b1 = RandomMatrix(1, d, rng);
  const auto b2 = RandomMatrix(1, d, rng);
  const auto c = RandomMatrix(1, d, rng);
  const auto wa = RandomMatrix(d, d, rng);
  const T bases[] = {FromMatrix<double>(b1), FromMatrix<double>(b2)};
  const auto fused = FuseDynamic(std::span<const T>(bases),
                                 FromMatrix<double>(c), FromMatrix<double>(wa));
  std::vector<double> scores;
  for (const auto* b : {&b1, &b2}) {
    double s = 0;
    for (std::size_t r = 0; r < d; ++r) {
      double proj = 0;
      for (std::size_t k = 0; k < d; ++k) proj += wa(r, k) * b->v[k];
      s += c.v[r] * oracle::Silu(proj);
    }
    scores.push_back(s);
  }
  const auto alpha = oracle::Softmax(scores);
  EXPECT_NEAR(fused.weights.values()[0], alpha[0], 1e-12);
  EXPECT_NEAR(fused.weights.values()[1], alpha[1], 1e-12);
  for (std::size_t k = 0; k < d; ++k) {
    EXPECT_NEAR(fused.embedding.values()[k],
                alpha[0] * b1.v[k] + alpha[1] * b2.v[k], 1e-12);
  }
}

TEST(FusionTest, WeightsAreProbabilityVectors) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<T> bases;
    for (int n = 0; n < 3; ++n) {
      bases.push_back(FromMatrix<double>(RandomMatrix(5, 6, rng, 3.0)));
    }
    const auto fused = FuseDynamic(std::span<const T>(bases),
                                   FromMatrix<double>(RandomMatrix(5, 6, rng, 3.0)),
                                   FromMatrix<double>(RandomMatrix(6, 6, rng, 3.0)));
    const auto w = ToMatrix(fused.weights);
    for (std::size_t r = 0; r < w.rows; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < w.cols; ++c) {
        EXPECT_GE(w(r, c), 0);
        total += w(r, c);
      }
      EXPECT_NEAR(total, 1, 1e-12);
    }
  }
}

TEST(FusionTest, PermutingBasesLeavesEmbeddingUnchanged) {
  std::mt19937_64 rng(5);
  const T b1 = FromMatrix<double>(RandomMatrix(2, 4, rng));
  const T b2 = FromMatrix<double>(RandomMatrix(2, 4, rng));
  const T ctx = FromMatrix<double>(RandomMatrix(2, 4, rng));
  const T w_a = FromMatrix<double>(RandomMatrix(4, 4, rng));
  const T forward[] = {b1, b2};
  const T reverse[] = {b2, b1};
  const auto f = FuseDynamic(std::span<const T>(forward), ctx, w_a);
  const auto r = FuseDynamic(std::span<const T>(reverse), ctx, w_a);
  for (std::size_t i = 0; i < f.embedding.size(); ++i) {
    EXPECT_NEAR(f.embedding.values()[i], r.embedding.values()[i], 1e-12);
  }
}

TEST(ContextualizeTest, ZeroWeightsGiveZero) {
  FusionParams<double> params;
  params.mlp_weight = T::Zeros({8, 4});
  params.mlp_bias = T::Zeros({1, 4});
  const T out = Contextualize(T::FromValues({1, 4}, {1, 2, 3, 4}),
                              T::FromValues({1, 4}, {5, 6, 7, 8}), params);
  for (double v : out.values()) EXPECT_EQ(v, 0);
}

TEST(ContextualizeTest, BlockIdentityRecoversSiluOfH) {
  FusionParams<double> params;
  std::vector<double> w(8 * 4, 0.0);
  for (std::size_t i = 0; i < 4; ++i) w[i * 4 + i] = 1;
  params.mlp_weight = T::FromValues({8, 4}, w);
  params.mlp_bias = T::Zeros({1, 4});
  const std::vector<double> h = {-1, 0.5, 2, -3};
  const T out = Contextualize(T::FromValues({1, 4}, h),
                              T::FromValues({1, 4}, {9, 9, 9, 9}), params);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(out.values()[i], oracle::Silu(h[i]), 1e-15);
  }
}

TEST(ContextualizeTest, MatchesMatmulOracle) {
  std::mt19937_64 rng(6);
  const auto h = RandomMatrix(3, 4, rng);
  const auto c = RandomMatrix(3, 4, rng);
  const auto w = RandomMatrix(8, 4, rng);
  const auto b = RandomMatrix(1, 4, rng);
  FusionParams<double> params{T(), FromMatrix<double>(w), FromMatrix<double>(b)};
  const auto got = ToMatrix(Contextualize(FromMatrix<double>(h),
                                          FromMatrix<double>(c), params));
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t o = 0; o < 4; ++o) {
      double z = b.v[o];
      for (std::size_t k = 0; k < 4; ++k) z += h(r, k) * w(k, o) + c(r, k) * w(4 + k, o);
      EXPECT_NEAR(got(r, o), oracle::Silu(z), 1e-12);
    }
}

class CompositionalEmbeddingTest : public ::testing::Test {
 protected:
  CompositionalEmbeddingTest()
      : rng_(11),
        embedding_(QuotientRemainder({2, 8}, 16), 5, 4, FusionMode::kDynamic,
                   rng_) {}

  std::mt19937_64 rng_;
  CompositionalEmbedding<double> embedding_;
};

TEST_F(CompositionalEmbeddingTest, ShapesAndNames) {
  ASSERT_EQ(embedding_.base_tables().size(), 2u);
  EXPECT_EQ(embedding_.base_tables()[0].shape(), (Shape{2, 4}));
  EXPECT_EQ(embedding_.base_tables()[1].shape(), (Shape{8, 4}));
  EXPECT_EQ(embedding_.context_table().shape(), (Shape{5, 4}));
  EXPECT_EQ(embedding_.fusion().mlp_weight.shape(), (Shape{8, 4}));
  std::vector<NamedTensor<double>> params;
  embedding_.AppendParameters(params);
  std::vector<std::string> names;
  for (const auto& p : params) names.push_back(p.name);
  EXPECT_EQ(names, (std::vector<std::string>{
                       "embedding.base.0", "embedding.base.1",
                       "embedding.context", "fusion.w_a", "fusion.mlp.weight",
                       "fusion.mlp.bias"}));
}

TEST_F(CompositionalEmbeddingTest, LookupSelectsDecomposedRows) {
  const auto bases = embedding_.LookupBases(7);
  const auto t0 = ToMatrix(embedding_.base_tables()[0]);
  const auto t1 = ToMatrix(embedding_.base_tables()[1]);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(bases[0].values()[k], t0(1, k));
    EXPECT_EQ(bases[1].values()[k], t1(3, k));
  }
}

TEST_F(CompositionalEmbeddingTest, RowsMatchPerItemPipeline) {
  const ItemIndex items[] = {7, 0, 15};
  const ContextIndex contexts[] = {1, 0, 4};
  const auto embedded = ToMatrix(embedding_.Embed(items, contexts));
  ASSERT_EQ(embedded.rows, 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const ItemIndex one_item[] = {items[i]};
    const ContextIndex one_ctx[] = {contexts[i]};
    const auto single = ToMatrix(embedding_.Embed(one_item, one_ctx));
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_NEAR(embedded(i, k), single(0, k), 1e-15);
    }
  }
}

TEST_F(CompositionalEmbeddingTest, PaddingRowsAreZero) {
  const ItemIndex items[] = {kPaddingItem, 3, kPaddingItem};
  const ContextIndex contexts[] = {0, 2, 0};
  const auto embedded = ToMatrix(embedding_.Embed(items, contexts));
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(embedded(0, k), 0);
    EXPECT_EQ(embedded(2, k), 0);
  }
  const ItemIndex all_pad[] = {kPaddingItem, kPaddingItem};
  const ContextIndex zeros[] = {0, 0};
  for (double v : embedding_.Embed(all_pad, zeros).values()) EXPECT_EQ(v, 0);
}

TEST_F(CompositionalEmbeddingTest, ContractErrors) {
  const ItemIndex items[] = {1, 2};
  const ContextIndex one[] = {0};
  EXPECT_THROW(embedding_.Embed(items, one), ContractError);
  EXPECT_THROW(embedding_.Embed({}, {}), ContractError);
  const ContextIndex bad[] = {0, 5};
  EXPECT_THROW(embedding_.Embed(items, bad), IndexError);
}

TEST(CompositionalEmbeddingConfigTest, WeightMatrixOnlyWhenItMatters) {
  std::mt19937_64 rng(1);
  const CompositionalEmbedding<double> single(QuotientRemainder({16}, 16), 3, 4,
                                              FusionMode::kDynamic, rng);
  EXPECT_FALSE(single.uses_attention());
  const CompositionalEmbedding<double> summed(QuotientRemainder({4, 4}, 16), 3,
                                              4, FusionMode::kSum, rng);
  EXPECT_FALSE(summed.uses_attention());
  const ItemIndex items[] = {5};
  const ContextIndex ctx[] = {1};
  const auto result = summed.EmbedWithWeights(items, ctx);
  EXPECT_DOUBLE_EQ(result.weights.values()[0], 0.5);
}

TEST(UniformInitTest, StaysWithinFanBound) {
  std::mt19937_64 rng(3);
  const auto t = UniformInit<double>({50, 16}, 16, rng);
  for (double v : t.values()) EXPECT_LE(std::abs(v), 0.25);
  EXPECT_TRUE(t.requires_grad());
}

}  // namespace
}  // namespace lsan
