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

#include "lsan/twin_attention.h"

#include <gtest/gtest.h>

#include <random>

#include "lsan/error.h"
#include "lsan/gradcheck.h"
#include "lsan/ops.h"
#include "oracles.h"
#include "test_util.h"

namespace lsan {
namespace {

using T = Tensor<double>;
using testing::FromMatrix;
using testing::RandomMatrix;
using testing::ToMatrix;

std::vector<bool> AsBools(const std::vector<std::uint8_t>& v) {
  return std::vector<bool>(v.begin(), v.end());
}

TEST(ConvBranchTest, CentreDeltaIsIdentity) {
  std::mt19937_64 rng(1);
  const auto h = RandomMatrix(5, 3, rng);
  oracle::Matrix k(3, 3);
  for (std::size_t d = 0; d < 3; ++d) k(1, d) = 1;
  const auto out = ToMatrix(ConvBranch(FromMatrix<double>(h),
                                       ConvHead<double>{FromMatrix<double>(k)}));
  for (std::size_t i = 0; i < h.v.size(); ++i) EXPECT_EQ(out.v[i], h.v[i]);
}

TEST(ConvBranchTest, ZeroKernelGivesZero) {
  std::mt19937_64 rng(2);
  const auto out = ConvBranch(FromMatrix<double>(RandomMatrix(4, 2, rng)),
                              ConvHead<double>{T::Zeros({5, 2})});
  for (double v : out.values()) EXPECT_EQ(v, 0);
}

TEST(ConvBranchTest, MatchesNestedLoopOracle) {
  std::mt19937_64 rng(3);
  const auto h = RandomMatrix(4, 2, rng);
  const auto k = RandomMatrix(3, 2, rng);
  const auto got = ToMatrix(ConvBranch(FromMatrix<double>(h),
                                       ConvHead<double>{FromMatrix<double>(k)}));
  const auto want = oracle::DepthwiseConv(h, k);
  for (std::size_t i = 0; i < want.v.size(); ++i) {
    EXPECT_NEAR(got.v[i], want.v[i], 1e-12);
  }
}

TEST(ConvBranchTest, LocalityIsExact) {
  std::mt19937_64 rng(4);
  const std::size_t t = 12;
  const std::size_t window = 5;
  const auto h = RandomMatrix(t, 3, rng);
  const ConvHead<double> head{FromMatrix<double>(RandomMatrix(window, 3, rng))};
  const auto base = ToMatrix(ConvBranch(FromMatrix<double>(h), head));
  for (std::size_t row = 0; row < t; ++row) {
    auto perturbed = h;
    for (std::size_t d = 0; d < 3; ++d) perturbed(row, d) += 10.0;
    const auto out = ToMatrix(ConvBranch(FromMatrix<double>(perturbed), head));
    for (std::size_t i = 0; i < t; ++i) {
      const std::size_t dist = i > row ? i - row : row - i;
      for (std::size_t d = 0; d < 3; ++d) {
        if (dist > window / 2) {
          EXPECT_EQ(out(i, d), base(i, d)) << "row " << i << " saw row " << row;
        }
      }
    }
  }
}

TEST(AttnBranchTest, SingleRowAttendsToItself) {
  std::mt19937_64 rng(5);
  const auto h = RandomMatrix(1, 4, rng);
  const AttnHead<double> head{FromMatrix<double>(RandomMatrix(4, 4, rng)),
                              FromMatrix<double>(RandomMatrix(4, 4, rng)),
                              FromMatrix<double>(RandomMatrix(4, 4, rng))};
  const PositionTable<double> pos{FromMatrix<double>(RandomMatrix(3, 4, rng))};
  const std::uint8_t valid[] = {1};
  const auto out = AttnBranch(FromMatrix<double>(h), pos, head, 1, valid);
  EXPECT_DOUBLE_EQ(out.weights.item(), 1.0);
}

TEST(AttnBranchTest, IdenticalRowsGiveUniformWeights) {
  std::mt19937_64 rng(6);
  oracle::Matrix h(4, 4);
  const AttnHead<double> head{FromMatrix<double>(RandomMatrix(4, 4, rng)),
                              FromMatrix<double>(RandomMatrix(4, 4, rng)),
                              FromMatrix<double>(RandomMatrix(4, 4, rng))};
  const PositionTable<double> pos{T::Zeros({4, 4})};
  const std::uint8_t valid[] = {0, 1, 1, 1};
  const auto w = ToMatrix(
      AttnBranch(FromMatrix<double>(h), pos, head, 2, valid).weights);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(w(i, 0), 0.0);
    for (std::size_t j = 1; j < 4; ++j) EXPECT_NEAR(w(i, j), 1.0 / 3, 1e-12);
  }
}

TEST(AttnBranchTest, MatchesNaiveOracle) {
  std::mt19937_64 rng(7);
  for (std::size_t heads : {1u, 2u}) {
    const auto h = RandomMatrix(3, 4, rng);
    const auto pos = RandomMatrix(5, 4, rng);
    const auto wq = RandomMatrix(4, 4, rng);
    const auto wk = RandomMatrix(4, 4, rng);
    const auto wv = RandomMatrix(4, 4, rng);
    const std::vector<std::uint8_t> valid = {1, 0, 1};
    const auto got = AttnBranch(
        FromMatrix<double>(h), PositionTable<double>{FromMatrix<double>(pos)},
        AttnHead<double>{FromMatrix<double>(wq), FromMatrix<double>(wk),
                         FromMatrix<double>(wv)},
        heads, valid);
    const auto want =
        oracle::Attention(h, pos, wq, wk, wv, heads, AsBools(valid));
    const auto out = ToMatrix(got.output);
    const auto w = ToMatrix(got.weights);
    for (std::size_t i = 0; i < want.output.v.size(); ++i) {
      EXPECT_NEAR(out.v[i], want.output.v[i], 1e-12);
    }
    for (std::size_t i = 0; i < want.weights.v.size(); ++i) {
      EXPECT_NEAR(w.v[i], want.weights.v[i], 1e-12);
    }
  }
}

TEST(AttnBranchTest, TooLongSequenceThrows) {
  const AttnHead<double> head{T::Zeros({2, 2}), T::Zeros({2, 2}),
                              T::Zeros({2, 2})};
  const PositionTable<double> pos{T::Zeros({2, 2})};
  const std::uint8_t valid[] = {1, 1, 1};
  EXPECT_THROW(AttnBranch(T::Zeros({3, 2}), pos, head, 1, valid),
               ContractError);
}

class TwinForwardTest : public ::testing::Test {
 protected:
  TwinForwardTest() : rng_(8) {
    for (int k = 0; k < 2; ++k) {
      conv_.push_back({FromMatrix<double>(RandomMatrix(3, 4, rng_))});
      attn_.push_back({FromMatrix<double>(RandomMatrix(4, 4, rng_)),
                       FromMatrix<double>(RandomMatrix(4, 4, rng_)),
                       FromMatrix<double>(RandomMatrix(4, 4, rng_))});
    }
    pos_.table = FromMatrix<double>(RandomMatrix(6, 4, rng_));
  }

  std::mt19937_64 rng_;
  std::vector<ConvHead<double>> conv_;
  std::vector<AttnHead<double>> attn_;
  PositionTable<double> pos_;
};

TEST_F(TwinForwardTest, OneHeadEachGivesDoubleWidth) {
  const auto h = FromMatrix<double>(RandomMatrix(2, 4, rng_));
  const std::uint8_t valid[] = {1, 1};
  const auto out = TwinForward<double>(h, {conv_.data(), 1}, {attn_.data(), 1},
                                       pos_, valid, 1);
  EXPECT_EQ(out.features.shape(), (Shape{2, 8}));
  EXPECT_EQ(out.attention.size(), 1u);
}

TEST_F(TwinForwardTest, HeadSlicesEqualStandaloneOutputs) {
  const auto hm = RandomMatrix(5, 4, rng_);
  const auto h = FromMatrix<double>(hm);
  const std::uint8_t valid[] = {1, 1, 1, 1, 1};
  const auto out = ToMatrix(
      TwinForward<double>(h, conv_, attn_, pos_, valid, 2).features);
  std::vector<oracle::Matrix> expected;
  for (const auto& c : conv_) expected.push_back(ToMatrix(ConvBranch(h, c)));
  for (const auto& a : attn_) {
    expected.push_back(ToMatrix(AttnBranch(h, pos_, a, 2, valid).output));
  }
  for (std::size_t k = 0; k < expected.size(); ++k)
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t d = 0; d < 4; ++d) {
        EXPECT_EQ(out(i, k * 4 + d), expected[k](i, d)) << "head " << k;
      }
}

TEST_F(TwinForwardTest, ZeroParametersGiveZeroOutput) {
  std::vector<ConvHead<double>> conv = {{T::Zeros({3, 4})}};
  std::vector<AttnHead<double>> attn = {
      {T::Zeros({4, 4}), T::Zeros({4, 4}), T::Zeros({4, 4})}};
  const std::uint8_t valid[] = {1, 1, 1};
  const auto out = TwinForward<double>(
      FromMatrix<double>(RandomMatrix(3, 4, rng_)), conv, attn, pos_, valid, 1);
  for (double v : out.features.values()) EXPECT_EQ(v, 0);
}

TEST_F(TwinForwardTest, MismatchedHeadCountsThrow) {
  const std::uint8_t valid[] = {1, 1};
  EXPECT_THROW(TwinForward<double>(FromMatrix<double>(RandomMatrix(2, 4, rng_)),
                                   {conv_.data(), 1}, attn_, pos_, valid, 2),
               ContractError);
}

TEST(CountBranchParamsTest, Formulas) {
  const auto small = CountBranchParams(1, 5, 8);
  EXPECT_EQ(small.twin, 232);
  EXPECT_EQ(small.plain, 384);
  const auto shipped = CountBranchParams(2, 5, 128);
  EXPECT_EQ(shipped.twin, 99584);
  EXPECT_EQ(shipped.plain, 196608);
  // L = 3D makes both designs equal.
  const auto edge = CountBranchParams(2, 24, 8);
  EXPECT_EQ(edge.twin, edge.plain);
  EXPECT_THROW(CountBranchParams(0, 5, 8), ContractError);
}

TEST(TwinAttentionLayerTest, ParameterCountsMatchFormula) {
  std::mt19937_64 rng(9);
  for (bool plain : {false, true}) {
    const TwinAttentionLayer<float> layer(128, 5, 2, 50, plain, rng);
    std::vector<NamedTensor<float>> params;
    layer.AppendParameters("layer0.", params);
    std::int64_t encoder = 0;
    for (const auto& p : params) {
      if (p.name != "layer0.position") encoder += static_cast<std::int64_t>(p.tensor.size());
    }
    const auto want = CountBranchParams(2, 5, 128);
    EXPECT_EQ(encoder, plain ? want.plain : want.twin);
    EXPECT_EQ(layer.output_width(), 4u * 128);
  }
}

TEST(TwinAttentionLayerTest, RejectsEvenWindow) {
  std::mt19937_64 rng(10);
  EXPECT_THROW(TwinAttentionLayer<double>(4, 4, 1, 5, false, rng), ConfigError);
}

TEST(TwinAttentionLayerTest, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  const TwinAttentionLayer<double> layer(4, 3, 2, 5, false, rng);
  const T h = FromMatrix<double>(RandomMatrix(4, 4, rng), true);
  const T w = FromMatrix<double>(RandomMatrix(4, 16, rng));
  const std::uint8_t valid[] = {0, 1, 1, 1};
  std::vector<NamedTensor<double>> params = {{"h", h}};
  layer.AppendParameters("", params);
  auto f = [&] { return Sum(Mul(layer.Forward(h, valid).features, w)); };
  EXPECT_LT(FiniteDiffCheck(f, params).max_relative_error(), 1e-5);
}

}  // namespace
}  // namespace lsan
