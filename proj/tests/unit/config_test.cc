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

#include "lsan/config.h"

#include <gtest/gtest.h>

#include <cstdlib>

#include "lsan/error.h"

namespace lsan {
namespace {

TEST(RunConfigTest, DefaultsFollowReferenceSettings) {
  const RunConfig config;
  const ModelConfig m = config.Model();
  EXPECT_EQ(m.dim, 128u);
  EXPECT_EQ(m.window, 5u);
  EXPECT_EQ(m.heads, 2u);
  EXPECT_EQ(m.layers, 1u);
  EXPECT_EQ(m.num_tables, 2u);
  EXPECT_EQ(m.m1, 2);
  const TrainConfig t = config.Train();
  EXPECT_EQ(t.batch_size, 256u);
  EXPECT_DOUBLE_EQ(t.adam.learning_rate, 0.001);
  EXPECT_DOUBLE_EQ(t.l2, 1e-5);
  EXPECT_EQ(t.patience, 10u);
}

TEST(RunConfigTest, ParsesCommentsAndWhitespace) {
  const RunConfig config = RunConfig::Parse(
      "# sweep point\n dim = 32 \n\nm1=4  # remainder table\nvariant = plain_attn\n",
      "mem");
  EXPECT_EQ(config.Model().dim, 32u);
  EXPECT_EQ(config.Model().m1, 4);
  EXPECT_EQ(config.Model().variant, VariantKind::kPlainAttention);
}

TEST(RunConfigTest, RejectsUnknownKeysAndBadLines) {
  EXPECT_THROW(RunConfig::Parse("dimension = 3\n", "mem"), ConfigError);
  EXPECT_THROW(RunConfig::Parse("dim 3\n", "mem"), ConfigError);
  RunConfig config;
  EXPECT_THROW(config.SetAssignment("nope=1"), ConfigError);
  EXPECT_THROW(config.SetAssignment("dim"), ConfigError);
  config.Set("batch", "-3");
  EXPECT_THROW(config.Validate(), ConfigError);
  config = RunConfig();
  config.Set("lr", "fast");
  EXPECT_THROW(config.Validate(), ConfigError);
  config = RunConfig();
  config.Set("split", "train");
  EXPECT_THROW(config.Validate(), ConfigError);
}

TEST(RunConfigTest, HashTracksResultAffectingKeysOnly) {
  RunConfig a;
  RunConfig b;
  EXPECT_EQ(a.Hash(), b.Hash());
  EXPECT_EQ(a.Hash().size(), 16u);
  b.Set("out", "elsewhere");
  b.Set("threads", "4");
  EXPECT_EQ(a.Hash(), b.Hash());
  b.Set("seed", "43");
  EXPECT_NE(a.Hash(), b.Hash());
}

TEST(RunConfigTest, PathsAreRelativeToWorkspace) {
  RunConfig config;
  config.Set("workspace", "/tmp/ws");
  config.Set("store", "s");
  config.Set("data", "/abs/data.tsv");
  EXPECT_EQ(config.Path("store"), std::filesystem::path("/tmp/ws/s"));
  EXPECT_EQ(config.Path("data"), std::filesystem::path("/abs/data.tsv"));
  ::unsetenv(kOutputDirEnv);
  EXPECT_EQ(config.OutputDir(), std::filesystem::path("/tmp/ws/out"));
  EXPECT_EQ(config.CheckpointPath(),
            std::filesystem::path("/tmp/ws/out/model.ckpt"));
  ::setenv(kOutputDirEnv, "/tmp/override", 1);
  EXPECT_EQ(config.OutputDir(), std::filesystem::path("/tmp/override"));
  ::unsetenv(kOutputDirEnv);
}

}  // namespace
}  // namespace lsan
