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

#include "lsan/checkpoint.h"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "lsan/error.h"
#include "test_util.h"

namespace lsan {
namespace {

std::string ReadAll(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void WriteAll(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  out << data;
}

class CheckpointTest : public ::testing::Test {
 protected:
  CheckpointTest() : dir_("ckpt") {
    config_ = testing::TinyConfig(VariantKind::kFull);
    config_.layers = 2;
  }

  testing::TempDir dir_;
  ModelConfig config_;
};

TEST_F(CheckpointTest, RoundTripIsBitIdentical) {
  const LsanModel<float> model(config_);
  const auto path = dir_.path() / "m.ckpt";
  SaveCheckpoint(model, path, "abc123");
  const LoadedCheckpoint loaded = LoadCheckpoint(path);
  EXPECT_EQ(loaded.config_hash, "abc123");
  EXPECT_EQ(loaded.model.config().ToKeyValues(), config_.ToKeyValues());
  ASSERT_EQ(loaded.model.parameters().size(), model.parameters().size());
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    EXPECT_EQ(loaded.model.parameters()[i].name, model.parameters()[i].name);
    const auto a = model.parameters()[i].tensor.values();
    const auto b = loaded.model.parameters()[i].tensor.values();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
  std::mt19937_64 rng(1);
  const SequenceInput in = testing::RandomInput(config_, 6, 1, rng);
  const auto x = ForwardScores(in, model).values();
  const auto y = ForwardScores(in, loaded.model).values();
  EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
}

TEST_F(CheckpointTest, SavingTwiceGivesIdenticalBytes) {
  const LsanModel<float> model(config_);
  SaveCheckpoint(model, dir_.path() / "a.ckpt", "h");
  SaveCheckpoint(model, dir_.path() / "b.ckpt", "h");
  EXPECT_EQ(ReadAll(dir_.path() / "a.ckpt"), ReadAll(dir_.path() / "b.ckpt"));
}

TEST_F(CheckpointTest, CorruptFilesAreRejected) {
  const LsanModel<float> model(config_);
  const auto path = dir_.path() / "m.ckpt";
  SaveCheckpoint(model, path, "h");
  const std::string good = ReadAll(path);

  const auto bad = dir_.path() / "bad.ckpt";
  WriteAll(bad, good.substr(0, good.size() - 3));
  EXPECT_THROW(LoadCheckpoint(bad), IoError);
  WriteAll(bad, "NOT-A-CHECKPOINT\n");
  EXPECT_THROW(LoadCheckpoint(bad), IoError);
  std::string renamed = good;
  renamed.replace(renamed.find("output.bias"), 11, "output.bais");
  WriteAll(bad, renamed);
  EXPECT_THROW(LoadCheckpoint(bad), IoError);
  EXPECT_THROW(LoadCheckpoint(dir_.path() / "missing.ckpt"), IoError);
}

}  // namespace
}  // namespace lsan
