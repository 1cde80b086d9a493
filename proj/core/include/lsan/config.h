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

#ifndef LSAN_CONFIG_H_
#define LSAN_CONFIG_H_

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "lsan/model.h"
#include "lsan/trainer.h"

namespace lsan {

// Environment variable that replaces the `out` key when set.
inline constexpr char kOutputDirEnv[] = "LSAN_OUTPUT_DIR";

// Flat key=value run configuration. Every key has a default; unknown keys
// are rejected.
class RunConfig {
 public:
  RunConfig();

  // Lines of "key = value"; '#' starts a comment.
  static RunConfig Parse(std::string_view text, std::string_view source);
  static RunConfig ParseFile(const std::filesystem::path& path);

  // Throws ConfigError for unknown keys.
  void Set(std::string_view key, std::string_view value);
  // "key=value" form used by --set.
  void SetAssignment(std::string_view assignment);
  const std::string& Get(std::string_view key) const;

  // Model and training settings; num_items/num_contexts may still be zero
  // here and are filled from data by the caller.
  ModelConfig Model() const;
  TrainConfig Train() const;
  // Throws ConfigError if Model() or Train() would be inconsistent.
  void Validate() const;

  std::size_t Count(std::string_view key) const;

  // Sorted key=value lines of every setting that affects results, i.e. all
  // but paths and thread count.
  std::string Canonical() const;
  // 16 hex digits, FNV-1a 64 over Canonical().
  std::string Hash() const;
  // Every key, for echoing into run directories.
  std::string Dump() const;

  // Paths are relative to `workspace`; `out` honours kOutputDirEnv.
  std::filesystem::path Path(std::string_view key) const;
  std::filesystem::path OutputDir() const;
  std::filesystem::path CheckpointPath() const;

  const std::map<std::string, std::string, std::less<>>& values() const {
    return values_;
  }

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace lsan

#endif  // LSAN_CONFIG_H_
