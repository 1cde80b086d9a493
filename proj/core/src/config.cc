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

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lsan/error.h"

namespace lsan {
namespace {

// Keys that never change numeric results.
constexpr std::string_view kUnhashedKeys[] = {
    "workspace", "out", "checkpoint", "threads", "attention_user"};

constexpr std::string_view kModelKeys[] = {
    "num_items", "num_contexts", "dim",   "kernel",  "heads",
    "layers",    "t_max",        "num_tables", "m1", "table_sizes",
    "variant",   "seed"};

std::string_view Trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double ParseReal(std::string_view key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size()) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + value +
                      "'");
  }
  return v;
}

std::size_t ParseSize(std::string_view key, const std::string& value) {
  std::size_t v = 0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError(std::string(key) +
                      ": expected a non-negative integer, got '" + value + "'");
  }
  return v;
}

}  // namespace

RunConfig::RunConfig()
    : values_{
          {"dim", "128"},
          {"kernel", "5"},
          {"heads", "2"},
          {"layers", "1"},
          {"t_max", "50"},
          {"num_tables", "2"},
          {"m1", "2"},
          {"table_sizes", ""},
          {"variant", "full"},
          {"num_items", "0"},
          {"num_contexts", "0"},
          {"lambda", "1e-5"},
          {"lr", "0.001"},
          {"batch", "256"},
          {"epochs", "200"},
          {"patience", "10"},
          {"seed", "42"},
          {"beta1", "0.9"},
          {"beta2", "0.999"},
          {"adam_eps", "1e-8"},
          {"min_interactions", "5"},
          {"split", "test"},
          {"last_k", "10"},
          {"attention_user", ""},
          {"threads", "1"},
          {"workspace", "."},
          {"data", "data/interactions.tsv"},
          {"store", "store"},
          {"out", "out"},
          {"checkpoint", ""},
      } {}

RunConfig RunConfig::Parse(std::string_view text, std::string_view source) {
  RunConfig config;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) +
                        ": expected key = value");
    }
    try {
      config.Set(Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) +
                        ": " + e.what());
    }
  }
  return config;
}

RunConfig RunConfig::ParseFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return Parse(text.str(), path.string());
}

void RunConfig::Set(std::string_view key, std::string_view value) {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
  it->second = std::string(value);
}

void RunConfig::SetAssignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("expected key=value, got '" + std::string(assignment) +
                      "'");
  }
  Set(Trim(assignment.substr(0, eq)), Trim(assignment.substr(eq + 1)));
}

const std::string& RunConfig::Get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
  return it->second;
}

std::size_t RunConfig::Count(std::string_view key) const {
  return ParseSize(key, Get(key));
}

ModelConfig RunConfig::Model() const {
  std::map<std::string, std::string> kv;
  for (std::string_view key : kModelKeys) kv.emplace(key, Get(key));
  // Zero means "derive from data"; keep the model defaults until then.
  if (kv["num_contexts"] == "0") kv["num_contexts"] = "1";
  return ModelConfig::FromKeyValues(kv);
}

TrainConfig RunConfig::Train() const {
  TrainConfig t;
  t.batch_size = Count("batch");
  t.adam.learning_rate = ParseReal("lr", Get("lr"));
  t.adam.beta1 = ParseReal("beta1", Get("beta1"));
  t.adam.beta2 = ParseReal("beta2", Get("beta2"));
  t.adam.epsilon = ParseReal("adam_eps", Get("adam_eps"));
  t.l2 = ParseReal("lambda", Get("lambda"));
  t.epochs = Count("epochs");
  t.patience = Count("patience");
  t.seed = Count("seed");
  return t;
}

void RunConfig::Validate() const {
  ModelConfig model = Model();
  if (model.num_items == 0) model.num_items = 1;  // filled in later
  model.Validate();
  const TrainConfig train = Train();
  train.Validate();
  if (!(train.adam.beta1 >= 0 && train.adam.beta1 < 1) ||
      !(train.adam.beta2 >= 0 && train.adam.beta2 < 1) ||
      !(train.adam.epsilon > 0)) {
    throw ConfigError("Adam moments must lie in [0, 1) and adam_eps > 0");
  }
  if (Count("last_k") == 0) throw ConfigError("last_k must be positive");
  if (Count("threads") == 0) throw ConfigError("threads must be positive");
  ParseSplit(Get("split"));
}

std::string RunConfig::Canonical() const {
  std::string text;
  for (const auto& [key, value] : values_) {
    bool skip = false;
    for (std::string_view k : kUnhashedKeys) skip = skip || k == key;
    if (skip) continue;
    text += key + "=" + value + "\n";
  }
  return text;
}

std::string RunConfig::Hash() const {
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char c : Canonical()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunConfig::Dump() const {
  std::string text;
  for (const auto& [key, value] : values_) text += key + " = " + value + "\n";
  return text;
}

std::filesystem::path RunConfig::Path(std::string_view key) const {
  std::filesystem::path p = Get(key);
  if (p.is_absolute()) return p;
  return std::filesystem::path(Get("workspace")) / p;
}

std::filesystem::path RunConfig::OutputDir() const {
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
    std::filesystem::path p = env;
    if (p.is_absolute()) return p;
    return std::filesystem::path(Get("workspace")) / p;
  }
  return Path("out");
}

std::filesystem::path RunConfig::CheckpointPath() const {
  if (Get("checkpoint").empty()) return OutputDir() / "model.ckpt";
  return Path("checkpoint");
}

}  // namespace lsan
