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

#ifndef LSAN_DATA_H_
#define LSAN_DATA_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsan/embedding.h"

namespace lsan {

struct Interaction {
  std::string user;
  std::string item;
  std::string category;
  std::int64_t timestamp = 0;  // unix seconds
};

struct IngestResult {
  std::vector<Interaction> interactions;  // file order
  std::size_t lines = 0;                  // data lines seen (header excluded)
  std::size_t malformed = 0;
  bool had_header = false;
  std::vector<std::string> malformed_samples;  // first few, "line N: why"
  std::vector<std::string> warnings;
};

// Reads `user<TAB>item<TAB>category<TAB>timestamp` lines, UTF-8, with an
// optional header. Malformed lines are skipped and counted; more than 1%
// malformed raises DataError. Unreadable files raise IoError.
IngestResult Ingest(const std::filesystem::path& path);
IngestResult ParseInteractions(std::istream& in, std::string_view source);

// One interaction after indexing.
struct Step {
  ItemIndex item = kPaddingItem;
  CategoryIndex category = kPadCategory;
  std::int32_t hour = 0;  // UTC hour of day

  friend bool operator==(const Step&, const Step&) = default;
};

struct UserSequence {
  std::string user;
  std::vector<Step> steps;  // chronological
};

// raw item id -> index (first appearance), with the item's category.
struct ItemVocab {
  std::vector<std::string> raw_ids;
  std::vector<CategoryIndex> categories;

  std::size_t size() const { return raw_ids.size(); }
  // "raw-id<TAB>global-index<TAB>category-index" per line.
  void Save(const std::filesystem::path& path) const;
  static ItemVocab Load(const std::filesystem::path& path);
};

struct Dataset {
  ItemVocab items;
  std::vector<std::string> category_names;  // category c is names[c - 1]
  std::vector<UserSequence> sequences;      // users by first appearance

  std::size_t num_items() const { return items.size(); }
  std::size_t num_users() const { return sequences.size(); }
  std::size_t num_categories() const { return category_names.size(); }
  std::size_t num_interactions() const;
};

struct BuildOptions {
  std::size_t min_interactions = 5;
};

// Iterative k-core filter (items then users, repeated to a fixed point),
// first-appearance indexing, stable chronological sort per user,
// hour = (timestamp / 3600) mod 24. Throws DataError if nothing survives.
Dataset BuildSequences(std::span<const Interaction> interactions,
                       const BuildOptions& options = {});

struct LeaveOneOutSplit {
  std::span<const Step> train;  // v_1 .. v_{T-2}
  Step validation;              // v_{T-1}
  Step test;                    // v_T
};

// nullopt when the sequence has fewer than 3 items.
std::optional<LeaveOneOutSplit> SplitLeaveOneOut(const UserSequence& seq);

struct TrainingWindow {
  std::span<const Step> input;  // last min(t, max_len) items of v_1..v_t
  Step target;                  // v_{t+1}
};

// One window per t in [1, len - 1]. Views point into `train`.
std::vector<TrainingWindow> GenerateTrainingSamples(
    std::span<const Step> train, std::size_t max_len);

// Context triplets of a window; the first position has no predecessor.
std::vector<ContextKey> ContextKeysFor(std::span<const Step> window);

// Vocabulary over the triplets appearing in training windows only.
ContextVocab BuildContextVocab(const Dataset& dataset, std::size_t max_len);

struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t categories = 0;
  std::size_t interactions = 0;
  double avg_per_user = 0;
  double avg_per_item = 0;
  double sparsity = 0;  // 1 - interactions / (users * items)
};

DatasetStats ComputeStats(const Dataset& dataset);

// Sequence store: items.tsv, categories.tsv and sequences.tsv in `dir`.
void SaveDataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset LoadDataset(const std::filesystem::path& dir);

}  // namespace lsan

#endif  // LSAN_DATA_H_
