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

#include "lsan/data.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "lsan/error.h"

namespace lsan {
namespace {

constexpr std::size_t kMaxMalformedSamples = 5;

std::vector<std::string_view> SplitTabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

bool ParseInt64(std::string_view text, std::int64_t& out) {
  if (text.empty()) return false;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

bool LooksLikeHeader(const std::vector<std::string_view>& fields) {
  if (fields.size() != 4) return false;
  std::int64_t ignored;
  if (ParseInt64(fields[3], ignored)) return false;
  return std::any_of(fields[3].begin(), fields[3].end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  });
}

std::ofstream OpenForWrite(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream OpenForRead(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

[[noreturn]] void BadLine(const std::filesystem::path& path, std::size_t line,
                          const std::string& why) {
  throw IoError(path.string() + ":" + std::to_string(line) + ": " + why);
}

void StripCarriageReturn(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

IngestResult ParseInteractions(std::istream& in, std::string_view source) {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    StripCarriageReturn(line);
    if (line.empty()) continue;
    const auto fields = SplitTabs(line);
    if (first) {
      first = false;
      if (LooksLikeHeader(fields)) {
        result.had_header = true;
        continue;
      }
    }
    ++result.lines;
    std::string why;
    Interaction row;
    if (fields.size() != 4) {
      why = "expected 4 tab-separated fields, got " +
            std::to_string(fields.size());
    } else if (fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      why = "empty id";
    } else if (!ParseInt64(fields[3], row.timestamp)) {
      why = "timestamp '" + std::string(fields[3]) + "' is not an integer";
    } else if (row.timestamp < 0) {
      why = "negative timestamp";
    }
    if (!why.empty()) {
      ++result.malformed;
      if (result.malformed_samples.size() < kMaxMalformedSamples) {
        result.malformed_samples.push_back("line " + std::to_string(line_no) +
                                           ": " + why);
      }
      continue;
    }
    row.user = fields[0];
    row.item = fields[1];
    row.category = fields[2];
    result.interactions.push_back(std::move(row));
  }
  if (in.bad()) throw IoError("read error in " + std::string(source));
  if (result.lines == 0) {
    result.warnings.push_back(std::string(source) +
                              " contains no interactions");
  }
  if (result.malformed > 0) {
    std::ostringstream msg;
    msg << source << ": " << result.malformed << " of " << result.lines
        << " lines are malformed";
    if (result.malformed * 100 > result.lines) {
      msg << " (more than 1%)";
      for (const auto& s : result.malformed_samples) msg << "\n  " << s;
      throw DataError(msg.str());
    }
    result.warnings.push_back(msg.str() + "; skipped");
  }
  return result;
}

IngestResult Ingest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read interactions from " + path.string());
  return ParseInteractions(in, path.string());
}

std::size_t Dataset::num_interactions() const {
  std::size_t total = 0;
  for (const auto& s : sequences) total += s.steps.size();
  return total;
}

Dataset BuildSequences(std::span<const Interaction> interactions,
                       const BuildOptions& options) {
  if (interactions.empty()) throw DataError("no interactions to build from");
  const std::size_t n = interactions.size();
  std::vector<std::uint8_t> alive(n, 1);
  std::unordered_map<std::string_view, std::size_t> counts;
  bool changed = true;
  while (changed) {
    changed = false;
    // Items first, then users, until neither pass drops anything.
    for (int pass = 0; pass < 2; ++pass) {
      auto key = [&](std::size_t i) -> std::string_view {
        return pass == 0 ? interactions[i].item : interactions[i].user;
      };
      counts.clear();
      for (std::size_t i = 0; i < n; ++i) {
        if (alive[i]) ++counts[key(i)];
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (alive[i] && counts[key(i)] < options.min_interactions) {
          alive[i] = 0;
          changed = true;
        }
      }
    }
  }

  Dataset dataset;
  std::unordered_map<std::string_view, ItemIndex> item_index;
  std::unordered_map<std::string_view, CategoryIndex> category_index;
  std::unordered_map<std::string_view, std::size_t> user_index;
  std::vector<std::vector<std::size_t>> per_user;
  for (std::size_t i = 0; i < n; ++i) {
    if (!alive[i]) continue;
    const Interaction& row = interactions[i];
    if (!item_index.contains(row.item)) {
      auto [cat, new_cat] = category_index.try_emplace(
          row.category,
          static_cast<CategoryIndex>(dataset.category_names.size() + 1));
      if (new_cat) dataset.category_names.push_back(row.category);
      item_index.emplace(row.item,
                         static_cast<ItemIndex>(dataset.items.size()));
      dataset.items.raw_ids.push_back(row.item);
      dataset.items.categories.push_back(cat->second);
    }
    auto [user, new_user] = user_index.try_emplace(row.user, per_user.size());
    if (new_user) {
      per_user.emplace_back();
      dataset.sequences.push_back({row.user, {}});
    }
    per_user[user->second].push_back(i);
  }
  if (dataset.sequences.empty()) {
    throw DataError("every interaction was removed by the " +
                    std::to_string(options.min_interactions) +
                    "-interaction filter");
  }
  for (std::size_t u = 0; u < per_user.size(); ++u) {
    auto& rows = per_user[u];
    std::stable_sort(rows.begin(), rows.end(),
                     [&](std::size_t a, std::size_t b) {
                       return interactions[a].timestamp <
                              interactions[b].timestamp;
                     });
    auto& steps = dataset.sequences[u].steps;
    steps.reserve(rows.size());
    for (std::size_t i : rows) {
      const ItemIndex item = item_index.at(interactions[i].item);
      steps.push_back({item, dataset.items.categories[item],
                       static_cast<std::int32_t>(
                           (interactions[i].timestamp / 3600) % 24)});
    }
  }
  return dataset;
}

std::optional<LeaveOneOutSplit> SplitLeaveOneOut(const UserSequence& seq) {
  const std::size_t len = seq.steps.size();
  if (len < 3) return std::nullopt;
  return LeaveOneOutSplit{std::span<const Step>(seq.steps).first(len - 2),
                          seq.steps[len - 2], seq.steps[len - 1]};
}

std::vector<TrainingWindow> GenerateTrainingSamples(
    std::span<const Step> train, std::size_t max_len) {
  if (max_len == 0) throw ContractError("max_len must be positive");
  std::vector<TrainingWindow> samples;
  if (train.size() < 2) return samples;
  samples.reserve(train.size() - 1);
  for (std::size_t t = 1; t < train.size(); ++t) {
    const std::size_t begin = t > max_len ? t - max_len : 0;
    samples.push_back({train.subspan(begin, t - begin), train[t]});
  }
  return samples;
}

std::vector<ContextKey> ContextKeysFor(std::span<const Step> window) {
  std::vector<ContextKey> keys(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) {
    keys[i] = {i == 0 ? kPadCategory : window[i - 1].category,
               window[i].category, window[i].hour};
  }
  return keys;
}

ContextVocab BuildContextVocab(const Dataset& dataset, std::size_t max_len) {
  ContextVocab vocab;
  for (const auto& seq : dataset.sequences) {
    const auto split = SplitLeaveOneOut(seq);
    if (!split) continue;
    for (const auto& sample : GenerateTrainingSamples(split->train, max_len)) {
      for (const auto& key : ContextKeysFor(sample.input)) vocab.Add(key);
    }
  }
  return vocab;
}

DatasetStats ComputeStats(const Dataset& dataset) {
  DatasetStats stats;
  stats.users = dataset.num_users();
  stats.items = dataset.num_items();
  stats.categories = dataset.num_categories();
  stats.interactions = dataset.num_interactions();
  if (stats.users > 0) {
    stats.avg_per_user =
        static_cast<double>(stats.interactions) / static_cast<double>(stats.users);
  }
  if (stats.items > 0) {
    stats.avg_per_item =
        static_cast<double>(stats.interactions) / static_cast<double>(stats.items);
  }
  if (stats.users > 0 && stats.items > 0) {
    stats.sparsity = 1.0 - static_cast<double>(stats.interactions) /
                               (static_cast<double>(stats.users) *
                                static_cast<double>(stats.items));
  }
  return stats;
}

void ItemVocab::Save(const std::filesystem::path& path) const {
  auto out = OpenForWrite(path);
  for (std::size_t i = 0; i < raw_ids.size(); ++i) {
    out << raw_ids[i] << '\t' << i << '\t' << categories[i] << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

ItemVocab ItemVocab::Load(const std::filesystem::path& path) {
  auto in = OpenForRead(path);
  ItemVocab vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    StripCarriageReturn(line);
    if (line.empty()) continue;
    const auto fields = SplitTabs(line);
    std::int64_t index = 0;
    std::int64_t category = 0;
    if (fields.size() != 3 || !ParseInt64(fields[1], index) ||
        !ParseInt64(fields[2], category)) {
      BadLine(path, line_no, "expected raw-id, index, category");
    }
    if (index != static_cast<std::int64_t>(vocab.size())) {
      BadLine(path, line_no, "item indices must be dense and ordered from 0");
    }
    vocab.raw_ids.emplace_back(fields[0]);
    vocab.categories.push_back(static_cast<CategoryIndex>(category));
  }
  return vocab;
}

void SaveDataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  dataset.items.Save(dir / "items.tsv");
  {
    auto out = OpenForWrite(dir / "categories.tsv");
    for (std::size_t c = 0; c < dataset.category_names.size(); ++c) {
      out << dataset.category_names[c] << '\t' << c + 1 << '\n';
    }
  }
  auto out = OpenForWrite(dir / "sequences.tsv");
  for (const auto& seq : dataset.sequences) {
    out << seq.user;
    for (const Step& s : seq.steps) {
      out << '\t' << s.item << ',' << s.category << ',' << s.hour;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing sequence store in " + dir.string());
}

Dataset LoadDataset(const std::filesystem::path& dir) {
  Dataset dataset;
  dataset.items = ItemVocab::Load(dir / "items.tsv");
  std::string line;
  std::size_t line_no = 0;
  {
    const auto path = dir / "categories.tsv";
    auto in = OpenForRead(path);
    while (std::getline(in, line)) {
      ++line_no;
      StripCarriageReturn(line);
      if (line.empty()) continue;
      const auto fields = SplitTabs(line);
      std::int64_t index = 0;
      if (fields.size() != 2 || !ParseInt64(fields[1], index) ||
          index != static_cast<std::int64_t>(dataset.category_names.size() + 1)) {
        BadLine(path, line_no, "expected name and dense index from 1");
      }
      dataset.category_names.emplace_back(fields[0]);
    }
  }
  const auto path = dir / "sequences.tsv";
  auto in = OpenForRead(path);
  line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    StripCarriageReturn(line);
    if (line.empty()) continue;
    const auto fields = SplitTabs(line);
    UserSequence seq{std::string(fields[0]), {}};
    for (std::size_t f = 1; f < fields.size(); ++f) {
      std::int64_t parts[3];
      std::string_view rest = fields[f];
      for (int k = 0; k < 3; ++k) {
        const std::size_t comma = k < 2 ? rest.find(',') : rest.size();
        if (comma == std::string_view::npos ||
            !ParseInt64(rest.substr(0, comma), parts[k])) {
          BadLine(path, line_no, "bad step '" + std::string(fields[f]) + "'");
        }
        rest = k < 2 ? rest.substr(comma + 1) : std::string_view();
      }
      if (parts[0] < 0 ||
          parts[0] >= static_cast<std::int64_t>(dataset.items.size()) ||
          parts[2] < 0 || parts[2] > 23) {
        BadLine(path, line_no, "step out of range '" + std::string(fields[f]) + "'");
      }
      seq.steps.push_back({static_cast<ItemIndex>(parts[0]),
                           static_cast<CategoryIndex>(parts[1]),
                           static_cast<std::int32_t>(parts[2])});
    }
    dataset.sequences.push_back(std::move(seq));
  }
  return dataset;
}

}  // namespace lsan
