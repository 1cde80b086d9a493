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

#include "lsan/cli.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lsan/attention_export.h"
#include "lsan/checkpoint.h"
#include "lsan/config.h"
#include "lsan/data.h"
#include "lsan/error.h"
#include "lsan/gradcheck.h"
#include "lsan/metrics.h"
#include "lsan/model.h"
#include "lsan/trainer.h"

namespace lsan {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string Grouped(std::int64_t n) {
  std::string digits = std::to_string(n < 0 ? -n : n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return n < 0 ? "-" + out : out;
}

std::string Fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

struct RunData {
  Dataset dataset;
  ContextVocab vocab;
  ModelConfig model;
};

RunData LoadRunData(const RunConfig& config) {
  RunData data;
  data.dataset = LoadDataset(config.Path("store"));
  data.model = config.Model();
  data.vocab = BuildContextVocab(data.dataset, data.model.max_len);
  data.model.num_items = static_cast<std::int64_t>(data.dataset.num_items());
  data.model.num_contexts = static_cast<std::int64_t>(data.vocab.size());
  return data;
}

// Vocabulary stored next to a checkpoint wins over a rebuilt one so that
// context indices line up with the trained table.
ContextVocab VocabFor(const fs::path& checkpoint, const Dataset& dataset,
                      std::size_t max_len) {
  const fs::path stored = checkpoint.parent_path() / "contexts.tsv";
  if (fs::exists(stored)) return ContextVocab::Load(stored);
  return BuildContextVocab(dataset, max_len);
}

void CheckCompatible(const ModelConfig& model, const Dataset& dataset,
                     const ContextVocab& vocab) {
  if (model.num_items != static_cast<std::int64_t>(dataset.num_items())) {
    throw ConfigError("checkpoint has " + std::to_string(model.num_items) +
                      " items but the store has " +
                      std::to_string(dataset.num_items()));
  }
  if (model.num_contexts != static_cast<std::int64_t>(vocab.size())) {
    throw ConfigError("checkpoint has " + std::to_string(model.num_contexts) +
                      " context rows but the vocabulary has " +
                      std::to_string(vocab.size()));
  }
}

ordered_json ReportJson(const EvalReport& report, const std::string& hash) {
  ordered_json j;
  j["split"] = report.split;
  ordered_json ks = ordered_json::array();
  ordered_json hr = ordered_json::array();
  ordered_json ndcg = ordered_json::array();
  for (const auto& m : report.metrics) {
    ks.push_back(m.k);
    hr.push_back(m.hr);
    ndcg.push_back(m.ndcg);
  }
  j["K"] = ks;
  j["hr"] = hr;
  j["ndcg"] = ndcg;
  j["n_users"] = report.num_users;
  j["params_total"] = report.params.total;
  j["params_embedding"] = report.params.embedding;
  j["config_hash"] = hash;
  return j;
}

void PrintReport(const EvalReport& report, std::ostream& out) {
  out << "split " << report.split << ", " << report.num_users << " users\n";
  for (const auto& m : report.metrics) {
    out << "  HR@" << m.k << " " << Fixed(m.hr, 4) << "  nDCG@" << m.k << " "
        << Fixed(m.ndcg, 4) << "\n";
  }
}

struct TrainedRun {
  TrainResult result;
  LsanModel<float> model;
};

// The context table is not compressed; say so when it eats the savings.
void WarnContextGrowth(const ParameterBreakdown& b, const ModelConfig& mc,
                       std::ostream& err) {
  const std::int64_t saved =
      mc.num_items * static_cast<std::int64_t>(mc.dim) - b.embedding;
  if (b.context > saved) {
    err << "warning: context table holds " << Grouped(b.context)
        << " values, more than the " << Grouped(saved)
        << " saved by compressing the item table\n";
  }
}

TrainedRun TrainModel(const RunConfig& config, const RunData& data,
                      const ModelConfig& model_config, std::ostream& out,
                      std::string* log_csv) {
  LsanModel<float> model(model_config);
  const std::size_t max_len = model_config.max_len;
  const auto examples =
      MakeTrainingExamples(data.dataset, data.vocab, max_len);
  const auto validation =
      MakeEvalCases(data.dataset, data.vocab, Split::kValidation, max_len);
  auto on_epoch = [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << " loss " << Fixed(r.loss, 6)
        << " val_ndcg10 " << Fixed(r.val_ndcg10, 6) << "\n";
    if (log_csv != nullptr) {
      char line[128];
      std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.3f\n", r.epoch, r.loss,
                    r.val_ndcg10, r.seconds);
      *log_csv += line;
    }
  };
  TrainResult result = Train<float>(model, examples, validation,
                                    config.Train(), on_epoch);
  return {std::move(result), std::move(model)};
}

int PrepareData(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const IngestResult ingest = Ingest(config.Path("data"));
  for (const auto& w : ingest.warnings) err << "warning: " << w << "\n";
  BuildOptions options;
  options.min_interactions = config.Count("min_interactions");
  const Dataset dataset = BuildSequences(ingest.interactions, options);
  const fs::path store = config.Path("store");
  SaveDataset(dataset, store);
  const DatasetStats stats = ComputeStats(dataset);

  ordered_json j;
  j["lines"] = ingest.lines;
  j["malformed"] = ingest.malformed;
  j["users"] = stats.users;
  j["items"] = stats.items;
  j["categories"] = stats.categories;
  j["interactions"] = stats.interactions;
  j["avg_per_user"] = stats.avg_per_user;
  j["avg_per_item"] = stats.avg_per_item;
  j["sparsity"] = stats.sparsity;
  j["config_hash"] = config.Hash();
  WriteText(store / "stats.json", j.dump(2) + "\n");

  out << "users " << Grouped(static_cast<std::int64_t>(stats.users)) << "\n"
      << "items " << Grouped(static_cast<std::int64_t>(stats.items)) << "\n"
      << "categories " << stats.categories << "\n"
      << "interactions "
      << Grouped(static_cast<std::int64_t>(stats.interactions)) << "\n"
      << "avg/user " << Fixed(stats.avg_per_user, 2) << "\n"
      << "avg/item " << Fixed(stats.avg_per_item, 2) << "\n"
      << "sparsity " << Fixed(100 * stats.sparsity, 2) << "%\n"
      << "store " << store.string() << "\n";
  return 0;
}

int TrainCommand(const RunConfig& config, std::ostream& out,
                 std::ostream& err) {
  const RunData data = LoadRunData(config);
  WarnContextGrowth(CountParameters(LsanModel<float>(data.model)), data.model,
                    err);
  const std::string hash = config.Hash();
  std::string log = "# config_hash=" + hash + "\nepoch,loss,val_ndcg10,seconds\n";
  TrainedRun run = TrainModel(config, data, data.model, out, &log);

  const fs::path ckpt = config.CheckpointPath();
  const fs::path dir = ckpt.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  SaveCheckpoint(run.model, ckpt, hash);
  data.vocab.Save(dir / "contexts.tsv");
  data.dataset.items.Save(dir / "items.tsv");
  WriteText(config.OutputDir() / "train_log.csv", log);
  WriteText(config.OutputDir() / "config.txt",
            "# config_hash=" + hash + "\n" + config.Dump());
  out << "best epoch " << run.result.best_epoch << " val_ndcg10 "
      << Fixed(run.result.best_val_ndcg10, 6) << "\n"
      << "checkpoint " << ckpt.string() << "\n";
  return 0;
}

int EvaluateCommand(const RunConfig& config, std::ostream& out) {
  const fs::path ckpt = config.CheckpointPath();
  LoadedCheckpoint loaded = LoadCheckpoint(ckpt);
  const Dataset dataset = LoadDataset(config.Path("store"));
  const ModelConfig& mc = loaded.model.config();
  const ContextVocab vocab = VocabFor(ckpt, dataset, mc.max_len);
  CheckCompatible(mc, dataset, vocab);
  const Split split = ParseSplit(config.Get("split"));
  const auto cases = MakeEvalCases(dataset, vocab, split, mc.max_len);
  EvalReport report = Evaluate(loaded.model, cases, kDefaultCutoffs,
                               config.Count("threads"));
  report.split = std::string(SplitName(split));
  ordered_json j = ReportJson(report, config.Hash());
  j["checkpoint_config_hash"] = loaded.config_hash;
  const fs::path path =
      config.OutputDir() / ("metrics_" + report.split + ".json");
  WriteText(path, j.dump(2) + "\n");
  PrintReport(report, out);
  out << "metrics " << path.string() << "\n";
  return 0;
}

int AblateCommand(const RunConfig& config, std::ostream& out) {
  const RunData data = LoadRunData(config);
  const std::string hash = config.Hash();
  const Split split = ParseSplit(config.Get("split"));
  std::string table = "# config_hash=" + hash +
                      "\nvariant,params_total,params_embedding,"
                      "hr5,hr10,hr20,ndcg5,ndcg10,ndcg20\n";
  ordered_json rows = ordered_json::array();
  for (VariantKind kind : kAllVariants) {
    ModelConfig mc = data.model;
    mc.variant = kind;
    out << "== " << VariantName(kind) << "\n";
    TrainedRun run = TrainModel(config, data, mc, out, nullptr);
    const auto cases =
        MakeEvalCases(data.dataset, data.vocab, split, mc.max_len);
    EvalReport report = Evaluate(run.model, cases, kDefaultCutoffs,
                                 config.Count("threads"));
    report.split = std::string(SplitName(split));
    char line[256];
    std::snprintf(line, sizeof line,
                  "%s,%lld,%lld,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  std::string(VariantName(kind)).c_str(),
                  static_cast<long long>(report.params.total),
                  static_cast<long long>(report.params.embedding),
                  report.at(5).hr, report.at(10).hr, report.at(20).hr,
                  report.at(5).ndcg, report.at(10).ndcg, report.at(20).ndcg);
    table += line;
    ordered_json row = ReportJson(report, hash);
    row["variant"] = VariantName(kind);
    rows.push_back(row);
  }
  WriteText(config.OutputDir() / "ablation.csv", table);
  WriteText(config.OutputDir() / "ablation.json", rows.dump(2) + "\n");
  out << table;
  return 0;
}

int CountParamsCommand(const RunConfig& config, std::ostream& out,
                       std::ostream& err) {
  ModelConfig mc = config.Model();
  if (mc.num_items == 0) {
    if (!fs::exists(config.Path("store"))) {
      throw ConfigError(
          "count-params needs num_items (and num_contexts) or a prepared store");
    }
    mc = LoadRunData(config).model;
  }
  const LsanModel<float> model(mc);
  const ParameterBreakdown b = CountParameters(model);
  const std::int64_t full = mc.num_items * static_cast<std::int64_t>(mc.dim);
  out << "variant " << VariantName(mc.variant) << "\n"
      << "embedding " << Grouped(b.embedding) << " values ("
      << Fixed(100 * b.embedding_ratio, 2) << "% of " << Grouped(full)
      << " for a full table)\n"
      << "context " << Grouped(b.context) << "\n"
      << "fusion " << Grouped(b.fusion) << "\n"
      << "position " << Grouped(b.position) << "\n"
      << "encoder " << Grouped(b.encoder) << "\n"
      << "ffn " << Grouped(b.ffn) << "\n"
      << "output " << Grouped(b.output) << "\n"
      << "total " << Grouped(b.total) << "\n";
  const auto h = static_cast<std::int64_t>(mc.heads);
  const auto l = static_cast<std::int64_t>(mc.window);
  const auto d = static_cast<std::int64_t>(mc.dim);
  const BranchParamCount c = CountBranchParams(h, l, d);
  out << "encoder per layer: twin H(LD+3D^2) = " << Grouped(c.twin)
      << ", plain 6HD^2 = " << Grouped(c.plain) << " (H=" << h << " L=" << l
      << " D=" << d << ")\n"
      << "config_hash " << config.Hash() << "\n";
  WarnContextGrowth(b, mc, err);
  return 0;
}

int ExportAttentionCommand(const RunConfig& config, std::ostream& out) {
  const fs::path ckpt = config.CheckpointPath();
  LoadedCheckpoint loaded = LoadCheckpoint(ckpt);
  const Dataset dataset = LoadDataset(config.Path("store"));
  const ModelConfig& mc = loaded.model.config();
  const ContextVocab vocab = VocabFor(ckpt, dataset, mc.max_len);
  CheckCompatible(mc, dataset, vocab);

  const std::string& wanted = config.Get("attention_user");
  const auto cases = MakeEvalCases(dataset, vocab, Split::kTest, mc.max_len);
  const EvalCase* chosen = nullptr;
  for (const auto& c : cases) {
    if (wanted.empty() || dataset.sequences[c.user].user == wanted) {
      chosen = &c;
      break;
    }
  }
  if (chosen == nullptr) {
    throw ConfigError(wanted.empty() ? "no user has enough interactions"
                                     : "unknown attention_user '" + wanted + "'");
  }
  const std::string& user = dataset.sequences[chosen->user].user;
  const AttentionExport exported =
      ExportAttention(loaded.model, chosen->input, config.Count("last_k"));
  const fs::path dir = config.OutputDir() / "attention";
  fs::create_directories(dir);
  const std::string comment = "config_hash=" + config.Hash() + " user=" + user +
                              " layer=" + std::to_string(exported.layer);
  for (std::size_t h = 0; h < exported.heads.size(); ++h) {
    WriteHeatmapCsv(exported.heads[h], dir / ("head" + std::to_string(h) + ".csv"),
                    comment + " head=" + std::to_string(h));
  }
  WriteHeatmapCsv(exported.average, dir / "mean.csv", comment + " head=mean");
  out << "user " << user << ", " << exported.heads.size() << " heads, "
      << exported.average.size << "x" << exported.average.size << "\n"
      << "heatmaps " << dir.string() << "\n";
  return 0;
}

int GradcheckCommand(const RunConfig& config, std::ostream& out) {
  ModelConfig mc = config.Model();
  mc.dim = 8;
  mc.max_len = 6;
  if (mc.num_items == 0) mc.num_items = 20;
  if (mc.num_contexts <= 1) mc.num_contexts = 7;
  mc.table_sizes.clear();
  if (mc.variant != VariantKind::kFullEmbedding) {
    mc.m1 = std::min<std::int64_t>(mc.m1, mc.num_items);
  }
  LsanModel<double> model(mc);

  std::mt19937_64 rng(mc.seed);
  std::uniform_int_distribution<ItemIndex> item(0, static_cast<ItemIndex>(mc.num_items - 1));
  std::uniform_int_distribution<ContextIndex> ctx(
      0, static_cast<ContextIndex>(mc.num_contexts - 1));
  std::vector<TrainingExample> batch(2);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t t = 0; t < mc.max_len; ++t) {
      // The second sequence starts with padding to exercise masking.
      const bool pad = b == 1 && t < 2;
      batch[b].input.items.push_back(pad ? kPaddingItem : item(rng));
      batch[b].input.contexts.push_back(pad ? kUnknownContext : ctx(rng));
    }
    batch[b].target = item(rng);
  }
  const double l2 = config.Train().l2;
  auto forward = [&] { return TrainingLoss<double>(batch, model, l2); };
  const GradCheckReport report =
      FiniteDiffCheck(forward, model.mutable_parameters());
  for (const auto& e : report.entries) {
    char line[256];
    std::snprintf(line, sizeof line, "%-22s %6zu coords  rel %.3e  abs %.3e\n",
                  e.name.c_str(), e.coordinates_checked, e.max_relative_error,
                  e.max_absolute_error);
    out << line;
  }
  const double worst = report.max_relative_error();
  const bool pass = worst < 1e-3;
  char line[128];
  std::snprintf(line, sizeof line, "max relative error %.3e (%s)\n", worst,
                pass ? "pass" : "FAIL");
  out << line << "config_hash " << config.Hash() << "\n";
  return pass ? 0 : 1;
}

}  // namespace

int Dispatch(std::span<const std::string> args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Lightweight self-attentive sequential recommender", "lsan"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "key = value run configuration")
      ->check(CLI::ExistingFile);
  app.add_option("-s,--set", overrides, "override one key, key=value")
      ->take_all();

  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"prepare-data", "ingest an interaction TSV into a sequence store"},
      {"train", "train a model and write its checkpoint and log"},
      {"evaluate", "score a checkpoint on the val or test split"},
      {"ablate", "train and evaluate all four variants"},
      {"count-params", "print the parameter breakdown"},
      {"export-attention", "write attention heatmaps for one user"},
      {"gradcheck", "finite-difference check of every gradient at D=8"},
  };
  for (const auto& c : commands) app.add_subcommand(c.name, c.help);

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.push_back("lsan");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    RunConfig config = config_path.empty() ? RunConfig()
                                           : RunConfig::ParseFile(config_path);
    for (const auto& o : overrides) config.SetAssignment(o);
    config.Validate();
    if (name == "prepare-data") return PrepareData(config, out, err);
    if (name == "train") return TrainCommand(config, out, err);
    if (name == "evaluate") return EvaluateCommand(config, out);
    if (name == "ablate") return AblateCommand(config, out);
    if (name == "count-params") return CountParamsCommand(config, out, err);
    if (name == "export-attention") return ExportAttentionCommand(config, out);
    if (name == "gradcheck") return GradcheckCommand(config, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    err << name << ": " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace lsan
