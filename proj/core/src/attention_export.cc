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

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "lsan/error.h"

namespace lsan {

Heatmap TailBlock(std::span<const double> weights, std::size_t t,
                  std::size_t last_k) {
  if (t == 0 || weights.size() != t * t) {
    throw ContractError("attention matrix must be T x T with T >= 1");
  }
  if (last_k == 0) throw ContractError("last_k must be positive");
  const std::size_t k = std::min(t, last_k);
  const std::size_t offset = t - k;
  Heatmap out;
  out.size = k;
  out.values.assign(k * k, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    const double* row = weights.data() + (offset + r) * t + offset;
    double sum = 0;
    for (std::size_t c = 0; c < k; ++c) sum += row[c];
    if (sum <= 0) continue;
    for (std::size_t c = 0; c < k; ++c) out.values[r * k + c] = row[c] / sum;
  }
  return out;
}

template <typename Real>
AttentionExport ExportAttention(const LsanModel<Real>& model,
                                const SequenceInput& input,
                                std::size_t last_k) {
  NoGradGuard no_grad;
  const ForwardTrace<Real> trace = model.Trace(input);
  AttentionExport out;
  out.layer = trace.attention.size() - 1;
  const std::size_t t = input.items.size();
  for (const auto& head : trace.attention.back()) {
    const auto v = head.values();
    const std::vector<double> weights(v.begin(), v.end());
    out.heads.push_back(TailBlock(weights, t, last_k));
  }
  if (out.heads.empty()) throw ContractError("model has no attention heads");
  out.average.size = out.heads.front().size;
  out.average.values.assign(out.average.size * out.average.size, 0.0);
  for (const auto& h : out.heads) {
    for (std::size_t i = 0; i < h.values.size(); ++i) {
      out.average.values[i] += h.values[i];
    }
  }
  for (double& v : out.average.values) {
    v /= static_cast<double>(out.heads.size());
  }
  return out;
}

std::string HeatmapToCsv(const Heatmap& heatmap, const std::string& comment) {
  std::string text;
  if (!comment.empty()) text += "# " + comment + "\n";
  char buf[32];
  for (std::size_t r = 0; r < heatmap.size; ++r) {
    for (std::size_t c = 0; c < heatmap.size; ++c) {
      std::snprintf(buf, sizeof buf, "%.6g", heatmap.at(r, c));
      if (c > 0) text += ',';
      text += buf;
    }
    text += '\n';
  }
  return text;
}

void WriteHeatmapCsv(const Heatmap& heatmap, const std::filesystem::path& path,
                     const std::string& comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << HeatmapToCsv(heatmap, comment);
  if (!out) throw IoError("failed writing " + path.string());
}

template AttentionExport ExportAttention(const LsanModel<float>&,
                                         const SequenceInput&, std::size_t);
template AttentionExport ExportAttention(const LsanModel<double>&,
                                         const SequenceInput&, std::size_t);

}  // namespace lsan
