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

#ifndef LSAN_ATTENTION_EXPORT_H_
#define LSAN_ATTENTION_EXPORT_H_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lsan/model.h"

namespace lsan {

// Square row-major matrix of attention weights.
struct Heatmap {
  std::size_t size = 0;
  std::vector<double> values;

  double at(std::size_t row, std::size_t col) const {
    return values[row * size + col];
  }
};

struct AttentionExport {
  std::size_t layer = 0;
  std::vector<Heatmap> heads;  // attention heads only
  Heatmap average;             // element-wise mean of `heads`
};

// Bottom-right last_k x last_k block of a T x T weight matrix with each row
// rescaled to sum to 1 over the kept columns. Rows with no weight on the kept
// columns stay zero.
Heatmap TailBlock(std::span<const double> weights, std::size_t t,
                  std::size_t last_k);

// Attention maps of the last encoder layer for one sequence.
template <typename Real>
AttentionExport ExportAttention(const LsanModel<Real>& model,
                                const SequenceInput& input,
                                std::size_t last_k = 10);

// Comma-separated rows, 6 significant digits. A non-empty comment becomes a
// leading "# ..." line.
std::string HeatmapToCsv(const Heatmap& heatmap, const std::string& comment = "");
void WriteHeatmapCsv(const Heatmap& heatmap, const std::filesystem::path& path,
                     const std::string& comment = "");

}  // namespace lsan

#endif  // LSAN_ATTENTION_EXPORT_H_
