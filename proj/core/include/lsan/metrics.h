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

#ifndef LSAN_METRICS_H_
#define LSAN_METRICS_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lsan/embedding.h"
#include "lsan/model.h"

namespace lsan {

inline constexpr int kDefaultCutoffs[] = {5, 10, 20};

// 1-based rank of `target` under the same ordering as TopK: higher score
// first, equal scores by lower index.
template <typename Real>
std::size_t RankOfTarget(std::span<const Real> scores, ItemIndex target);

// Single relevant item: HR@K = [rank <= K], nDCG@K = [rank <= K] / log2(rank + 1).
double HitAt(std::size_t rank, int k);
double NdcgAt(std::size_t rank, int k);

struct MetricsAtK {
  int k = 0;
  double hr = 0;
  double ndcg = 0;
};

struct EvalReport {
  std::string split;
  std::vector<MetricsAtK> metrics;  // one per cutoff, ascending K
  std::vector<std::size_t> ranks;   // per evaluated user
  std::size_t num_users = 0;
  ParameterBreakdown params;

  // Throws ContractError if K was not evaluated.
  const MetricsAtK& at(int k) const;
};

// Averages HitAt / NdcgAt over users for each cutoff (sorted ascending).
EvalReport SummarizeRanks(std::span<const std::size_t> ranks,
                          std::span<const int> cutoffs);

}  // namespace lsan

#endif  // LSAN_METRICS_H_
