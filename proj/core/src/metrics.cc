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

#include "lsan/metrics.h"

#include <algorithm>
#include <cmath>

#include "lsan/error.h"

namespace lsan {

template <typename Real>
std::size_t RankOfTarget(std::span<const Real> scores, ItemIndex target) {
  if (target < 0 || static_cast<std::size_t>(target) >= scores.size()) {
    throw IndexError("target " + std::to_string(target) + " outside " +
                     std::to_string(scores.size()) + " scores");
  }
  const Real mine = scores[target];
  std::size_t ahead = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > mine ||
        (scores[i] == mine && i < static_cast<std::size_t>(target))) {
      ++ahead;
    }
  }
  return ahead + 1;
}

double HitAt(std::size_t rank, int k) {
  return rank >= 1 && rank <= static_cast<std::size_t>(k) ? 1.0 : 0.0;
}

double NdcgAt(std::size_t rank, int k) {
  if (HitAt(rank, k) == 0.0) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

const MetricsAtK& EvalReport::at(int k) const {
  for (const auto& m : metrics) {
    if (m.k == k) return m;
  }
  throw ContractError("cutoff K=" + std::to_string(k) + " was not evaluated");
}

EvalReport SummarizeRanks(std::span<const std::size_t> ranks,
                          std::span<const int> cutoffs) {
  std::vector<int> ks(cutoffs.begin(), cutoffs.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  EvalReport report;
  report.ranks.assign(ranks.begin(), ranks.end());
  report.num_users = ranks.size();
  for (int k : ks) {
    if (k < 1) throw ContractError("cutoffs must be positive");
    MetricsAtK m{k, 0, 0};
    for (std::size_t r : ranks) {
      m.hr += HitAt(r, k);
      m.ndcg += NdcgAt(r, k);
    }
    if (!ranks.empty()) {
      m.hr /= static_cast<double>(ranks.size());
      m.ndcg /= static_cast<double>(ranks.size());
    }
    report.metrics.push_back(m);
  }
  return report;
}

template std::size_t RankOfTarget(std::span<const float>, ItemIndex);
template std::size_t RankOfTarget(std::span<const double>, ItemIndex);

}  // namespace lsan
