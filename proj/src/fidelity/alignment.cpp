// Copyright 2024 The dtwin Authors
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

#include "fidelity/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

namespace dtwin::fidelity {

void AlignmentConfig::validate() const {
  if (tolerance_ms < 0) {
    throw DtError(Errc::invalid_argument, "alignment tolerance must not be negative");
  }
  if (!(match_score > mismatch_penalty)) {
    throw DtError(Errc::invalid_argument, "match score must exceed the mismatch penalty");
  }
}

namespace {

// Needleman-Wunsch dynamic program whose primary objective is the number of
// matched positions; similarity reports that maximum over all global
// alignments. The configured scores only rank alignments with equal match
// counts (they decide gap placement, never the similarity value, which keeps
// the 100%-iff-all-match and exhaustive-maximum properties intact).
template <typename Matches>
double align_similarity(std::size_t n, std::size_t m, const AlignmentConfig& cfg,
                        Matches&& matches) {
  cfg.validate();
  if (n == 0 || m == 0) {
    throw DtError(Errc::empty_trace, "cannot align an empty trace");
  }

  std::vector<std::int32_t> prev_match(m + 1), cur_match(m + 1);
  std::vector<double> prev_score(m + 1), cur_score(m + 1);
  for (std::size_t j = 0; j <= m; ++j) {
    prev_match[j] = 0;
    prev_score[j] = static_cast<double>(j) * cfg.gap_penalty;
  }

  for (std::size_t i = 1; i <= n; ++i) {
    cur_match[0] = 0;
    cur_score[0] = static_cast<double>(i) * cfg.gap_penalty;
    for (std::size_t j = 1; j <= m; ++j) {
      const bool hit = matches(i - 1, j - 1);
      const std::int32_t diag_match = prev_match[j - 1] + (hit ? 1 : 0);
      const double diag_score =
          prev_score[j - 1] + (hit ? cfg.match_score : cfg.mismatch_penalty);

      std::int32_t best_match = diag_match;
      double best_score = diag_score;
      auto consider = [&](std::int32_t match, double score) {
        if (match > best_match || (match == best_match && score > best_score)) {
          best_match = match;
          best_score = score;
        }
      };
      consider(prev_match[j], prev_score[j] + cfg.gap_penalty);   // gap in b
      consider(cur_match[j - 1], cur_score[j - 1] + cfg.gap_penalty);  // gap in a

      cur_match[j] = best_match;
      cur_score[j] = best_score;
    }
    std::swap(prev_match, cur_match);
    std::swap(prev_score, cur_score);
  }

  const double matched = prev_match[m];
  return 100.0 * 2.0 * matched / static_cast<double>(n + m);
}

}  // namespace

double align_similarity_numeric(std::span<const std::int64_t> a,
                                std::span<const std::int64_t> b,
                                const AlignmentConfig& cfg) {
  return align_similarity(a.size(), b.size(), cfg, [&](std::size_t i, std::size_t j) {
    return std::llabs(a[i] - b[j]) <= cfg.tolerance_ms;
  });
}

double align_similarity_categorical(std::span<const int> a, std::span<const int> b,
                                    const AlignmentConfig& cfg) {
  return align_similarity(a.size(), b.size(), cfg,
                          [&](std::size_t i, std::size_t j) { return a[i] == b[j]; });
}

}  // namespace dtwin::fidelity
