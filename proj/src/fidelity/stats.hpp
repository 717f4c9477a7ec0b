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

#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "core/error.hpp"

namespace dtwin::fidelity {

struct WilcoxonResult {
  double p_value = 1.0;
  std::size_t n_effective = 0;  // pairs left after dropping zero differences
  bool exact = false;
};

// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences are
// dropped, ties get average ranks, and the two-sided p is 2*min(tails) capped
// at 1. Exact distribution (rank generating function) for n <= 20, normal
// approximation with continuity and tie corrections above. All-zero
// differences give p = 1. Throws DtError{too_few_pairs} for 0 < n < 5.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

struct FisherResult {
  double p_value = 1.0;
  bool degenerate = false;  // a zero margin; p = 1 by convention
};

// Two-sided Fisher's exact test on a 2x2 table: hypergeometric enumeration of
// all tables with the observed margins, summing those no more probable than
// the observed one.
FisherResult fisher_exact(const std::array<std::array<std::int64_t, 2>, 2>& table);

}  // namespace dtwin::fidelity
