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

#include <cstdint>
#include <span>

#include "core/error.hpp"

namespace dtwin::fidelity {

// Global-alignment scoring. Similarity is reported as matched positions, not
// raw score: 100 * 2*matches / (len(a) + len(b)), where matches is the
// maximum over all global alignments; the scores break ties between
// alignments with equal match counts.
struct AlignmentConfig {
  std::int64_t tolerance_ms = 1'000;  // numeric channel: match iff |x - y| <= tolerance
  double match_score = 1.0;
  double mismatch_penalty = -1.0;
  double gap_penalty = -1.0;

  void validate() const;
};

// Numeric channel (response times). Throws DtError{empty_trace}.
double align_similarity_numeric(std::span<const std::int64_t> a,
                                std::span<const std::int64_t> b,
                                const AlignmentConfig& cfg = {});

// Categorical channel (status codes): elements match iff equal.
double align_similarity_categorical(std::span<const int> a, std::span<const int> b,
                                    const AlignmentConfig& cfg = {});

}  // namespace dtwin::fidelity
