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

#include <string>
#include <vector>

#include "fidelity/alignment.hpp"
#include "fidelity/stats.hpp"
#include "harness/harness.hpp"

namespace dtwin::fidelity {

struct RunArtifacts {
  double hours = 0.0;
  int rate = 0;
  harness::Trace twin;
  harness::Trace device;
};

struct BatchArtifacts {
  int size = 0;
  std::vector<harness::Trace> twins;
  harness::Trace device;
};

struct RunSummary {
  double hours = 0.0;
  int rate = 0;
  double similarity_time_pct = 0.0;
  double similarity_status_pct = 0.0;
  double p_wilcoxon = 1.0;
  double p_fisher = 1.0;
};

struct BatchRow {
  int size = 0;
  double similarity_time_pct = 0.0;    // mean across twins
  double similarity_status_pct = 0.0;  // mean across twins
  double similarity_time_std_pct = 0.0;
  double similarity_status_std_pct = 0.0;
};

struct SimilarityReport {
  std::vector<RunSummary> runs;
  double mean_time_pct = 0.0;
  double mean_status_pct = 0.0;
  double std_time_pct = 0.0;
  double std_status_pct = 0.0;
  std::vector<BatchRow> batches;

  Json to_json() const;
  std::string runs_csv() const;
  std::string batches_csv() const;
};

// Per-run similarity for both channels plus the statistical tests; the status
// contingency for Fisher's test is [[twin 200s, twin 503s], [device 200s,
// device 503s]].
RunSummary summarize_run(const RunArtifacts& artifacts, const AlignmentConfig& cfg = {});

SimilarityReport build_report(const std::vector<RunArtifacts>& runs,
                              const std::vector<BatchArtifacts>& batches = {},
                              const AlignmentConfig& cfg = {}, unsigned threads = 0);

// Loads run/batch directories written by the harness and writes report.json,
// report.csv and (when batches exist) report_batches.csv under out_dir.
SimilarityReport report_from_dirs(const std::vector<std::string>& run_dirs,
                                  const std::string& batch_dir, const std::string& out_dir,
                                  const AlignmentConfig& cfg = {});

}  // namespace dtwin::fidelity
