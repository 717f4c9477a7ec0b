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

#include "fidelity/report.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

namespace dtwin::fidelity {

namespace fs = std::filesystem;

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (const double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double sq = 0.0;
  for (const double x : xs) sq += (x - mean) * (x - mean);
  // population std, matching how spreads over a fixed set of runs are reported
  return {mean, std::sqrt(sq / static_cast<double>(xs.size()))};
}

std::array<std::array<std::int64_t, 2>, 2> status_contingency(const harness::Trace& a,
                                                              const harness::Trace& b) {
  std::array<std::array<std::int64_t, 2>, 2> table{{{0, 0}, {0, 0}}};
  for (const auto& e : a) ++table[0][e.status_code == 200 ? 0 : 1];
  for (const auto& e : b) ++table[1][e.status_code == 200 ? 0 : 1];
  return table;
}

std::string format_csv_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

RunSummary summarize_run(const RunArtifacts& artifacts, const AlignmentConfig& cfg) {
  RunSummary s;
  s.hours = artifacts.hours;
  s.rate = artifacts.rate;

  const auto twin_times = harness::response_time_channel(artifacts.twin);
  const auto device_times = harness::response_time_channel(artifacts.device);
  const auto twin_status = harness::status_code_channel(artifacts.twin);
  const auto device_status = harness::status_code_channel(artifacts.device);

  s.similarity_time_pct = align_similarity_numeric(twin_times, device_times, cfg);
  s.similarity_status_pct = align_similarity_categorical(twin_status, device_status, cfg);

  std::vector<double> a(twin_times.begin(), twin_times.end());
  std::vector<double> b(device_times.begin(), device_times.end());
  s.p_wilcoxon = wilcoxon_signed_rank(a, b).p_value;
  s.p_fisher = fisher_exact(status_contingency(artifacts.twin, artifacts.device)).p_value;
  return s;
}

Json SimilarityReport::to_json() const {
  Json run_rows = Json::array();
  for (const auto& r : runs) {
    run_rows.push_back(Json{{"hours", r.hours},
                            {"rate", r.rate},
                            {"similarity_time_pct", r.similarity_time_pct},
                            {"similarity_status_pct", r.similarity_status_pct},
                            {"p_wilcoxon", r.p_wilcoxon},
                            {"p_fisher", r.p_fisher}});
  }
  Json batch_rows = Json::array();
  for (const auto& b : batches) {
    batch_rows.push_back(Json{{"size", b.size},
                              {"similarity_time_pct", b.similarity_time_pct},
                              {"similarity_status_pct", b.similarity_status_pct},
                              {"similarity_time_std_pct", b.similarity_time_std_pct},
                              {"similarity_status_std_pct", b.similarity_status_std_pct}});
  }
  return Json{{"runs", run_rows},
              {"mean", Json{{"similarity_time_pct", mean_time_pct},
                            {"similarity_status_pct", mean_status_pct}}},
              {"std", Json{{"similarity_time_pct", std_time_pct},
                           {"similarity_status_pct", std_status_pct}}},
              {"batches", batch_rows}};
}

std::string SimilarityReport::runs_csv() const {
  std::string out = "run,hours,rate,similarity_time_pct,similarity_status_pct,p_wilcoxon,p_fisher\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    out += std::to_string(i + 1) + "," + format_csv_double(r.hours) + "," +
           std::to_string(r.rate) + "," + format_csv_double(r.similarity_time_pct) + "," +
           format_csv_double(r.similarity_status_pct) + "," +
           format_csv_double(r.p_wilcoxon) + "," + format_csv_double(r.p_fisher) + "\n";
  }
  out += "mean,,," + format_csv_double(mean_time_pct) + "," +
         format_csv_double(mean_status_pct) + ",,\n";
  out += "std,,," + format_csv_double(std_time_pct) + "," + format_csv_double(std_status_pct) +
         ",,\n";
  return out;
}

std::string SimilarityReport::batches_csv() const {
  std::string out =
      "size,similarity_time_pct,similarity_status_pct,similarity_time_std_pct,"
      "similarity_status_std_pct\n";
  for (const auto& b : batches) {
    out += std::to_string(b.size) + "," + format_csv_double(b.similarity_time_pct) + "," +
           format_csv_double(b.similarity_status_pct) + "," +
           format_csv_double(b.similarity_time_std_pct) + "," +
           format_csv_double(b.similarity_status_std_pct) + "\n";
  }
  return out;
}

SimilarityReport build_report(const std::vector<RunArtifacts>& runs,
                              const std::vector<BatchArtifacts>& batches,
                              const AlignmentConfig& cfg, unsigned threads) {
  if (runs.empty() && batches.empty()) {
    throw DtError(Errc::invalid_argument, "report needs at least one run or batch");
  }
  SimilarityReport report;
  for (const auto& run : runs) report.runs.push_back(summarize_run(run, cfg));

  std::vector<double> times, statuses;
  for (const auto& r : report.runs) {
    times.push_back(r.similarity_time_pct);
    statuses.push_back(r.similarity_status_pct);
  }
  std::tie(report.mean_time_pct, report.std_time_pct) = mean_std(times);
  std::tie(report.mean_status_pct, report.std_status_pct) = mean_std(statuses);

  const unsigned workers =
      threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  for (const auto& batch : batches) {
    const auto device_times = harness::response_time_channel(batch.device);
    const auto device_status = harness::status_code_channel(batch.device);
    std::vector<double> sim_time(batch.twins.size()), sim_status(batch.twins.size());

    std::atomic<std::size_t> cursor{0};
    auto worker = [&]() {
      while (true) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= batch.twins.size()) break;
        const auto twin_times = harness::response_time_channel(batch.twins[i]);
        const auto twin_status = harness::status_code_channel(batch.twins[i]);
        sim_time[i] = align_similarity_numeric(twin_times, device_times, cfg);
        sim_status[i] = align_similarity_categorical(twin_status, device_status, cfg);
      }
    };
    std::vector<std::thread> pool;
    const unsigned n_threads =
        std::min<unsigned>(workers, std::max<std::size_t>(1, batch.twins.size()));
    for (unsigned w = 0; w < n_threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    BatchRow row;
    row.size = batch.size;
    std::tie(row.similarity_time_pct, row.similarity_time_std_pct) = mean_std(sim_time);
    std::tie(row.similarity_status_pct, row.similarity_status_std_pct) = mean_std(sim_status);
    report.batches.push_back(row);
  }
  return report;
}

SimilarityReport report_from_dirs(const std::vector<std::string>& run_dirs,
                                  const std::string& batch_dir, const std::string& out_dir,
                                  const AlignmentConfig& cfg) {
  std::vector<RunArtifacts> runs;
  for (const auto& dir : run_dirs) {
    RunArtifacts art;
    std::ifstream meta(dir + "/run_meta.json");
    if (meta) {
      Json m = Json::parse(meta, nullptr, false);
      if (!m.is_discarded()) {
        art.hours = m.value("hours", 0.0);
        art.rate = m.value("rate", 0);
      }
    }
    art.twin = harness::load_trace_jsonl(dir + "/twin.jsonl");
    art.device = harness::load_trace_jsonl(dir + "/emulator.jsonl");
    runs.push_back(std::move(art));
  }

  std::vector<BatchArtifacts> batches;
  if (!batch_dir.empty()) {
    const auto device = harness::load_trace_jsonl(batch_dir + "/emulator.jsonl");
    std::vector<fs::path> size_dirs;
    for (const auto& entry : fs::directory_iterator(batch_dir)) {
      if (entry.is_directory() && entry.path().filename().string().rfind("size_", 0) == 0) {
        size_dirs.push_back(entry.path());
      }
    }
    std::sort(size_dirs.begin(), size_dirs.end());
    for (const auto& size_dir : size_dirs) {
      BatchArtifacts batch;
      batch.size = std::stoi(size_dir.filename().string().substr(5));
      batch.device = device;
      std::vector<fs::path> twins;
      for (const auto& entry : fs::directory_iterator(size_dir)) {
        if (entry.path().extension() == ".jsonl") twins.push_back(entry.path());
      }
      std::sort(twins.begin(), twins.end());
      for (const auto& t : twins) batch.twins.push_back(harness::load_trace_jsonl(t.string()));
      batches.push_back(std::move(batch));
    }
  }

  SimilarityReport report = build_report(runs, batches, cfg);

  fs::create_directories(out_dir);
  std::ofstream json_out(out_dir + "/report.json", std::ios::binary);
  if (!json_out) throw DtError(Errc::io_error, "cannot write " + out_dir + "/report.json");
  json_out << report.to_json().dump(2) << '\n';
  std::ofstream csv_out(out_dir + "/report.csv", std::ios::binary);
  csv_out << report.runs_csv();
  if (!report.batches.empty()) {
    std::ofstream batches_out(out_dir + "/report_batches.csv", std::ios::binary);
    batches_out << report.batches_csv();
  }
  return report;
}

}  // namespace dtwin::fidelity
