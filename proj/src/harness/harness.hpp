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

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "emulator/emulator.hpp"
#include "gateway/gateway.hpp"

namespace dtwin::harness {

// --- Traces -----------------------------------------------------------------

struct TraceEntry {
  std::int64_t id = 0;
  std::int64_t response_time_ms = 0;
  int status_code = 0;
  bool synthetic = false;

  Json to_json() const;
  static TraceEntry from_json(const Json& j);
};

using Trace = std::vector<TraceEntry>;

std::vector<std::int64_t> response_time_channel(const Trace& t);
std::vector<int> status_code_channel(const Trace& t);

void save_trace_jsonl(const std::string& path, const Trace& trace);
Trace load_trace_jsonl(const std::string& path);
void save_requests_jsonl(const std::string& path,
                         const std::vector<gateway::RequestRecord>& corpus);
std::vector<gateway::RequestRecord> load_requests_jsonl(const std::string& path);

// --- Random request generation -----------------------------------------------

struct GeneratorConfig {
  std::uint64_t seed = 1;
  double invalid_rate = 0.2;
  // Route suffixes under /devices/{serial}; the defaults cover the
  // configuration routes whose properties carry constraints.
  std::vector<std::string> routes = {"", "/settings", "/settings/alarm", "/settings/display"};

  void validate() const;
};

class RequestGenerator {
 public:
  RequestGenerator(const model::DeviceSchema& schema, std::string serial, GeneratorConfig cfg);

  // POST with per-property values: with probability invalid_rate a
  // constrainable property (integer with constraint bounds, or enum) is drawn
  // outside its valid set, otherwise inside.
  gateway::RequestRecord next(std::int64_t id, std::int64_t sent_at_ms);

  const GeneratorConfig& config() const { return cfg_; }

 private:
  struct PropPlan {
    std::string name;
    model::ValueKind kind;
    std::vector<std::string> literals;  // enums
    std::optional<std::int64_t> lower, upper;
    bool constrainable = false;
  };
  struct RoutePlan {
    std::string route;
    std::string class_name;
    std::vector<PropPlan> properties;
  };

  Json draw_valid(const PropPlan& p);
  Json draw_invalid(const PropPlan& p);

  GeneratorConfig cfg_;
  std::string serial_;
  std::vector<RoutePlan> routes_;
  Rng rng_;
  std::int64_t epoch_day_ = 19'358;  // 2023-01-01; only feeds generated date strings
};

// --- Endpoints ------------------------------------------------------------------

class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual gateway::ResponseRecord send(const gateway::RequestRecord& request) = 0;
  virtual std::string describe() const = 0;
};

// Dispatches to a twin in this process (one actor; calls are serialized).
class InProcessTwinEndpoint : public Endpoint {
 public:
  InProcessTwinEndpoint(gateway::ApiMapping mapping, behavior::TwinRuntime& rt)
      : mapping_(std::move(mapping)), rt_(rt) {}

  gateway::ResponseRecord send(const gateway::RequestRecord& request) override;
  std::string describe() const override { return "twin:" + mapping_.serial(); }

 private:
  gateway::ApiMapping mapping_;
  behavior::TwinRuntime& rt_;
  std::mutex mutex_;
};

// Dispatches to an emulated device in this process, translating the twin
// route to the linked vendor route first.
class InProcessEmulatorEndpoint : public Endpoint {
 public:
  explicit InProcessEmulatorEndpoint(emulator::EmulatorRuntime& emu) : emu_(emu) {}

  gateway::ResponseRecord send(const gateway::RequestRecord& request) override;
  std::string describe() const override { return "emulator:" + emu_.mapping().serial(); }

 private:
  emulator::EmulatorRuntime& emu_;
  std::mutex mutex_;
};

// Remote endpoint over HTTP. An unreachable host yields a synthetic, flagged
// 503 so the run continues.
class HttpEndpoint : public Endpoint {
 public:
  // vendor_prefix non-empty: rewrite /devices/{serial}/... to the vendor route.
  HttpEndpoint(std::string base_url, std::string vendor_prefix = "");
  ~HttpEndpoint() override;

  gateway::ResponseRecord send(const gateway::RequestRecord& request) override;
  std::string describe() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Identical payloads to both sides; the paired responses land in the traces
// keyed by request id.
std::pair<gateway::ResponseRecord, gateway::ResponseRecord> fork_and_record(
    const gateway::RequestRecord& request, Endpoint& twin_endpoint,
    Endpoint& device_endpoint, Trace& twin_trace, Trace& device_trace);

// --- Experiment runs ----------------------------------------------------------------

struct RunPlan {
  double hours = 1.0;
  int rate_per_min = 30;        // 30 for runs up to 4 h, 20 for 6 h and beyond
  bool allow_nonstandard = false;

  void validate() const;
  std::int64_t total_requests() const;
  std::int64_t gap_ms() const { return 60'000 / rate_per_min; }
};

struct RunConfig {
  RunPlan plan;
  std::uint64_t seed = 42;
  std::string serial = "100";
  std::string vendor_prefix = "karie";
  double invalid_rate = 0.2;
  std::vector<std::string> routes;      // empty = generator defaults
  double acceleration = 60.0;           // <= 0 runs unpaced
  std::int64_t epoch_civil_ms = 1'672'560'000'000;
  behavior::DelayProfile twin_profile = behavior::DelayProfile::dispenser_default();
  emulator::EmulatorConfig emulator;    // seed/epoch are re-derived from this config's seed
};

struct RunResult {
  std::vector<gateway::RequestRecord> corpus;
  Trace twin_trace;
  Trace device_trace;
  std::string twin_events_jsonl;
  std::string device_events_jsonl;
  Json meta;
};

// Seeded virtual-time run: requests are issued at exact gap_ms() intervals of
// virtual time and forked to one twin and one emulated device. Pacing only
// throttles wall-clock emission (virtual traces are identical either way).
RunResult run(const model::DeviceSchema& schema, const Json& filled, const RunConfig& cfg);

struct BatchConfig {
  std::vector<int> sizes = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::uint64_t seed = 42;
  std::string vendor_prefix = "karie";
  std::int64_t epoch_civil_ms = 1'672'560'000'000;
  behavior::DelayProfile twin_profile = behavior::DelayProfile::dispenser_default();
  emulator::EmulatorConfig emulator;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct BatchResult {
  Trace device_trace;  // recorded once from the corpus replay
  struct SizeRun {
    int size = 0;
    std::vector<Trace> twin_traces;  // one per twin, corpus order
  };
  std::vector<SizeRun> sizes;
  Json meta;
};

// Replays a previously recorded corpus against fleets of 10..100 twins in a
// bounded thread pool; each twin is an independent actor with a serial-derived
// seed, so results do not depend on scheduling.
BatchResult run_batches(const model::DeviceSchema& schema, const Json& filled,
                        const std::vector<gateway::RequestRecord>& corpus,
                        const BatchConfig& cfg);

// Artifact layout helpers (requests.jsonl, twin.jsonl, emulator.jsonl, ...).
void write_run_dir(const std::string& dir, const RunResult& result);
void write_batch_dir(const std::string& dir, const BatchResult& result);

// Filled input for fidelity runs: the template defaults with a one-day
// medication plan holding an intake every intake_step_min minutes, so busy
// windows recur often enough to matter at desk scale.
Json experiment_input(const model::DeviceSchema& schema, int intake_step_min = 4);

}  // namespace dtwin::harness
