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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "core/civiltime.hpp"
#include "core/rng.hpp"
#include "model/instance.hpp"

namespace dtwin::behavior {

enum class State { setup, load_medication_plan, check_medication_plan, dispense, shutdown };

const char* state_name(State s);

// --- Delay profile -----------------------------------------------------------
//
// Per-operation execution-time bounds, derived from device execution logs or
// shipped as defaults. Virtual delays are sampled uniformly in
// [lower_ms, upper_ms]; the mean is kept for reporting.

struct DelayRange {
  std::int64_t lower_ms = 0;
  std::int64_t upper_ms = 0;
  double mean_ms = 0.0;
};

class DelayProfile {
 public:
  void set(const std::string& op, DelayRange range) { ops_[op] = range; }
  const DelayRange* find(const std::string& op) const;
  const std::map<std::string, DelayRange>& ops() const { return ops_; }

  void validate() const;  // 0 <= lower <= mean <= upper

  Json to_json() const;
  static DelayProfile from_json(const Json& j);

  // Shipped defaults for the dispenser: dispensing blocks for at least one
  // minute, configuration traffic answers in the 2.4-3.0 s band, and busy
  // rejections come back fast.
  static DelayProfile dispenser_default();

 private:
  std::map<std::string, DelayRange> ops_;
};

// Builds a profile from an execution log (one JSON record per line:
// {"operation": ..., "start_ms": ..., "end_ms": ...}): per operation
// lower = min duration, upper = max, mean = arithmetic mean.
// Throws DtError{empty_log | malformed_record}.
DelayProfile synchronize_from_logs(const std::string& jsonl_text);
DelayProfile synchronize_from_log_file(const std::string& path);

// --- Behavior spec -------------------------------------------------------------

class TwinRuntime;

struct TransitionDef {
  State from;
  State to;
  std::string trigger;
  std::function<bool(const TwinRuntime&)> guard;   // null = always
  std::function<void(TwinRuntime&)> effect;        // runs between exit and entry
};

// Executable state machine: states, guarded transitions in declaration order
// (the first satisfied guard wins) and one native entry action per state.
struct BehaviorSpec {
  State initial = State::setup;
  std::vector<State> states;
  std::vector<TransitionDef> transitions;
  std::map<State, std::function<void(TwinRuntime&)>> entry_actions;

  // One initial state; Shutdown reachable from every state; every
  // non-final state has at least one outgoing transition.
  void validate() const;

  // The dispenser machine: Setup -> LoadMedicationPlan -> CheckMedicationPlan
  // <-> Dispense, completion back to LoadMedicationPlan, Shutdown from
  // anywhere.
  static BehaviorSpec dispenser();
};

// --- Runtime ---------------------------------------------------------------------

struct TwinConfig {
  std::int64_t epoch_civil_ms = 1'672'560'000'000;  // 2023-01-01T08:00:00
  double acceleration = 60.0;       // wall-to-virtual factor used by pacing consumers
  std::int64_t poll_interval_ms = 30'000;
  std::int64_t processing_ms = 0;   // added on top of sampled delays
  std::uint64_t seed = 1;
  bool log_polls = false;

  Json to_json() const;
};

struct EventRecord {
  std::int64_t at_ms = 0;
  State state = State::setup;
  std::string event;
  Json detail;

  Json to_json() const;
};

struct StepOutcome {
  State from;
  State to;
  std::string trigger;
  std::int64_t at_ms = 0;
};

struct DispenseResult {
  bool empty_cartridge = false;
  bool aborted = false;
  std::int64_t window_ms = 0;
  // (object path of the medicine line, doses removed from current_roll)
  std::vector<std::pair<std::string, std::int64_t>> dispensed;
};

// A running twin: one DeviceInstance driven by one BehaviorSpec under a
// virtual clock. Single-threaded actor: exactly one event (step or API
// request) may execute at a time; wrap with a mutex to share across threads.
class TwinRuntime {
 public:
  TwinRuntime(std::shared_ptr<const model::DeviceSchema> schema,
              model::DeviceInstance instance, BehaviorSpec spec, DelayProfile profile,
              TwinConfig config);

  TwinRuntime(const TwinRuntime&) = delete;
  TwinRuntime& operator=(const TwinRuntime&) = delete;

  // -- event-loop surface --
  StepOutcome step();                      // processes exactly one machine event
  void run_until(std::int64_t deadline_ms);  // processes internal events up to a deadline
  DispenseResult dispense();               // completes the in-flight dispense cycle
  void shutdown();                         // from any state; idempotent

  // -- request-side surface --
  bool busy_at(std::int64_t t_ms) const;
  std::int64_t sample_delay(const std::string& op);
  bool chance(double p) { return rng_.bernoulli(p); }

  // -- introspection --
  State state() const { return state_; }
  std::int64_t now_ms() const { return now_; }
  std::int64_t busy_until_ms() const { return busy_until_; }
  const model::DeviceInstance& instance() const { return instance_; }
  model::DeviceInstance& instance() { return instance_; }
  const model::DeviceSchema& schema() const { return *schema_; }
  const TwinConfig& config() const { return config_; }
  const DelayProfile& profile() const { return profile_; }
  const std::vector<EventRecord>& event_log() const { return events_; }
  std::string event_log_jsonl() const;

  // guards used by BehaviorSpec::dispenser()
  bool has_active_plan() const;
  bool active_plan_completed() const;
  bool intake_due() const;
  bool window_elapsed() const;
  bool shutdown_requested() const { return shutdown_requested_; }

  std::optional<std::int64_t> next_intake_at() const;

  // effects used by BehaviorSpec::dispenser()
  void mark_active_plan_completed();
  void begin_dispense();   // entry action of Dispense
  void commit_dispense();  // effect of the Dispense -> Check transition

 private:
  struct PlanSchedule {
    std::uint64_t version = 0;
    std::int64_t first_day = 0;   // civil days
    std::int64_t period_days = 0;
    std::vector<std::int64_t> times_of_day;  // sorted ms
    bool parseable = false;
  };

  const model::ObjectNode* active_plan() const;
  const PlanSchedule& schedule_for(const model::ObjectNode* plan) const;
  std::optional<std::int64_t> next_due(const model::ObjectNode* plan,
                                       std::int64_t from_ms) const;
  std::optional<std::int64_t> next_internal_event() const;
  StepOutcome process_event_at_now();
  void enter_state(State s, std::int64_t at_ms);
  void log_event(std::int64_t at, State s, std::string event, Json detail = nullptr);
  void refresh_plan_bookkeeping() const;
  std::int64_t cursor_for(const model::ObjectNode* plan) const;

  std::shared_ptr<const model::DeviceSchema> schema_;
  model::DeviceInstance instance_;
  BehaviorSpec spec_;
  DelayProfile profile_;
  TwinConfig config_;
  Rng rng_;

  State state_ = State::setup;
  std::int64_t now_ = 0;
  std::int64_t state_deadline_ = 0;  // setup/load completion instant

  // in-flight dispense
  std::int64_t window_start_ = 0;
  std::int64_t busy_until_ = 0;
  bool window_empty_cartridge_ = false;
  const model::ObjectNode* pending_plan_ = nullptr;
  const model::ObjectNode* pending_intake_ = nullptr;
  std::int64_t pending_instant_ = 0;
  DispenseResult last_dispense_;

  bool shutdown_requested_ = false;

  // plan bookkeeping (lazily refreshed against the instance version)
  mutable std::uint64_t seen_version_ = ~0ULL;
  mutable std::map<const model::ObjectNode*, std::int64_t> plan_cursor_;
  mutable std::set<const model::ObjectNode*> completed_plans_;
  mutable std::map<const model::ObjectNode*, PlanSchedule> schedule_cache_;

  std::vector<EventRecord> events_;
};

}  // namespace dtwin::behavior
