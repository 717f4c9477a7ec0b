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

#include "behavior/behavior.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>

namespace dtwin::behavior {

const char* state_name(State s) {
  switch (s) {
    case State::setup: return "Setup";
    case State::load_medication_plan: return "LoadMedicationPlan";
    case State::check_medication_plan: return "CheckMedicationPlan";
    case State::dispense: return "Dispense";
    case State::shutdown: return "Shutdown";
  }
  return "Setup";
}

// --- DelayProfile -------------------------------------------------------------

const DelayRange* DelayProfile::find(const std::string& op) const {
  const auto it = ops_.find(op);
  return it == ops_.end() ? nullptr : &it->second;
}

void DelayProfile::validate() const {
  for (const auto& [op, r] : ops_) {
    if (r.lower_ms < 0 || r.lower_ms > r.upper_ms || r.mean_ms < r.lower_ms ||
        r.mean_ms > r.upper_ms) {
      throw DtError(Errc::invalid_argument,
                    "delay profile entry \"" + op + "\" must satisfy 0 <= lower <= mean <= upper");
    }
  }
}

Json DelayProfile::to_json() const {
  Json j = Json::object();
  for (const auto& [op, r] : ops_) {
    j[op] = Json{{"lower_ms", r.lower_ms}, {"upper_ms", r.upper_ms}, {"mean_ms", r.mean_ms}};
  }
  return j;
}

DelayProfile DelayProfile::from_json(const Json& j) {
  DelayProfile p;
  for (const auto& [op, r] : j.items()) {
    p.set(op, DelayRange{r.at("lower_ms").get<std::int64_t>(),
                         r.at("upper_ms").get<std::int64_t>(),
                         r.value("mean_ms", 0.5 * (r.at("lower_ms").get<double>() +
                                                   r.at("upper_ms").get<double>()))});
  }
  p.validate();
  return p;
}

DelayProfile DelayProfile::dispenser_default() {
  DelayProfile p;
  p.set("setup", {1'000, 3'000, 2'000});
  p.set("load_plan", {500, 1'500, 1'000});
  p.set("dispense", {60'000, 132'000, 96'000});
  p.set("settings_get", {2'400, 3'000, 2'750});
  p.set("settings_update", {2'400, 3'000, 2'750});
  p.set("plan_delete", {2'400, 3'000, 2'750});
  p.set("busy_reject", {50, 150, 100});
  return p;
}

DelayProfile synchronize_from_logs(const std::string& jsonl_text) {
  std::map<std::string, std::vector<std::int64_t>> durations;
  std::istringstream in(jsonl_text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json record;
    try {
      record = Json::parse(line);
    } catch (const Json::exception&) {
      throw DtError(Errc::malformed_record,
                    "execution log line " + std::to_string(line_no) + " is not valid JSON");
    }
    if (!record.is_object() || !record.contains("operation") ||
        !record["operation"].is_string() || !record.contains("start_ms") ||
        !record["start_ms"].is_number() || !record.contains("end_ms") ||
        !record["end_ms"].is_number()) {
      throw DtError(Errc::malformed_record,
                    "execution log line " + std::to_string(line_no) +
                        " must carry operation/start_ms/end_ms");
    }
    const auto start = record["start_ms"].get<std::int64_t>();
    const auto end = record["end_ms"].get<std::int64_t>();
    if (end < start) {
      throw DtError(Errc::malformed_record,
                    "execution log line " + std::to_string(line_no) + " ends before it starts");
    }
    durations[record["operation"].get<std::string>()].push_back(end - start);
  }
  if (durations.empty()) {
    throw DtError(Errc::empty_log, "execution log holds no records");
  }
  DelayProfile profile;
  for (const auto& [op, ds] : durations) {
    DelayRange r;
    r.lower_ms = *std::min_element(ds.begin(), ds.end());
    r.upper_ms = *std::max_element(ds.begin(), ds.end());
    double sum = 0;
    for (const auto d : ds) sum += static_cast<double>(d);
    r.mean_ms = sum / static_cast<double>(ds.size());
    profile.set(op, r);
  }
  return profile;
}

DelayProfile synchronize_from_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DtError(Errc::io_error, "cannot open execution log: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return synchronize_from_logs(buf.str());
}

// --- BehaviorSpec ----------------------------------------------------------------

void BehaviorSpec::validate() const {
  auto known = [&](State s) {
    return std::find(states.begin(), states.end(), s) != states.end();
  };
  if (!known(initial)) {
    throw DtError(Errc::invalid_argument, "behavior spec initial state is not declared");
  }
  if (!known(State::shutdown)) {
    throw DtError(Errc::invalid_argument, "behavior spec must declare Shutdown");
  }
  for (const auto& t : transitions) {
    if (!known(t.from) || !known(t.to)) {
      throw DtError(Errc::invalid_argument, "transition references undeclared state");
    }
  }
  for (const State s : states) {
    if (s == State::shutdown) continue;
    const bool has_outgoing = std::any_of(transitions.begin(), transitions.end(),
                                          [&](const TransitionDef& t) { return t.from == s; });
    if (!has_outgoing) {
      throw DtError(Errc::invalid_argument,
                    std::string("state ") + state_name(s) + " has no outgoing transition");
    }
    // Shutdown must be reachable from s.
    std::set<State> visited{s};
    std::queue<State> frontier;
    frontier.push(s);
    bool reachable = false;
    while (!frontier.empty() && !reachable) {
      const State cur = frontier.front();
      frontier.pop();
      for (const auto& t : transitions) {
        if (t.from != cur) continue;
        if (t.to == State::shutdown) {
          reachable = true;
          break;
        }
        if (visited.insert(t.to).second) frontier.push(t.to);
      }
    }
    if (!reachable) {
      throw DtError(Errc::invalid_argument,
                    std::string("Shutdown unreachable from state ") + state_name(s));
    }
  }
}

BehaviorSpec BehaviorSpec::dispenser() {
  BehaviorSpec spec;
  spec.initial = State::setup;
  spec.states = {State::setup, State::load_medication_plan, State::check_medication_plan,
                 State::dispense, State::shutdown};

  auto shutdown_req = [](const TwinRuntime& rt) { return rt.shutdown_requested(); };

  spec.transitions = {
      {State::setup, State::shutdown, "shutdown", shutdown_req, nullptr},
      {State::setup, State::load_medication_plan, "setup_complete", nullptr, nullptr},

      {State::load_medication_plan, State::shutdown, "shutdown", shutdown_req, nullptr},
      {State::load_medication_plan, State::check_medication_plan, "plan_loaded",
       [](const TwinRuntime& rt) { return rt.has_active_plan(); }, nullptr},
      {State::load_medication_plan, State::load_medication_plan, "awaiting_plan", nullptr,
       nullptr},

      {State::check_medication_plan, State::shutdown, "shutdown", shutdown_req, nullptr},
      {State::check_medication_plan, State::load_medication_plan, "plan_completed",
       [](const TwinRuntime& rt) { return rt.active_plan_completed(); },
       [](TwinRuntime& rt) { rt.mark_active_plan_completed(); }},
      {State::check_medication_plan, State::dispense, "intake_due",
       [](const TwinRuntime& rt) { return rt.intake_due(); }, nullptr},
      {State::check_medication_plan, State::check_medication_plan, "waiting", nullptr, nullptr},

      {State::dispense, State::shutdown, "shutdown", shutdown_req, nullptr},
      {State::dispense, State::check_medication_plan, "dispense_complete",
       [](const TwinRuntime& rt) { return rt.window_elapsed(); },
       [](TwinRuntime& rt) { rt.commit_dispense(); }},
  };

  spec.entry_actions[State::dispense] = [](TwinRuntime& rt) { rt.begin_dispense(); };
  return spec;
}

// --- TwinRuntime -------------------------------------------------------------------

Json TwinConfig::to_json() const {
  return Json{{"epoch", format_civil_datetime(epoch_civil_ms)},
              {"acceleration", acceleration},
              {"poll_interval_ms", poll_interval_ms},
              {"processing_ms", processing_ms},
              {"seed", seed},
              {"log_polls", log_polls}};
}

Json EventRecord::to_json() const {
  Json j{{"at_ms", at_ms}, {"state", state_name(state)}, {"event", event}};
  if (!detail.is_null()) j["detail"] = detail;
  return j;
}

TwinRuntime::TwinRuntime(std::shared_ptr<const model::DeviceSchema> schema,
                         model::DeviceInstance instance, BehaviorSpec spec,
                         DelayProfile profile, TwinConfig config)
    : schema_(std::move(schema)),
      instance_(std::move(instance)),
      spec_(std::move(spec)),
      profile_(std::move(profile)),
      config_(config),
      rng_(config.seed) {
  spec_.validate();
  profile_.validate();
  state_ = spec_.initial;
  state_deadline_ = now_ + sample_delay("setup");
  log_event(now_, state_, "initialized", Json{{"serial", instance_.serial()}});
}

std::int64_t TwinRuntime::sample_delay(const std::string& op) {
  const DelayRange* r = profile_.find(op);
  if (!r) return 0;
  return rng_.uniform_int(r->lower_ms, r->upper_ms);
}

bool TwinRuntime::busy_at(std::int64_t t_ms) const {
  return state_ == State::dispense && t_ms >= window_start_ && t_ms < busy_until_;
}

void TwinRuntime::log_event(std::int64_t at, State s, std::string event, Json detail) {
  events_.push_back({at, s, std::move(event), std::move(detail)});
}

std::string TwinRuntime::event_log_jsonl() const {
  std::string out;
  for (const auto& e : events_) {
    out += e.to_json().dump();
    out += '\n';
  }
  return out;
}

// --- plan bookkeeping --

void TwinRuntime::refresh_plan_bookkeeping() const {
  if (seen_version_ == instance_.version()) return;
  std::set<const model::ObjectNode*> current;
  if (const auto* root = instance_.root()) {
    const auto it = root->children.find("medication_plans");
    if (it != root->children.end()) {
      for (const auto& p : it->second) current.insert(p.get());
    }
  }
  std::erase_if(plan_cursor_, [&](const auto& kv) { return !current.count(kv.first); });
  std::erase_if(completed_plans_, [&](const auto* p) { return !current.count(p); });
  std::erase_if(schedule_cache_, [&](const auto& kv) { return !current.count(kv.first); });
  seen_version_ = instance_.version();
}

const model::ObjectNode* TwinRuntime::active_plan() const {
  refresh_plan_bookkeeping();
  const auto* root = instance_.root();
  if (!root) return nullptr;
  const auto it = root->children.find("medication_plans");
  if (it == root->children.end()) return nullptr;
  for (const auto& plan : it->second) {
    if (!completed_plans_.count(plan.get())) return plan.get();
  }
  return nullptr;
}

const TwinRuntime::PlanSchedule& TwinRuntime::schedule_for(
    const model::ObjectNode* plan) const {
  auto& entry = schedule_cache_[plan];
  if (entry.version == instance_.version() && entry.period_days > 0) return entry;
  entry = PlanSchedule{};
  entry.version = instance_.version();
  const Json first = plan->slot("first_dose_date");
  const Json period = plan->slot("period_days");
  if (!first.is_string() || !period.is_number_integer()) return entry;
  const auto day = parse_civil_date(first.get<std::string>());
  if (!day) return entry;
  entry.first_day = *day;
  entry.period_days = period.get<std::int64_t>();
  const auto it = plan->children.find("intake_times");
  if (it != plan->children.end()) {
    for (const auto& intake : it->second) {
      const Json t = intake->slot("time");
      if (!t.is_string()) continue;
      if (const auto tod = parse_time_of_day(t.get<std::string>())) {
        entry.times_of_day.push_back(*tod);
      }
    }
  }
  std::sort(entry.times_of_day.begin(), entry.times_of_day.end());
  entry.parseable = entry.period_days > 0 && !entry.times_of_day.empty();
  return entry;
}

std::int64_t TwinRuntime::cursor_for(const model::ObjectNode* plan) const {
  const auto it = plan_cursor_.find(plan);
  if (it != plan_cursor_.end()) return it->second;
  plan_cursor_[plan] = now_;  // intakes that predate twin operation never fire
  return now_;
}

std::optional<std::int64_t> TwinRuntime::next_due(const model::ObjectNode* plan,
                                                  std::int64_t from_ms) const {
  const PlanSchedule& sched = schedule_for(plan);
  if (!sched.parseable) return std::nullopt;
  const std::int64_t civil_from = config_.epoch_civil_ms + from_ms;
  const std::int64_t last_day = sched.first_day + sched.period_days;  // exclusive
  std::optional<std::int64_t> best;
  for (const std::int64_t tod : sched.times_of_day) {
    std::int64_t day = civil_day_of(civil_from);
    if (day < sched.first_day) day = sched.first_day;
    std::int64_t candidate = day * kMsPerDay + tod;
    if (candidate < civil_from) candidate += kMsPerDay;
    if (civil_day_of(candidate) >= last_day) continue;
    if (!best || candidate < *best) best = candidate;
  }
  if (!best) return std::nullopt;
  return *best - config_.epoch_civil_ms;
}

std::optional<std::int64_t> TwinRuntime::next_intake_at() const {
  const auto* plan = active_plan();
  if (!plan) return std::nullopt;
  return next_due(plan, cursor_for(plan));
}

bool TwinRuntime::has_active_plan() const { return active_plan() != nullptr; }

bool TwinRuntime::active_plan_completed() const {
  const auto* plan = active_plan();
  if (!plan) return true;
  return !next_due(plan, cursor_for(plan)).has_value();
}

bool TwinRuntime::intake_due() const {
  const auto* plan = active_plan();
  if (!plan) return false;
  const auto due = next_due(plan, cursor_for(plan));
  return due && *due <= now_;
}

bool TwinRuntime::window_elapsed() const { return now_ >= busy_until_; }

void TwinRuntime::mark_active_plan_completed() {
  if (const auto* plan = active_plan()) {
    completed_plans_.insert(plan);
    log_event(now_, state_, "plan_completed");
  }
}

// --- dispense machinery --

void TwinRuntime::begin_dispense() {
  const auto* plan = active_plan();
  if (!plan) throw DtError(Errc::no_active_plan, "no active medication plan to dispense from");
  const auto due = next_due(plan, cursor_for(plan));
  if (!due || *due > now_) {
    throw DtError(Errc::no_active_plan, "no intake is due");
  }
  pending_plan_ = plan;
  pending_instant_ = *due;
  plan_cursor_[plan] = *due + 1;

  // locate the intake that fired (first one matching the due time of day)
  pending_intake_ = nullptr;
  const std::int64_t due_tod = ms_of_day_of(config_.epoch_civil_ms + *due);
  const auto it = plan->children.find("intake_times");
  if (it != plan->children.end()) {
    for (const auto& intake : it->second) {
      const Json t = intake->slot("time");
      if (t.is_string()) {
        const auto tod = parse_time_of_day(t.get<std::string>());
        if (tod && *tod == due_tod) {
          pending_intake_ = intake.get();
          break;
        }
      }
    }
  }

  window_start_ = now_;
  bool empty = false;
  if (const auto* root = instance_.root()) {
    const auto cart = root->children.find("cartridge");
    if (cart != root->children.end() && !cart->second.empty()) {
      const Json v = cart->second.front()->slot("is_empty");
      empty = v.is_boolean() && v.get<bool>();
    }
  }
  window_empty_cartridge_ = empty;
  if (empty) {
    busy_until_ = now_;  // zero-width window: nothing is dispensed
    log_event(now_, state_, "empty_cartridge",
              Json{{"intake_at", format_civil_datetime(config_.epoch_civil_ms + *due)}});
  } else {
    busy_until_ = now_ + sample_delay("dispense");
    log_event(now_, state_, "dispense_started",
              Json{{"intake_at", format_civil_datetime(config_.epoch_civil_ms + *due)},
                   {"window_ms", busy_until_ - window_start_}});
  }
}

void TwinRuntime::commit_dispense() {
  DispenseResult result;
  result.window_ms = busy_until_ - window_start_;
  result.empty_cartridge = window_empty_cartridge_;

  refresh_plan_bookkeeping();
  const bool plan_alive = pending_plan_ && plan_cursor_.count(pending_plan_);
  if (!window_empty_cartridge_) {
    bool intake_alive = false;
    if (plan_alive && pending_intake_) {
      const auto it = pending_plan_->children.find("intake_times");
      if (it != pending_plan_->children.end()) {
        for (const auto& intake : it->second) {
          if (intake.get() == pending_intake_) {
            intake_alive = true;
            break;
          }
        }
      }
    }
    if (!intake_alive) {
      result.aborted = true;
      log_event(now_, state_, "dispense_aborted", Json{{"reason", "plan_removed"}});
    } else {
      Json lines = Json::array();
      const auto lines_it = pending_intake_->children.find("medicine_lines");
      if (lines_it != pending_intake_->children.end()) {
        for (std::size_t i = 0; i < lines_it->second.size(); ++i) {
          auto& line = *lines_it->second[i];
          const Json doses_v = line.slot("doses");
          const Json roll_v = line.slot("current_roll");
          const std::int64_t doses = doses_v.is_number_integer() ? doses_v.get<std::int64_t>() : 0;
          const std::int64_t roll =
              roll_v.is_number_integer() ? std::max<std::int64_t>(roll_v.get<std::int64_t>(), 0) : 0;
          const std::int64_t removed = std::min(doses, roll);
          instance_.set_slot(line, "current_roll", roll - removed);
          const std::string line_path = "medicine_lines[" + std::to_string(i) + "]";
          result.dispensed.emplace_back(line_path, removed);
          lines.push_back(Json{{"line", line_path}, {"doses", removed}});
        }
      }
      log_event(now_, state_, "dispense_completed", Json{{"lines", lines}});
    }
  }

  // intakes that fell inside the busy window were not served
  if (plan_alive) {
    auto cursor = cursor_for(pending_plan_);
    while (true) {
      const auto missed = next_due(pending_plan_, cursor);
      if (!missed || *missed >= busy_until_) break;
      log_event(now_, state_, "missed_intake",
                Json{{"intake_at", format_civil_datetime(config_.epoch_civil_ms + *missed)}});
      cursor = *missed + 1;
    }
    plan_cursor_[pending_plan_] = std::max(plan_cursor_[pending_plan_], cursor);
  }

  last_dispense_ = result;
  pending_plan_ = nullptr;
  pending_intake_ = nullptr;
  window_start_ = busy_until_ = now_;
  window_empty_cartridge_ = false;
}

// --- event loop --

std::optional<std::int64_t> TwinRuntime::next_internal_event() const {
  switch (state_) {
    case State::setup:
    case State::load_medication_plan:
      return std::max(now_, state_deadline_);
    case State::check_medication_plan: {
      const auto* plan = active_plan();
      if (!plan) return now_;  // nothing to check; hand back to LoadMedicationPlan
      const auto due = next_due(plan, cursor_for(plan));
      if (!due) return now_;  // plan completed
      if (*due <= now_) return now_;
      return std::min(*due, now_ + config_.poll_interval_ms);
    }
    case State::dispense:
      return std::max(now_, busy_until_);
    case State::shutdown:
      return std::nullopt;
  }
  return std::nullopt;
}

void TwinRuntime::enter_state(State s, std::int64_t at_ms) {
  state_ = s;
  switch (s) {
    case State::setup:
      state_deadline_ = at_ms + sample_delay("setup");
      break;
    case State::load_medication_plan:
      state_deadline_ =
          at_ms + (has_active_plan() ? sample_delay("load_plan") : config_.poll_interval_ms);
      break;
    default:
      break;
  }
}

StepOutcome TwinRuntime::process_event_at_now() {
  const State from = state_;
  const TransitionDef* chosen = nullptr;
  for (const auto& t : spec_.transitions) {
    if (t.from != state_) continue;
    if (!t.guard || t.guard(*this)) {
      chosen = &t;
      break;
    }
  }
  if (!chosen) {
    // no transition applies; stay and retry on the poll cadence
    state_deadline_ = now_ + config_.poll_interval_ms;
    return {from, from, "stay", now_};
  }

  if (chosen->effect) chosen->effect(*this);
  enter_state(chosen->to, now_);

  const bool self_loop = chosen->from == chosen->to;
  if (!self_loop || config_.log_polls) {
    log_event(now_, chosen->to, chosen->trigger);
  }

  const auto action = spec_.entry_actions.find(chosen->to);
  if (action != spec_.entry_actions.end() && action->second) {
    try {
      action->second(*this);
    } catch (const std::exception& e) {
      // entry action failed: remain in the source state, retry later
      enter_state(from, now_);
      state_deadline_ = now_ + config_.poll_interval_ms;
      log_event(now_, from, "action_failure", Json{{"error", e.what()}});
      return {from, from, "action_failure", now_};
    }
  }
  return {from, chosen->to, chosen->trigger, now_};
}

StepOutcome TwinRuntime::step() {
  if (state_ == State::shutdown) {
    throw DtError(Errc::invalid_state, "twin is shut down");
  }
  const auto next = next_internal_event();
  if (!next) throw DtError(Errc::invalid_state, "no further events");
  now_ = std::max(now_, *next);
  return process_event_at_now();
}

void TwinRuntime::run_until(std::int64_t deadline_ms) {
  while (state_ != State::shutdown) {
    const auto next = next_internal_event();
    if (!next || *next > deadline_ms) break;
    now_ = std::max(now_, *next);
    process_event_at_now();
  }
  if (now_ < deadline_ms) now_ = deadline_ms;
}

DispenseResult TwinRuntime::dispense() {
  if (state_ != State::dispense) {
    throw DtError(Errc::invalid_state, "twin is not in the Dispense state");
  }
  if (!pending_plan_) {
    throw DtError(Errc::no_active_plan, "no dispense cycle is in flight");
  }
  run_until(busy_until_);
  return last_dispense_;
}

void TwinRuntime::shutdown() {
  if (state_ == State::shutdown) return;
  if (state_ == State::dispense && !window_empty_cartridge_ && now_ < busy_until_) {
    // in-flight dispense is abandoned; no rolls were decremented yet
    last_dispense_ = DispenseResult{};
    last_dispense_.aborted = true;
    last_dispense_.window_ms = now_ - window_start_;
    log_event(now_, state_, "dispense_aborted", Json{{"reason", "shutdown"}});
    pending_plan_ = nullptr;
    pending_intake_ = nullptr;
    busy_until_ = now_;
  }
  shutdown_requested_ = true;
  for (const auto& t : spec_.transitions) {
    if (t.from == state_ && t.to == State::shutdown && (!t.guard || t.guard(*this))) {
      if (t.effect) t.effect(*this);
      enter_state(State::shutdown, now_);
      log_event(now_, State::shutdown, t.trigger);
      break;
    }
  }
  shutdown_requested_ = false;
  if (state_ != State::shutdown) {
    // spec without an explicit edge: force the final state anyway
    enter_state(State::shutdown, now_);
    log_event(now_, State::shutdown, "shutdown");
  }
}

}  // namespace dtwin::behavior
