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

#include "harness/harness.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "factory/factory.hpp"

namespace dtwin::harness {

namespace fs = std::filesystem;

// --- Traces --------------------------------------------------------------------

Json TraceEntry::to_json() const {
  Json j{{"id", id}, {"response_time_ms", response_time_ms}, {"status", status_code}};
  if (synthetic) j["synthetic"] = true;
  return j;
}

TraceEntry TraceEntry::from_json(const Json& j) {
  TraceEntry e;
  e.id = j.at("id").get<std::int64_t>();
  e.response_time_ms = j.at("response_time_ms").get<std::int64_t>();
  e.status_code = j.at("status").get<int>();
  e.synthetic = j.value("synthetic", false);
  return e;
}

std::vector<std::int64_t> response_time_channel(const Trace& t) {
  std::vector<std::int64_t> out;
  out.reserve(t.size());
  for (const auto& e : t) out.push_back(e.response_time_ms);
  return out;
}

std::vector<int> status_code_channel(const Trace& t) {
  std::vector<int> out;
  out.reserve(t.size());
  for (const auto& e : t) out.push_back(e.status_code);
  return out;
}

namespace {

void write_lines(const std::string& path, const std::vector<Json>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DtError(Errc::io_error, "cannot write " + path);
  for (const auto& j : lines) out << j.dump() << '\n';
}

std::vector<Json> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DtError(Errc::io_error, "cannot read " + path);
  std::vector<Json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::exception&) {
      throw DtError(Errc::parse, "malformed JSON line in " + path);
    }
  }
  return out;
}

}  // namespace

void save_trace_jsonl(const std::string& path, const Trace& trace) {
  std::vector<Json> lines;
  lines.reserve(trace.size());
  for (const auto& e : trace) lines.push_back(e.to_json());
  write_lines(path, lines);
}

Trace load_trace_jsonl(const std::string& path) {
  Trace trace;
  for (const auto& j : read_lines(path)) trace.push_back(TraceEntry::from_json(j));
  return trace;
}

void save_requests_jsonl(const std::string& path,
                         const std::vector<gateway::RequestRecord>& corpus) {
  std::vector<Json> lines;
  lines.reserve(corpus.size());
  for (const auto& r : corpus) lines.push_back(r.to_json());
  write_lines(path, lines);
}

std::vector<gateway::RequestRecord> load_requests_jsonl(const std::string& path) {
  std::vector<gateway::RequestRecord> out;
  for (const auto& j : read_lines(path)) out.push_back(gateway::RequestRecord::from_json(j));
  return out;
}

// --- Request generation ------------------------------------------------------------

void GeneratorConfig::validate() const {
  if (invalid_rate < 0.0 || invalid_rate > 1.0) {
    throw DtError(Errc::invalid_argument, "invalid_rate must lie in [0, 1]");
  }
  if (routes.empty()) {
    throw DtError(Errc::invalid_argument, "generator needs at least one route in scope");
  }
}

RequestGenerator::RequestGenerator(const model::DeviceSchema& schema, std::string serial,
                                   GeneratorConfig cfg)
    : cfg_(std::move(cfg)), serial_(std::move(serial)), rng_(cfg_.seed) {
  cfg_.validate();
  for (const auto& suffix : cfg_.routes) {
    RoutePlan plan;
    plan.route = "/devices/" + serial_ + suffix;

    const model::ClassDef* cls = &schema.require_class(schema.root_class());
    std::string rest = suffix;
    while (!rest.empty()) {
      if (rest.front() == '/') rest.erase(0, 1);
      const auto slash = rest.find('/');
      std::string seg = rest.substr(0, slash);
      rest = slash == std::string::npos ? "" : rest.substr(slash + 1);
      if (seg.empty()) continue;
      std::replace(seg.begin(), seg.end(), '-', '_');
      const auto* assoc = cls->find_association(seg);
      if (!assoc) {
        throw DtError(Errc::invalid_argument,
                      "generator route segment \"" + seg + "\" not found under " + cls->name);
      }
      cls = &schema.require_class(assoc->target);
    }
    plan.class_name = cls->name;

    for (const auto& prop : cls->properties) {
      if (prop.name == "number") continue;  // identity slot, never randomized
      PropPlan p;
      p.name = prop.name;
      p.kind = prop.kind;
      if (prop.kind == model::ValueKind::enumeration) {
        p.literals = schema.find_enum(prop.enum_name)->literals;
        p.constrainable = true;
      } else if (prop.kind == model::ValueKind::integer) {
        for (const auto* ct : schema.constraints_involving(cls->name, prop.name)) {
          const auto bounds = ct->predicate.implied_bounds(prop.name);
          if (bounds.lower && (!p.lower || *bounds.lower > *p.lower)) p.lower = bounds.lower;
          if (bounds.upper && (!p.upper || *bounds.upper < *p.upper)) p.upper = bounds.upper;
        }
        p.constrainable = p.lower.has_value() || p.upper.has_value();
      }
      plan.properties.push_back(std::move(p));
    }
    if (plan.properties.empty()) {
      throw DtError(Errc::invalid_argument,
                    "generator route " + plan.route + " has no properties to fill");
    }
    routes_.push_back(std::move(plan));
  }
}

Json RequestGenerator::draw_valid(const PropPlan& p) {
  switch (p.kind) {
    case model::ValueKind::boolean:
      return rng_.uniform_int(0, 1) == 1;
    case model::ValueKind::integer: {
      if (p.lower && p.upper) return rng_.uniform_int(*p.lower, *p.upper);
      if (p.lower) return rng_.uniform_int(*p.lower, *p.lower + 100);
      if (p.upper) return rng_.uniform_int(*p.upper - 100, *p.upper);
      return rng_.uniform_int(0, 100);
    }
    case model::ValueKind::enumeration:
      return p.literals[static_cast<std::size_t>(
          rng_.uniform_int(0, static_cast<std::int64_t>(p.literals.size()) - 1))];
    case model::ValueKind::date:
      return format_civil_date(epoch_day_ + rng_.uniform_int(-15, 15));
    case model::ValueKind::time_of_day: {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "%02d:%02d", static_cast<int>(rng_.uniform_int(0, 23)),
                    static_cast<int>(rng_.uniform_int(0, 59)));
      return std::string(buf);
    }
    case model::ValueKind::text: {
      static const std::vector<std::string> melodies = {"M1", "M2", "M3", "M4", "M5"};
      static const std::vector<std::string> types = {"dispenser", "dispenser-mini",
                                                     "dispenser-pro"};
      static const std::vector<std::string> locations = {"Oslo", "Bergen", "Trondheim",
                                                         "Stavanger"};
      static const std::vector<std::string> notes = {"", "ok", "service scheduled",
                                                     "demo unit"};
      const std::vector<std::string>* pool = nullptr;
      if (p.name == "melody") pool = &melodies;
      else if (p.name == "type") pool = &types;
      else if (p.name == "location") pool = &locations;
      else if (p.name == "note") pool = &notes;
      if (pool) {
        return (*pool)[static_cast<std::size_t>(
            rng_.uniform_int(0, static_cast<std::int64_t>(pool->size()) - 1))];
      }
      return "value-" + std::to_string(rng_.uniform_int(0, 9));
    }
  }
  return Json();
}

Json RequestGenerator::draw_invalid(const PropPlan& p) {
  if (p.kind == model::ValueKind::enumeration) return "Invalid";
  const bool below = p.lower && (!p.upper || rng_.uniform_int(0, 1) == 0);
  if (below) return *p.lower - 1 - rng_.uniform_int(0, 99);
  return *p.upper + 1 + rng_.uniform_int(0, 99);
}

gateway::RequestRecord RequestGenerator::next(std::int64_t id, std::int64_t sent_at_ms) {
  const auto& plan = routes_[static_cast<std::size_t>(
      rng_.uniform_int(0, static_cast<std::int64_t>(routes_.size()) - 1))];
  Json body = Json::object();
  for (const auto& p : plan.properties) {
    const bool invalid = p.constrainable && rng_.bernoulli(cfg_.invalid_rate);
    body[p.name] = invalid ? draw_invalid(p) : draw_valid(p);
  }
  gateway::RequestRecord req;
  req.id = id;
  req.serial = serial_;
  req.method = "POST";
  req.route = plan.route;
  req.body = std::move(body);
  req.sent_at_ms = sent_at_ms;
  return req;
}

// --- Endpoints -----------------------------------------------------------------------

gateway::ResponseRecord InProcessTwinEndpoint::send(const gateway::RequestRecord& request) {
  std::lock_guard lock(mutex_);
  return gateway::handle(mapping_, rt_, request);
}

gateway::ResponseRecord InProcessEmulatorEndpoint::send(const gateway::RequestRecord& request) {
  std::lock_guard lock(mutex_);
  gateway::RequestRecord device_request = request;
  if (const auto device_route = emu_.mapping().to_device_route(request.route)) {
    device_request.route = *device_route;
  }
  return emu_.emulate(device_request);
}

std::pair<gateway::ResponseRecord, gateway::ResponseRecord> fork_and_record(
    const gateway::RequestRecord& request, Endpoint& twin_endpoint,
    Endpoint& device_endpoint, Trace& twin_trace, Trace& device_trace) {
  const auto twin_response = twin_endpoint.send(request);
  const auto device_response = device_endpoint.send(request);
  twin_trace.push_back({request.id, twin_response.response_time_ms,
                        twin_response.status_code, twin_response.synthetic});
  device_trace.push_back({request.id, device_response.response_time_ms,
                          device_response.status_code, device_response.synthetic});
  return {twin_response, device_response};
}

// --- Runs -------------------------------------------------------------------------------

void RunPlan::validate() const {
  if (rate_per_min != 20 && rate_per_min != 30) {
    throw DtError(Errc::invalid_argument, "request rate must be 20 or 30 calls per minute");
  }
  if (allow_nonstandard) {
    if (hours <= 0) throw DtError(Errc::invalid_argument, "run duration must be positive");
    return;
  }
  const double valid[] = {1, 2, 4, 6, 8, 10};
  const bool listed = std::any_of(std::begin(valid), std::end(valid),
                                  [&](double h) { return h == hours; });
  if (!listed) {
    throw DtError(Errc::invalid_argument,
                  "run duration must be one of 1/2/4/6/8/10 hours (or pass allow_nonstandard)");
  }
  const int expected = hours <= 4 ? 30 : 20;
  if (rate_per_min != expected) {
    throw DtError(Errc::invalid_argument,
                  "rate must be 30/min for runs up to 4 h and 20/min for longer runs");
  }
}

std::int64_t RunPlan::total_requests() const {
  return static_cast<std::int64_t>(std::llround(hours * 60.0)) * rate_per_min;
}

namespace {

std::string rewrite_serial(const std::string& route, const std::string& serial) {
  // /devices/{old}/rest -> /devices/{serial}/rest
  const auto first = route.find('/', 1);
  if (first == std::string::npos) return route;
  const auto second = route.find('/', first + 1);
  const std::string head = route.substr(0, first + 1);
  const std::string tail = second == std::string::npos ? "" : route.substr(second);
  return head + serial + tail;
}

}  // namespace

RunResult run(const model::DeviceSchema& schema, const Json& filled, const RunConfig& cfg) {
  cfg.plan.validate();
  auto schema_ptr = std::make_shared<const model::DeviceSchema>(schema);

  GeneratorConfig gen_cfg;
  gen_cfg.seed = Rng::derive(cfg.seed, "generator");
  gen_cfg.invalid_rate = cfg.invalid_rate;
  if (!cfg.routes.empty()) gen_cfg.routes = cfg.routes;
  RequestGenerator generator(schema, cfg.serial, gen_cfg);

  behavior::TwinConfig twin_cfg;
  twin_cfg.epoch_civil_ms = cfg.epoch_civil_ms;
  twin_cfg.seed = Rng::derive(cfg.seed, "twin:" + cfg.serial);
  twin_cfg.acceleration = cfg.acceleration > 0 ? cfg.acceleration : 60.0;
  behavior::TwinRuntime twin(schema_ptr, factory::instantiate(schema, filled, cfg.serial),
                             behavior::BehaviorSpec::dispenser(), cfg.twin_profile, twin_cfg);
  auto mapping = gateway::generate_routes(schema, cfg.serial, cfg.vendor_prefix);

  emulator::EmulatorConfig emu_cfg = cfg.emulator;
  emu_cfg.seed = Rng::derive(cfg.seed, "emulator");
  emu_cfg.epoch_civil_ms = cfg.epoch_civil_ms;
  emu_cfg.vendor_prefix = cfg.vendor_prefix;
  emulator::EmulatorRuntime emu(schema_ptr, factory::instantiate(schema, filled, cfg.serial),
                                emu_cfg);

  InProcessTwinEndpoint twin_endpoint(mapping, twin);
  InProcessEmulatorEndpoint device_endpoint(emu);

  RunResult result;
  const std::int64_t total = cfg.plan.total_requests();
  const std::int64_t gap = cfg.plan.gap_ms();
  result.corpus.reserve(static_cast<std::size_t>(total));
  result.twin_trace.reserve(static_cast<std::size_t>(total));
  result.device_trace.reserve(static_cast<std::size_t>(total));

  const auto wall_start = std::chrono::steady_clock::now();
  for (std::int64_t k = 0; k < total; ++k) {
    const std::int64_t t = k * gap;
    if (cfg.acceleration > 0) {
      const auto due = wall_start + std::chrono::milliseconds(
                                        static_cast<std::int64_t>(t / cfg.acceleration));
      std::this_thread::sleep_until(due);
    }
    auto request = generator.next(k, t);
    fork_and_record(request, twin_endpoint, device_endpoint, result.twin_trace,
                    result.device_trace);
    result.corpus.push_back(std::move(request));
  }

  result.twin_events_jsonl = twin.event_log_jsonl();
  result.device_events_jsonl = emu.runtime().event_log_jsonl();
  result.meta = Json{{"hours", cfg.plan.hours},
                     {"rate", cfg.plan.rate_per_min},
                     {"records", total},
                     {"seed", cfg.seed},
                     {"serial", cfg.serial},
                     {"invalid_rate", cfg.invalid_rate},
                     {"routes", gen_cfg.routes},
                     {"acceleration", cfg.acceleration},
                     {"quirk_rate", emu_cfg.quirk_rate},
                     {"epoch", format_civil_datetime(cfg.epoch_civil_ms)}};
  return result;
}

BatchResult run_batches(const model::DeviceSchema& schema, const Json& filled,
                        const std::vector<gateway::RequestRecord>& corpus,
                        const BatchConfig& cfg) {
  if (corpus.empty()) {
    throw DtError(Errc::invalid_argument, "batch mode needs a non-empty corpus");
  }
  auto schema_ptr = std::make_shared<const model::DeviceSchema>(schema);
  const std::string corpus_serial = corpus.front().serial;

  BatchResult result;

  {
    emulator::EmulatorConfig emu_cfg = cfg.emulator;
    emu_cfg.seed = Rng::derive(cfg.seed, "emulator");
    emu_cfg.epoch_civil_ms = cfg.epoch_civil_ms;
    emu_cfg.vendor_prefix = cfg.vendor_prefix;
    emulator::EmulatorRuntime emu(schema_ptr,
                                  factory::instantiate(schema, filled, corpus_serial), emu_cfg);
    InProcessEmulatorEndpoint endpoint(emu);
    result.device_trace.reserve(corpus.size());
    for (const auto& request : corpus) {
      const auto response = endpoint.send(request);
      result.device_trace.push_back(
          {request.id, response.response_time_ms, response.status_code, response.synthetic});
    }
  }

  const unsigned workers =
      cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());

  for (const int size : cfg.sizes) {
    if (size <= 0) throw DtError(Errc::invalid_argument, "fleet sizes must be positive");
    BatchResult::SizeRun size_run;
    size_run.size = size;
    size_run.twin_traces.resize(static_cast<std::size_t>(size));

    const auto serials = factory::derive_serials(size);
    std::atomic<std::size_t> cursor{0};
    auto worker = [&]() {
      while (true) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= serials.size()) break;
        const std::string& serial = serials[i];
        behavior::TwinConfig twin_cfg;
        twin_cfg.epoch_civil_ms = cfg.epoch_civil_ms;
        twin_cfg.seed = Rng::derive(cfg.seed, "twin:" + serial);
        behavior::TwinRuntime twin(schema_ptr, factory::instantiate(schema, filled, serial),
                                   behavior::BehaviorSpec::dispenser(), cfg.twin_profile,
                                   twin_cfg);
        auto mapping = gateway::generate_routes(schema, serial, cfg.vendor_prefix);
        Trace trace;
        trace.reserve(corpus.size());
        for (const auto& original : corpus) {
          gateway::RequestRecord request = original;
          request.serial = serial;
          request.route = rewrite_serial(original.route, serial);
          const auto response = gateway::handle(mapping, twin, request);
          trace.push_back(
              {request.id, response.response_time_ms, response.status_code, false});
        }
        size_run.twin_traces[i] = std::move(trace);
      }
    };
    std::vector<std::thread> pool;
    const unsigned n_threads = std::min<unsigned>(workers, static_cast<unsigned>(size));
    pool.reserve(n_threads);
    for (unsigned w = 0; w < n_threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    result.sizes.push_back(std::move(size_run));
  }

  Json sizes = Json::array();
  for (const int s : cfg.sizes) sizes.push_back(s);
  result.meta = Json{{"seed", cfg.seed},
                     {"sizes", sizes},
                     {"corpus_records", corpus.size()},
                     {"epoch", format_civil_datetime(cfg.epoch_civil_ms)}};
  return result;
}

// --- Artifact layout ---------------------------------------------------------------------

void write_run_dir(const std::string& dir, const RunResult& result) {
  fs::create_directories(dir);
  save_requests_jsonl(dir + "/requests.jsonl", result.corpus);
  save_trace_jsonl(dir + "/twin.jsonl", result.twin_trace);
  save_trace_jsonl(dir + "/emulator.jsonl", result.device_trace);
  std::ofstream meta(dir + "/run_meta.json", std::ios::binary);
  if (!meta) throw DtError(Errc::io_error, "cannot write " + dir + "/run_meta.json");
  meta << result.meta.dump(2) << '\n';
  std::ofstream twin_events(dir + "/twin_events.jsonl", std::ios::binary);
  twin_events << result.twin_events_jsonl;
  std::ofstream device_events(dir + "/emulator_events.jsonl", std::ios::binary);
  device_events << result.device_events_jsonl;
}

Json experiment_input(const model::DeviceSchema& schema, int intake_step_min) {
  if (intake_step_min < 1 || intake_step_min > 24 * 60) {
    throw DtError(Errc::invalid_argument, "intake step must lie in [1, 1440] minutes");
  }
  Json input = factory::generate_template(schema);
  Json& device = input.at("device");
  Json intakes = Json::array();
  for (int minute = 2; minute < 24 * 60; minute += intake_step_min) {
    char hhmm[8];
    std::snprintf(hhmm, sizeof(hhmm), "%02d:%02d", minute / 60, minute % 60);
    intakes.push_back(Json{
        {"time", hhmm},
        {"medicine_lines",
         Json::array({Json{{"doses", 2}, {"current_roll", 5000}, {"next_roll", 0}}})}});
  }
  device["medication_plans"] = Json::array({Json{{"first_dose_date", "2023-01-01"},
                                                 {"period_days", 1},
                                                 {"intake_times", intakes}}});
  return input;
}

void write_batch_dir(const std::string& dir, const BatchResult& result) {
  fs::create_directories(dir);
  save_trace_jsonl(dir + "/emulator.jsonl", result.device_trace);
  for (const auto& size_run : result.sizes) {
    char sub[32];
    std::snprintf(sub, sizeof(sub), "size_%03d", size_run.size);
    const std::string size_dir = dir + "/" + sub;
    fs::create_directories(size_dir);
    for (std::size_t i = 0; i < size_run.twin_traces.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "twin_%03zu.jsonl", i + 1);
      save_trace_jsonl(size_dir + "/" + name, size_run.twin_traces[i]);
    }
  }
  std::ofstream meta(dir + "/batch_meta.json", std::ios::binary);
  if (!meta) throw DtError(Errc::io_error, "cannot write " + dir + "/batch_meta.json");
  meta << result.meta.dump(2) << '\n';
}

}  // namespace dtwin::harness
