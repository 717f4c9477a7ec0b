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

#include "dtwin/dtwin.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "factory/factory.hpp"
#include "fidelity/report.hpp"
#include "gateway/server.hpp"
#include "harness/harness.hpp"

using namespace dtwin;

struct dtwin_schema {
  model::DeviceSchema impl;
};

struct dtwin_instance {
  model::DeviceInstance impl;
};

struct dtwin_fleet {
  factory::FleetResult impl;
};

struct dtwin_server {
  std::unique_ptr<gateway::TwinServer> impl;
};

namespace {

thread_local std::string g_last_error;

dtwin_status status_of(Errc code) {
  switch (code) {
    case Errc::ok: return DTWIN_OK;
    case Errc::parse: return DTWIN_E_PARSE;
    case Errc::unknown_class: return DTWIN_E_UNKNOWN_CLASS;
    case Errc::unknown_property: return DTWIN_E_UNKNOWN_PROPERTY;
    case Errc::structural_mismatch: return DTWIN_E_STRUCTURAL;
    case Errc::constraint_violation: return DTWIN_E_CONSTRAINT;
    case Errc::multiplicity: return DTWIN_E_MULTIPLICITY;
    case Errc::duplicate_serial: return DTWIN_E_DUPLICATE_SERIAL;
    case Errc::empty_log: return DTWIN_E_EMPTY_LOG;
    case Errc::malformed_record: return DTWIN_E_MALFORMED_RECORD;
    case Errc::empty_trace: return DTWIN_E_EMPTY_TRACE;
    case Errc::too_few_pairs: return DTWIN_E_TOO_FEW_PAIRS;
    case Errc::route_not_found: return DTWIN_E_ROUTE;
    case Errc::bind_failure: return DTWIN_E_BIND;
    case Errc::device_unreachable: return DTWIN_E_UNREACHABLE;
    case Errc::no_active_plan: return DTWIN_E_NO_ACTIVE_PLAN;
    case Errc::action_failure: return DTWIN_E_ACTION;
    case Errc::invalid_state: return DTWIN_E_STATE;
    case Errc::invalid_argument: return DTWIN_E_INVALID_ARG;
    case Errc::io_error: return DTWIN_E_IO;
    case Errc::internal: return DTWIN_E_INTERNAL;
  }
  return DTWIN_E_INTERNAL;
}

template <typename Fn>
dtwin_status guarded(Fn&& fn) {
  try {
    fn();
    return DTWIN_OK;
  } catch (const DtError& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const Json::exception& e) {
    g_last_error = e.what();
    return DTWIN_E_PARSE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DTWIN_E_INTERNAL;
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

Json parse_json(const char* text, const char* what) {
  if (!text) throw DtError(Errc::invalid_argument, std::string(what) + " must not be null");
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw DtError(Errc::parse, std::string(what) + " is not valid JSON");
  }
  return j;
}

void require(bool ok, const char* what) {
  if (!ok) throw DtError(Errc::invalid_argument, what);
}

harness::RunConfig run_config_from_json(const Json& j) {
  harness::RunConfig cfg;
  cfg.plan.hours = j.value("hours", cfg.plan.hours);
  cfg.plan.rate_per_min = j.value("rate", cfg.plan.rate_per_min);
  cfg.plan.allow_nonstandard = j.value("allow_nonstandard", cfg.plan.allow_nonstandard);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.serial = j.value("serial", cfg.serial);
  cfg.vendor_prefix = j.value("vendor_prefix", cfg.vendor_prefix);
  cfg.invalid_rate = j.value("invalid_rate", cfg.invalid_rate);
  if (j.contains("routes")) cfg.routes = j.at("routes").get<std::vector<std::string>>();
  cfg.acceleration = j.value("acceleration", cfg.acceleration);
  if (j.contains("epoch")) {
    const auto epoch = parse_civil_datetime(j.at("epoch").get<std::string>());
    if (!epoch) throw DtError(Errc::parse, "bad epoch datetime");
    cfg.epoch_civil_ms = *epoch;
  }
  if (j.contains("twin_profile")) {
    cfg.twin_profile = behavior::DelayProfile::from_json(j.at("twin_profile"));
  }
  if (j.contains("emulator")) {
    cfg.emulator = emulator::EmulatorConfig::from_json(j.at("emulator"));
  }
  cfg.emulator.quirk_rate = j.value("quirk_rate", cfg.emulator.quirk_rate);
  cfg.emulator.dispense_busy_ms = j.value("dispense_busy_ms", cfg.emulator.dispense_busy_ms);
  return cfg;
}

fidelity::AlignmentConfig alignment_config_from_json(const char* config_json) {
  fidelity::AlignmentConfig cfg;
  if (!config_json) return cfg;
  const Json j = parse_json(config_json, "alignment config");
  cfg.tolerance_ms = j.value("tolerance_ms", cfg.tolerance_ms);
  cfg.match_score = j.value("match_score", cfg.match_score);
  cfg.mismatch_penalty = j.value("mismatch_penalty", cfg.mismatch_penalty);
  cfg.gap_penalty = j.value("gap_penalty", cfg.gap_penalty);
  cfg.validate();
  return cfg;
}

}  // namespace

extern "C" {

const char* dtwin_last_error(void) { return g_last_error.c_str(); }

void dtwin_string_free(char* s) { std::free(s); }

// ---- schema ----

dtwin_status dtwin_schema_builtin(dtwin_schema** out) {
  return guarded([&] {
    require(out != nullptr, "out must not be null");
    *out = new dtwin_schema{model::builtin_dispenser_schema()};
  });
}

dtwin_status dtwin_schema_from_json(const char* json, dtwin_schema** out) {
  return guarded([&] {
    require(out != nullptr, "out must not be null");
    *out = new dtwin_schema{model::DeviceSchema::from_json(parse_json(json, "schema json"))};
  });
}

dtwin_status dtwin_schema_to_json(const dtwin_schema* schema, char** out_json) {
  return guarded([&] {
    require(schema && out_json, "schema and out_json must not be null");
    *out_json = copy_string(schema->impl.to_json().dump(2));
  });
}

void dtwin_schema_free(dtwin_schema* schema) { delete schema; }

dtwin_status dtwin_validate_value(const dtwin_schema* schema, const char* cls,
                                  const char* prop, const char* value_json,
                                  char** out_result_json) {
  return guarded([&] {
    require(schema && cls && prop && out_result_json, "arguments must not be null");
    const auto result =
        model::validate_value(schema->impl, cls, prop, parse_json(value_json, "value"));
    *out_result_json = copy_string(result.to_json().dump());
  });
}

// ---- templates and instances ----

dtwin_status dtwin_template_generate(const dtwin_schema* schema, char** out_json) {
  return guarded([&] {
    require(schema && out_json, "schema and out_json must not be null");
    *out_json = copy_string(factory::generate_template(schema->impl).dump(2));
  });
}

dtwin_status dtwin_template_doc(const dtwin_schema* schema, char** out_json) {
  return guarded([&] {
    require(schema && out_json, "schema and out_json must not be null");
    *out_json = copy_string(factory::template_doc(schema->impl).dump(2));
  });
}

dtwin_status dtwin_experiment_input(const dtwin_schema* schema, int intake_step_min,
                                    char** out_json) {
  return guarded([&] {
    require(schema && out_json, "schema and out_json must not be null");
    *out_json = copy_string(harness::experiment_input(schema->impl, intake_step_min).dump(2));
  });
}

dtwin_status dtwin_instance_create(const dtwin_schema* schema, const char* filled_json,
                                   const char* serial, dtwin_instance** out) {
  return guarded([&] {
    require(schema && serial && out, "arguments must not be null");
    *out = new dtwin_instance{
        factory::instantiate(schema->impl, parse_json(filled_json, "filled input"), serial)};
  });
}

dtwin_status dtwin_instance_to_json(const dtwin_instance* instance, char** out_json) {
  return guarded([&] {
    require(instance && out_json, "instance and out_json must not be null");
    *out_json = copy_string(instance->impl.dump());
  });
}

dtwin_status dtwin_instance_validate(const dtwin_schema* schema,
                                     const dtwin_instance* instance, char** out_result_json) {
  return guarded([&] {
    require(schema && instance && out_result_json, "arguments must not be null");
    *out_result_json =
        copy_string(model::validate_instance(schema->impl, instance->impl).to_json().dump());
  });
}

void dtwin_instance_free(dtwin_instance* instance) { delete instance; }

// ---- fleets ----

dtwin_status dtwin_fleet_create(const dtwin_schema* schema, const char* filled_json,
                                const char* const* serials, size_t count, dtwin_fleet** out) {
  return guarded([&] {
    require(schema && out, "schema and out must not be null");
    std::vector<std::string> serial_list;
    if (serials) {
      serial_list.reserve(count);
      for (size_t i = 0; i < count; ++i) {
        require(serials[i] != nullptr, "serials must not contain null");
        serial_list.emplace_back(serials[i]);
      }
    } else {
      serial_list = factory::derive_serials(static_cast<int>(count));
    }
    *out = new dtwin_fleet{factory::create_fleet(
        schema->impl, parse_json(filled_json, "filled input"), serial_list)};
  });
}

dtwin_status dtwin_fleet_size(const dtwin_fleet* fleet, size_t* out) {
  return guarded([&] {
    require(fleet && out, "fleet and out must not be null");
    *out = fleet->impl.instances.size();
  });
}

dtwin_status dtwin_fleet_elapsed_ms(const dtwin_fleet* fleet, double* out) {
  return guarded([&] {
    require(fleet && out, "fleet and out must not be null");
    *out = fleet->impl.elapsed_ms;
  });
}

dtwin_status dtwin_fleet_instance_json(const dtwin_fleet* fleet, size_t index,
                                       char** out_json) {
  return guarded([&] {
    require(fleet && out_json, "fleet and out_json must not be null");
    require(index < fleet->impl.instances.size(), "fleet index out of range");
    *out_json = copy_string(fleet->impl.instances[index].dump());
  });
}

void dtwin_fleet_free(dtwin_fleet* fleet) { delete fleet; }

// ---- server ----

dtwin_status dtwin_server_start(const dtwin_schema* schema, const char* config_json,
                                dtwin_server** out) {
  return guarded([&] {
    require(schema && out, "schema and out must not be null");
    const Json j = parse_json(config_json, "server config");
    auto server_cfg = gateway::ServerConfig::from_json(j);
    auto schema_ptr = std::make_shared<const model::DeviceSchema>(schema->impl);
    auto server = std::make_unique<gateway::TwinServer>(schema_ptr, server_cfg);

    const Json filled = j.value("filled", Json());
    require(!filled.is_null(), "server config needs a \"filled\" input object");
    std::vector<std::string> serials = {"100"};
    if (j.contains("serials")) serials = j.at("serials").get<std::vector<std::string>>();
    const auto seed = j.value("seed", std::uint64_t{42});
    const bool with_emulator = j.value("with_emulator", false);
    const bool with_twins = j.value("with_twins", true);
    require(with_twins || with_emulator, "server config disables both twins and emulator");

    std::int64_t epoch = 1'672'560'000'000;
    if (j.contains("epoch")) {
      const auto parsed = parse_civil_datetime(j.at("epoch").get<std::string>());
      if (!parsed) throw DtError(Errc::parse, "bad epoch datetime");
      epoch = *parsed;
    }

    for (const auto& serial : serials) {
      if (with_twins) {
        behavior::TwinConfig twin_cfg;
        twin_cfg.epoch_civil_ms = epoch;
        twin_cfg.acceleration = server_cfg.acceleration;
        twin_cfg.seed = Rng::derive(seed, "twin:" + serial);
        auto twin = std::make_unique<behavior::TwinRuntime>(
            schema_ptr, factory::instantiate(schema->impl, filled, serial),
            behavior::BehaviorSpec::dispenser(),
            j.contains("twin_profile")
                ? behavior::DelayProfile::from_json(j.at("twin_profile"))
                : behavior::DelayProfile::dispenser_default(),
            twin_cfg);
        server->add_twin(std::move(twin));
      }
      if (with_emulator) {
        emulator::EmulatorConfig emu_cfg =
            j.contains("emulator") ? emulator::EmulatorConfig::from_json(j.at("emulator"))
                                   : emulator::EmulatorConfig{};
        emu_cfg.vendor_prefix = server_cfg.vendor_prefix;
        emu_cfg.epoch_civil_ms = epoch;
        emu_cfg.seed = Rng::derive(seed, "emulator:" + serial);
        server->add_emulated_device(std::make_unique<emulator::EmulatorRuntime>(
            schema_ptr, factory::instantiate(schema->impl, filled, serial), emu_cfg));
      }
    }
    server->start();
    *out = new dtwin_server{std::move(server)};
  });
}

dtwin_status dtwin_server_port(const dtwin_server* server, int* out_port) {
  return guarded([&] {
    require(server && out_port, "server and out_port must not be null");
    *out_port = server->impl->port();
  });
}

dtwin_status dtwin_server_shutdown_twin(dtwin_server* server, const char* serial) {
  return guarded([&] {
    require(server && serial, "server and serial must not be null");
    server->impl->shutdown_twin(serial);
  });
}

dtwin_status dtwin_server_stop(dtwin_server* server) {
  return guarded([&] {
    require(server != nullptr, "server must not be null");
    server->impl->stop();
  });
}

void dtwin_server_free(dtwin_server* server) { delete server; }

// ---- experiments ----

dtwin_status dtwin_run_experiment(const dtwin_schema* schema, const char* filled_json,
                                  const char* config_json, const char* out_dir,
                                  char** out_meta_json) {
  return guarded([&] {
    require(schema && out_dir, "schema and out_dir must not be null");
    const auto cfg = run_config_from_json(
        config_json ? parse_json(config_json, "run config") : Json::object());
    const Json filled = filled_json ? parse_json(filled_json, "filled input")
                                    : harness::experiment_input(schema->impl);
    auto result = harness::run(schema->impl, filled, cfg);
    harness::write_run_dir(out_dir, result);
    if (out_meta_json) *out_meta_json = copy_string(result.meta.dump(2));
  });
}

dtwin_status dtwin_run_batches(const dtwin_schema* schema, const char* filled_json,
                               const char* corpus_path, const char* config_json,
                               const char* out_dir, char** out_meta_json) {
  return guarded([&] {
    require(schema && corpus_path && out_dir, "schema, corpus_path and out_dir are required");
    const Json j = config_json ? parse_json(config_json, "batch config") : Json::object();
    harness::BatchConfig cfg;
    if (j.contains("sizes")) cfg.sizes = j.at("sizes").get<std::vector<int>>();
    cfg.seed = j.value("seed", cfg.seed);
    cfg.vendor_prefix = j.value("vendor_prefix", cfg.vendor_prefix);
    cfg.threads = j.value("threads", cfg.threads);
    if (j.contains("epoch")) {
      const auto parsed = parse_civil_datetime(j.at("epoch").get<std::string>());
      if (!parsed) throw DtError(Errc::parse, "bad epoch datetime");
      cfg.epoch_civil_ms = *parsed;
    }
    if (j.contains("emulator")) {
      cfg.emulator = emulator::EmulatorConfig::from_json(j.at("emulator"));
    }
    cfg.emulator.quirk_rate = j.value("quirk_rate", cfg.emulator.quirk_rate);
    cfg.emulator.dispense_busy_ms = j.value("dispense_busy_ms", cfg.emulator.dispense_busy_ms);
    const Json filled = filled_json ? parse_json(filled_json, "filled input")
                                    : harness::experiment_input(schema->impl);
    const auto corpus = harness::load_requests_jsonl(corpus_path);
    auto result = harness::run_batches(schema->impl, filled, corpus, cfg);
    harness::write_batch_dir(out_dir, result);
    if (out_meta_json) *out_meta_json = copy_string(result.meta.dump(2));
  });
}

// ---- fidelity ----

dtwin_status dtwin_fidelity_report(const char* const* run_dirs, size_t run_count,
                                   const char* batch_dir, const char* config_json,
                                   const char* out_dir, char** out_report_json) {
  return guarded([&] {
    require(out_dir != nullptr, "out_dir must not be null");
    std::vector<std::string> dirs;
    for (size_t i = 0; i < run_count; ++i) {
      require(run_dirs && run_dirs[i], "run_dirs must not contain null");
      dirs.emplace_back(run_dirs[i]);
    }
    const auto report = fidelity::report_from_dirs(
        dirs, batch_dir ? batch_dir : "", out_dir, alignment_config_from_json(config_json));
    if (out_report_json) *out_report_json = copy_string(report.to_json().dump(2));
  });
}

dtwin_status dtwin_align_similarity(const char* a_json, const char* b_json,
                                    const char* config_json, int categorical,
                                    double* out_pct) {
  return guarded([&] {
    require(out_pct != nullptr, "out_pct must not be null");
    const auto cfg = alignment_config_from_json(config_json);
    const Json a = parse_json(a_json, "trace a");
    const Json b = parse_json(b_json, "trace b");
    require(a.is_array() && b.is_array(), "traces must be JSON arrays");
    if (categorical) {
      const auto va = a.get<std::vector<int>>();
      const auto vb = b.get<std::vector<int>>();
      *out_pct = fidelity::align_similarity_categorical(va, vb, cfg);
    } else {
      const auto va = a.get<std::vector<std::int64_t>>();
      const auto vb = b.get<std::vector<std::int64_t>>();
      *out_pct = fidelity::align_similarity_numeric(va, vb, cfg);
    }
  });
}

dtwin_status dtwin_wilcoxon(const double* a, const double* b, size_t n, double* out_p) {
  return guarded([&] {
    require(a && b && out_p, "arguments must not be null");
    *out_p = fidelity::wilcoxon_signed_rank({a, n}, {b, n}).p_value;
  });
}

dtwin_status dtwin_fisher(int64_t a, int64_t b, int64_t c, int64_t d, double* out_p) {
  return guarded([&] {
    require(out_p != nullptr, "out_p must not be null");
    *out_p = fidelity::fisher_exact({{{a, b}, {c, d}}}).p_value;
  });
}

// ---- synchronization ----

dtwin_status dtwin_profile_from_log_file(const char* path, char** out_profile_json) {
  return guarded([&] {
    require(path && out_profile_json, "path and out_profile_json must not be null");
    *out_profile_json =
        copy_string(behavior::synchronize_from_log_file(path).to_json().dump(2));
  });
}

}  // extern "C"
