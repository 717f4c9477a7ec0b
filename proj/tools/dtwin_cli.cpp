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

// dtwin command line: schema export, input templates, fleets, the DT
// communication server, the reference device emulator, fidelity experiment
// runs and reports. Everything goes through the libdtwin C API.

#include <dtwin/dtwin.h>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace {

using Json = nlohmann::json;
namespace fs = std::filesystem;

volatile std::sig_atomic_t g_stop = 0;
void handle_signal(int) { g_stop = 1; }

struct CliError {
  int exit_code;
  std::string message;
};

[[noreturn]] void fail(dtwin_status status, const std::string& context) {
  const Json err{{"error", {{"context", context},
                            {"status", static_cast<int>(status)},
                            {"message", dtwin_last_error()}}}};
  throw CliError{1, err.dump()};
}

void check(dtwin_status status, const std::string& context) {
  if (status != DTWIN_OK) fail(status, context);
}

std::string take_string(char* owned) {
  std::string out = owned ? owned : "";
  dtwin_string_free(owned);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CliError{1, Json{{"error", {{"message", "cannot read " + path}}}}.dump()};
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  if (path.find('/') != std::string::npos) {
    fs::create_directories(fs::path(path).parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw CliError{1, Json{{"error", {{"message", "cannot write " + path}}}}.dump()};
  }
  out << content;
}

struct Schema {
  dtwin_schema* ptr = nullptr;
  ~Schema() { dtwin_schema_free(ptr); }
};

// --schema overrides the builtin dispenser domain model
void load_schema(Schema& schema, const std::string& schema_path) {
  if (schema_path.empty()) {
    check(dtwin_schema_builtin(&schema.ptr), "loading builtin schema");
  } else {
    check(dtwin_schema_from_json(read_file(schema_path).c_str(), &schema.ptr),
          "loading schema from " + schema_path);
  }
}

// filled device input: explicit file, or the dense experiment schedule
std::string load_input(const Schema& schema, const std::string& input_path,
                       int intake_step_min) {
  if (!input_path.empty()) return read_file(input_path);
  char* owned = nullptr;
  check(dtwin_experiment_input(schema.ptr, intake_step_min, &owned), "building experiment input");
  return take_string(owned);
}

std::vector<std::string> resolve_serials(const std::vector<std::string>& serials, int count) {
  if (!serials.empty()) return serials;
  std::vector<std::string> out;
  for (int i = 1; i <= count; ++i) out.push_back(std::to_string(i));
  return out;
}

void serve_until_signal(const Schema& schema, const Json& config) {
  dtwin_server* server = nullptr;
  check(dtwin_server_start(schema.ptr, config.dump().c_str(), &server), "starting server");
  int port = 0;
  dtwin_server_port(server, &port);
  std::printf("listening on http://%s:%d (Ctrl-C to stop)\n",
              config.value("bind", std::string("127.0.0.1")).c_str(), port);
  std::fflush(stdout);
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }
  dtwin_server_stop(server);
  dtwin_server_free(server);
  std::printf("stopped\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"digital twins of smart medicine dispensers"};
  app.require_subcommand(1);

  std::string schema_path;
  app.add_option("--schema", schema_path, "schema JSON (defaults to the builtin model)")
      ->envname("DTW_SCHEMA");

  // --- schema ---
  auto* cmd_schema = app.add_subcommand("schema", "export the domain model as JSON");
  std::string schema_out = "-";
  cmd_schema->add_option("--out", schema_out, "output file ('-' for stdout)");

  // --- template ---
  auto* cmd_template = app.add_subcommand("template", "generate the JSON input template");
  std::string template_out = "template.json";
  std::string template_doc_out;
  cmd_template->add_option("--out", template_out, "template file");
  cmd_template->add_option("--doc-out", template_doc_out,
                           "sidecar with types/ranges (default: <out>.doc.json)");

  // --- fleet ---
  auto* cmd_fleet = app.add_subcommand("fleet", "materialize N uniquely serialized twins");
  std::string fleet_input, fleet_out = "fleet";
  int fleet_count = 100;
  std::vector<std::string> fleet_serials;
  cmd_fleet->add_option("--input", fleet_input, "filled input template")->required();
  cmd_fleet->add_option("--count", fleet_count, "fleet size (serials 1..N)");
  cmd_fleet->add_option("--serials", fleet_serials, "explicit serial numbers")->delimiter(',');
  cmd_fleet->add_option("--out", fleet_out, "output directory");

  // --- serve / emulate ---
  std::string bind = "127.0.0.1";
  int port = 8080;
  double acceleration = 60.0;
  std::string vendor_prefix = "karie";
  std::string device_upstream;
  std::string serve_input;
  std::string server_config_path;
  int serve_count = 1;
  std::vector<std::string> serve_serials;
  bool with_emulator = false;
  bool no_latency = false;
  std::uint64_t seed = 42;

  auto add_server_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", server_config_path,
                    "server config JSON ({bind, port, acceleration, vendor_route_prefix, "
                    "device_upstream}); flags override");
    cmd->add_option("--input", serve_input, "filled input template (default: experiment input)");
    cmd->add_option("--bind", bind, "bind address")->envname("DTW_BIND");
    cmd->add_option("--port", port, "port (0 picks a free one)")->envname("DTW_PORT");
    cmd->add_option("--acceleration", acceleration, "virtual seconds per wall second")
        ->envname("DTW_ACCELERATION");
    cmd->add_option("--vendor-prefix", vendor_prefix, "vendor route prefix");
    cmd->add_option("--count", serve_count, "host serials 1..N");
    cmd->add_option("--serials", serve_serials, "explicit serials")->delimiter(',');
    cmd->add_option("--seed", seed, "master seed")->envname("DTW_SEED");
    cmd->add_flag("--no-latency", no_latency, "do not delay HTTP replies");
  };

  auto* cmd_serve = app.add_subcommand("serve", "run the DT communication server");
  add_server_options(cmd_serve);
  cmd_serve->add_flag("--with-emulator", with_emulator,
                      "co-host emulated devices on the vendor routes");
  cmd_serve->add_option("--device-upstream", device_upstream,
                        "forward accepted writes to this physical-device base URL");

  auto* cmd_emulate = app.add_subcommand("emulate", "run the reference device emulator");
  add_server_options(cmd_emulate);
  double quirk_rate = 0.08;
  std::int64_t dispense_busy_ms = 96'000;
  cmd_emulate->add_option("--quirk-rate", quirk_rate,
                          "probability of partially accepting a mixed body");
  cmd_emulate->add_option("--dispense-busy-ms", dispense_busy_ms,
                          "busy window while dispensing");

  // --- run ---
  auto* cmd_run = app.add_subcommand("run", "seeded fidelity run (twin vs emulated device)");
  double hours = 1.0;
  int rate = 30;
  double invalid_rate = 0.2;
  std::string run_out = "runs/run";
  std::string run_input;
  int intake_step_min = 4;
  bool allow_nonstandard = false;
  double run_acceleration = 60.0;
  double run_quirk = 0.08;
  cmd_run->add_option("--hours", hours, "virtual duration (1/2/4/6/8/10)");
  cmd_run->add_option("--rate", rate, "requests per minute (30 up to 4h, 20 beyond)");
  cmd_run->add_option("--seed", seed, "master seed")->envname("DTW_SEED");
  cmd_run->add_option("--invalid-rate", invalid_rate, "per-property invalid probability");
  cmd_run->add_option("--out", run_out, "output directory")->required();
  cmd_run->add_option("--input", run_input, "filled input (default: experiment input)");
  cmd_run->add_option("--intake-step-min", intake_step_min,
                      "experiment schedule density (minutes between intakes)");
  cmd_run->add_option("--acceleration", run_acceleration,
                      "wall pacing factor; 0 runs unpaced")->envname("DTW_ACCELERATION");
  cmd_run->add_option("--quirk-rate", run_quirk, "emulated device partial-acceptance rate");
  cmd_run->add_flag("--allow-nonstandard", allow_nonstandard,
                    "permit durations outside the standard set");

  // --- batch ---
  auto* cmd_batch = app.add_subcommand("batch", "replay a corpus against twin fleets");
  std::string corpus_path;
  std::string batch_out = "runs/batches";
  std::string batch_input;
  std::vector<int> sizes = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  cmd_batch->add_option("--corpus", corpus_path, "requests.jsonl from a run")->required();
  cmd_batch->add_option("--sizes", sizes, "fleet sizes")->delimiter(',');
  cmd_batch->add_option("--seed", seed, "master seed")->envname("DTW_SEED");
  cmd_batch->add_option("--out", batch_out, "output directory")->required();
  cmd_batch->add_option("--input", batch_input, "filled input (default: experiment input)");
  cmd_batch->add_option("--intake-step-min", intake_step_min, "experiment schedule density");

  // --- fidelity ---
  auto* cmd_fidelity = app.add_subcommand("fidelity", "similarity report over recorded runs");
  std::vector<std::string> pair_dirs;
  std::string batches_dir;
  std::string report_out = "report";
  std::int64_t tolerance_ms = 1'000;
  cmd_fidelity->add_option("--pairs", pair_dirs, "run directories with twin/emulator traces")
      ->required()
      ->delimiter(',');
  cmd_fidelity->add_option("--batches", batches_dir, "batch directory");
  cmd_fidelity->add_option("--tolerance-ms", tolerance_ms,
                           "response-time match tolerance");
  cmd_fidelity->add_option("--out", report_out, "report output directory");

  // --- sync ---
  auto* cmd_sync = app.add_subcommand("sync",
                                      "delay profile from a device execution log");
  std::string sync_log, sync_out = "-";
  cmd_sync->add_option("--log", sync_log, "execution log (JSONL)")->required();
  cmd_sync->add_option("--out", sync_out, "profile file ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    Schema schema;
    load_schema(schema, schema_path);

    if (*cmd_schema) {
      char* out = nullptr;
      check(dtwin_schema_to_json(schema.ptr, &out), "exporting schema");
      const std::string text = take_string(out) + "\n";
      if (schema_out == "-") {
        std::fputs(text.c_str(), stdout);
      } else {
        write_file(schema_out, text);
        std::printf("schema written to %s\n", schema_out.c_str());
      }
    }

    if (*cmd_template) {
      char* tmpl = nullptr;
      check(dtwin_template_generate(schema.ptr, &tmpl), "generating template");
      write_file(template_out, take_string(tmpl) + "\n");
      char* doc = nullptr;
      check(dtwin_template_doc(schema.ptr, &doc), "generating template doc");
      std::string doc_path = template_doc_out;
      if (doc_path.empty()) {
        doc_path = template_out;
        const auto dot = doc_path.rfind(".json");
        doc_path = (dot == std::string::npos ? doc_path : doc_path.substr(0, dot)) +
                   ".doc.json";
      }
      write_file(doc_path, take_string(doc) + "\n");
      std::printf("template written to %s (doc: %s)\n", template_out.c_str(),
                  doc_path.c_str());
    }

    if (*cmd_fleet) {
      const std::string filled = read_file(fleet_input);
      const auto serials = resolve_serials(fleet_serials, fleet_count);
      std::vector<const char*> serial_ptrs;
      for (const auto& s : serials) serial_ptrs.push_back(s.c_str());
      dtwin_fleet* fleet = nullptr;
      check(dtwin_fleet_create(schema.ptr, filled.c_str(), serial_ptrs.data(),
                               serial_ptrs.size(), &fleet),
            "creating fleet");
      double elapsed = 0.0;
      dtwin_fleet_elapsed_ms(fleet, &elapsed);
      fs::create_directories(fleet_out);
      for (std::size_t i = 0; i < serials.size(); ++i) {
        char* dump = nullptr;
        check(dtwin_fleet_instance_json(fleet, i, &dump), "serializing instance");
        write_file(fleet_out + "/" + serials[i] + ".json", take_string(dump) + "\n");
      }
      write_file(fleet_out + "/fleet_meta.json",
                 Json{{"count", serials.size()}, {"creation_ms", elapsed}}.dump(2) + "\n");
      dtwin_fleet_free(fleet);
      std::printf("created %zu twins in %.2f ms -> %s/\n", serials.size(), elapsed,
                  fleet_out.c_str());
    }

    if (*cmd_serve || *cmd_emulate) {
      const bool emulator_only = static_cast<bool>(*cmd_emulate);
      const auto* cmd = emulator_only ? cmd_emulate : cmd_serve;
      Json config = Json::object();
      if (!server_config_path.empty()) config = Json::parse(read_file(server_config_path));
      auto set_unless_file = [&](const char* key, const Json& value, const char* flag) {
        if (cmd->count(flag) > 0 || !config.contains(key)) config[key] = value;
      };
      set_unless_file("bind", bind, "--bind");
      set_unless_file("port", port, "--port");
      set_unless_file("acceleration", acceleration, "--acceleration");
      set_unless_file("vendor_route_prefix", vendor_prefix, "--vendor-prefix");
      if (!device_upstream.empty()) config["device_upstream"] = device_upstream;
      const std::string filled = load_input(schema, serve_input, intake_step_min);
      config["simulate_latency"] = !no_latency && config.value("simulate_latency", true);
      config["filled"] = Json::parse(filled);
      config["serials"] = resolve_serials(serve_serials, serve_count);
      config["seed"] = seed;
      config["with_twins"] = !emulator_only;
      config["with_emulator"] = emulator_only || with_emulator;
      if (emulator_only) {
        config["emulator"] =
            Json{{"quirk_rate", quirk_rate}, {"dispense_busy_ms", dispense_busy_ms}};
      }
      serve_until_signal(schema, config);
    }

    if (*cmd_run) {
      const std::string filled = load_input(schema, run_input, intake_step_min);
      const Json config{{"hours", hours},
                        {"rate", rate},
                        {"seed", seed},
                        {"invalid_rate", invalid_rate},
                        {"acceleration", run_acceleration},
                        {"quirk_rate", run_quirk},
                        {"allow_nonstandard", allow_nonstandard}};
      char* meta = nullptr;
      check(dtwin_run_experiment(schema.ptr, filled.c_str(), config.dump().c_str(),
                                 run_out.c_str(), &meta),
            "running experiment");
      std::printf("%s\n", take_string(meta).c_str());
      std::printf("traces written to %s/\n", run_out.c_str());
    }

    if (*cmd_batch) {
      const std::string filled = load_input(schema, batch_input, intake_step_min);
      const Json config{{"sizes", sizes}, {"seed", seed}};
      char* meta = nullptr;
      check(dtwin_run_batches(schema.ptr, filled.c_str(), corpus_path.c_str(),
                              config.dump().c_str(), batch_out.c_str(), &meta),
            "running batches");
      std::printf("%s\n", take_string(meta).c_str());
      std::printf("batch traces written to %s/\n", batch_out.c_str());
    }

    if (*cmd_fidelity) {
      std::vector<const char*> dirs;
      for (const auto& d : pair_dirs) dirs.push_back(d.c_str());
      const Json config{{"tolerance_ms", tolerance_ms}};
      char* report = nullptr;
      check(dtwin_fidelity_report(dirs.data(), dirs.size(),
                                  batches_dir.empty() ? nullptr : batches_dir.c_str(),
                                  config.dump().c_str(), report_out.c_str(), &report),
            "building fidelity report");
      std::printf("%s\n", take_string(report).c_str());
      std::printf("report written to %s/\n", report_out.c_str());
    }

    if (*cmd_sync) {
      char* profile = nullptr;
      check(dtwin_profile_from_log_file(sync_log.c_str(), &profile), "synchronizing profile");
      const std::string text = take_string(profile) + "\n";
      if (sync_out == "-") {
        std::fputs(text.c_str(), stdout);
      } else {
        write_file(sync_out, text);
        std::printf("profile written to %s\n", sync_out.c_str());
      }
    }
  } catch (const CliError& e) {
    std::fprintf(stderr, "%s\n", e.message.c_str());
    return e.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n",
                 Json{{"error", {{"message", e.what()}}}}.dump().c_str());
    return 1;
  }
  return 0;
}
