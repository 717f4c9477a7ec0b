/*
 * Copyright 2024 The dtwin Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C API of the dtwin digital-twin framework for smart medicine dispensers.
 *
 * All functions return DTWIN_OK (0) on success or a negative status code;
 * dtwin_last_error() describes the most recent failure on the calling thread.
 * Structured data crosses the boundary as JSON strings; strings returned
 * through char** out-parameters are heap-allocated and must be released with
 * dtwin_string_free(). Handles are opaque and freed with their *_free call.
 */

#ifndef DTWIN_DTWIN_H_
#define DTWIN_DTWIN_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DTWIN_API __declspec(dllexport)
#else
#define DTWIN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dtwin_status {
  DTWIN_OK = 0,
  DTWIN_E_PARSE = -1,
  DTWIN_E_UNKNOWN_CLASS = -2,
  DTWIN_E_UNKNOWN_PROPERTY = -3,
  DTWIN_E_STRUCTURAL = -4,
  DTWIN_E_CONSTRAINT = -5,
  DTWIN_E_MULTIPLICITY = -6,
  DTWIN_E_DUPLICATE_SERIAL = -7,
  DTWIN_E_EMPTY_LOG = -8,
  DTWIN_E_MALFORMED_RECORD = -9,
  DTWIN_E_EMPTY_TRACE = -10,
  DTWIN_E_TOO_FEW_PAIRS = -11,
  DTWIN_E_ROUTE = -12,
  DTWIN_E_BIND = -13,
  DTWIN_E_UNREACHABLE = -14,
  DTWIN_E_NO_ACTIVE_PLAN = -15,
  DTWIN_E_ACTION = -16,
  DTWIN_E_STATE = -17,
  DTWIN_E_INVALID_ARG = -18,
  DTWIN_E_IO = -19,
  DTWIN_E_INTERNAL = -20
} dtwin_status;

typedef struct dtwin_schema dtwin_schema;
typedef struct dtwin_instance dtwin_instance;
typedef struct dtwin_fleet dtwin_fleet;
typedef struct dtwin_server dtwin_server;

/* Message describing the last failure on this thread; owned by the library. */
DTWIN_API const char* dtwin_last_error(void);

DTWIN_API void dtwin_string_free(char* s);

/* ---- Domain model ---------------------------------------------------- */

/* The shipped medicine-dispenser domain model (constraints C1..C6). */
DTWIN_API dtwin_status dtwin_schema_builtin(dtwin_schema** out);
DTWIN_API dtwin_status dtwin_schema_from_json(const char* json, dtwin_schema** out);
DTWIN_API dtwin_status dtwin_schema_to_json(const dtwin_schema* schema, char** out_json);
DTWIN_API void dtwin_schema_free(dtwin_schema* schema);

/*
 * Validates one property value (JSON-encoded scalar) against the registered
 * constraints. out_result_json: {"ok": bool, "violations": [{id, message}]}.
 */
DTWIN_API dtwin_status dtwin_validate_value(const dtwin_schema* schema, const char* cls,
                                            const char* prop, const char* value_json,
                                            char** out_result_json);

/* ---- Input templates and instances ------------------------------------ */

DTWIN_API dtwin_status dtwin_template_generate(const dtwin_schema* schema, char** out_json);

/* Sidecar documentation: per path the type, enum literals and value ranges. */
DTWIN_API dtwin_status dtwin_template_doc(const dtwin_schema* schema, char** out_json);

/* Experiment input derived from the template: a one-day plan with an intake
 * every intake_step_min minutes (desk-scale schedule for fidelity runs). */
DTWIN_API dtwin_status dtwin_experiment_input(const dtwin_schema* schema,
                                              int intake_step_min, char** out_json);

DTWIN_API dtwin_status dtwin_instance_create(const dtwin_schema* schema,
                                             const char* filled_json, const char* serial,
                                             dtwin_instance** out);
DTWIN_API dtwin_status dtwin_instance_to_json(const dtwin_instance* instance, char** out_json);
DTWIN_API dtwin_status dtwin_instance_validate(const dtwin_schema* schema,
                                               const dtwin_instance* instance,
                                               char** out_result_json);
DTWIN_API void dtwin_instance_free(dtwin_instance* instance);

/* ---- Fleets ------------------------------------------------------------ */

/* serials may be NULL to derive "1".."count". */
DTWIN_API dtwin_status dtwin_fleet_create(const dtwin_schema* schema, const char* filled_json,
                                          const char* const* serials, size_t count,
                                          dtwin_fleet** out);
DTWIN_API dtwin_status dtwin_fleet_size(const dtwin_fleet* fleet, size_t* out);
DTWIN_API dtwin_status dtwin_fleet_elapsed_ms(const dtwin_fleet* fleet, double* out);
DTWIN_API dtwin_status dtwin_fleet_instance_json(const dtwin_fleet* fleet, size_t index,
                                                 char** out_json);
DTWIN_API void dtwin_fleet_free(dtwin_fleet* fleet);

/* ---- DT communication server ------------------------------------------- */

/*
 * config_json: {
 *   "bind": "127.0.0.1", "port": 0, "acceleration": 60,
 *   "vendor_route_prefix": "karie", "device_upstream": "",
 *   "simulate_latency": true,
 *   "filled": {...},            // filled input template
 *   "serials": ["100", ...],    // devices to host
 *   "with_twins": true,         // host twins on /devices/{serial}
 *   "with_emulator": false,     // host emulated devices on vendor routes
 *   "seed": 42
 * }
 */
DTWIN_API dtwin_status dtwin_server_start(const dtwin_schema* schema, const char* config_json,
                                          dtwin_server** out);
DTWIN_API dtwin_status dtwin_server_port(const dtwin_server* server, int* out_port);
DTWIN_API dtwin_status dtwin_server_shutdown_twin(dtwin_server* server, const char* serial);
DTWIN_API dtwin_status dtwin_server_stop(dtwin_server* server);
DTWIN_API void dtwin_server_free(dtwin_server* server);

/* ---- Experiments --------------------------------------------------------- */

/*
 * Seeded virtual-time fidelity run (request fork to twin + emulated device).
 * config_json: {"hours": 1, "rate": 30, "seed": 42, "serial": "100",
 *               "invalid_rate": 0.2, "acceleration": 60, "quirk_rate": 0.08,
 *               "dispense_busy_ms": 90000, "allow_nonstandard": false}
 * Writes requests.jsonl, twin.jsonl, emulator.jsonl, run_meta.json and event
 * logs under out_dir; returns the run metadata.
 */
DTWIN_API dtwin_status dtwin_run_experiment(const dtwin_schema* schema,
                                            const char* filled_json, const char* config_json,
                                            const char* out_dir, char** out_meta_json);

/*
 * Replays a recorded corpus (requests.jsonl) against fleets of twins.
 * config_json: {"sizes": [10,...,100], "seed": 42, "threads": 0}
 */
DTWIN_API dtwin_status dtwin_run_batches(const dtwin_schema* schema, const char* filled_json,
                                         const char* corpus_path, const char* config_json,
                                         const char* out_dir, char** out_meta_json);

/* ---- Fidelity -------------------------------------------------------------- */

/*
 * Builds the similarity report for recorded run directories (and optionally a
 * batch directory); writes report.json/report.csv under out_dir and returns
 * the report JSON. config_json: {"tolerance_ms": 1000, "match_score": 1,
 * "mismatch_penalty": -1, "gap_penalty": -1}; pass NULL for defaults.
 */
DTWIN_API dtwin_status dtwin_fidelity_report(const char* const* run_dirs, size_t run_count,
                                             const char* batch_dir, const char* config_json,
                                             const char* out_dir, char** out_report_json);

/* a_json/b_json: JSON arrays of numbers. categorical != 0 compares equality,
 * otherwise |x-y| <= tolerance_ms counts as a match. */
DTWIN_API dtwin_status dtwin_align_similarity(const char* a_json, const char* b_json,
                                              const char* config_json, int categorical,
                                              double* out_pct);

DTWIN_API dtwin_status dtwin_wilcoxon(const double* a, const double* b, size_t n,
                                      double* out_p);

DTWIN_API dtwin_status dtwin_fisher(int64_t a, int64_t b, int64_t c, int64_t d, double* out_p);

/* ---- Synchronization ---------------------------------------------------------- */

/* Execution log (JSONL {"operation","start_ms","end_ms"}) -> delay profile
 * JSON {"op": {"lower_ms","upper_ms","mean_ms"}}. */
DTWIN_API dtwin_status dtwin_profile_from_log_file(const char* path, char** out_profile_json);

#ifdef __cplusplus
}
#endif

#endif /* DTWIN_DTWIN_H_ */
