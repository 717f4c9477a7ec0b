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

#include <stdexcept>
#include <string>
#include <utility>

#include "core/jsonio.hpp"

namespace dtwin {

enum class Errc {
  ok = 0,
  parse,
  unknown_class,
  unknown_property,
  structural_mismatch,
  constraint_violation,
  multiplicity,
  duplicate_serial,
  empty_log,
  malformed_record,
  empty_trace,
  too_few_pairs,
  route_not_found,
  bind_failure,
  device_unreachable,
  no_active_plan,
  action_failure,
  invalid_state,
  invalid_argument,
  io_error,
  internal,
};

const char* errc_name(Errc code);

class DtError : public std::runtime_error {
 public:
  DtError(Errc code, const std::string& message, Json detail = nullptr)
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  Errc code() const { return code_; }
  const Json& detail() const { return detail_; }

  Json to_json() const {
    Json j{{"code", errc_name(code_)}, {"message", what()}};
    if (!detail_.is_null()) j["detail"] = detail_;
    return j;
  }

 private:
  Errc code_;
  Json detail_;
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::ok: return "ok";
    case Errc::parse: return "parse_error";
    case Errc::unknown_class: return "unknown_class";
    case Errc::unknown_property: return "unknown_property";
    case Errc::structural_mismatch: return "structural_mismatch";
    case Errc::constraint_violation: return "constraint_violation";
    case Errc::multiplicity: return "multiplicity_error";
    case Errc::duplicate_serial: return "duplicate_serial";
    case Errc::empty_log: return "empty_log";
    case Errc::malformed_record: return "malformed_record";
    case Errc::empty_trace: return "empty_trace";
    case Errc::too_few_pairs: return "too_few_pairs";
    case Errc::route_not_found: return "route_not_found";
    case Errc::bind_failure: return "bind_failure";
    case Errc::device_unreachable: return "device_unreachable";
    case Errc::no_active_plan: return "no_active_plan";
    case Errc::action_failure: return "action_failure";
    case Errc::invalid_state: return "invalid_state";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::io_error: return "io_error";
    case Errc::internal: return "internal";
  }
  return "internal";
}

}  // namespace dtwin
