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

#include <optional>
#include <string>
#include <vector>

#include "behavior/behavior.hpp"
#include "model/instance.hpp"

namespace dtwin::gateway {

// One row of the Model-DT-Device mapping: a containment path in the domain
// model, the twin route generated for it and the vendor device route it is
// linked to.
struct RouteEntry {
  enum class Kind { object_root, status, association_path };

  Kind kind = Kind::association_path;
  std::string class_name;
  std::vector<std::string> roles;  // containment roles from the root
  std::string dt_route;
  std::string device_route;
};

class ApiMapping {
 public:
  ApiMapping() = default;
  ApiMapping(std::string serial, std::string vendor_prefix, std::vector<RouteEntry> entries)
      : serial_(std::move(serial)),
        vendor_prefix_(std::move(vendor_prefix)),
        entries_(std::move(entries)) {}

  const std::string& serial() const { return serial_; }
  const std::string& vendor_prefix() const { return vendor_prefix_; }
  const std::vector<RouteEntry>& entries() const { return entries_; }

  const RouteEntry* find_by_roles(const std::vector<std::string>& roles) const;

  // Maps a twin route to the linked device route (and back).
  std::optional<std::string> to_device_route(const std::string& dt_route) const;

  Json to_json() const;

 private:
  std::string serial_;
  std::string vendor_prefix_;
  std::vector<RouteEntry> entries_;
};

// One twin route per containment association path rooted at the root class,
// plus the root object route and /devices/{serial}/status; device routes are
// the same paths under the vendor prefix.
ApiMapping generate_routes(const model::DeviceSchema& schema, const std::string& serial,
                           const std::string& vendor_prefix = "karie");

// --- Requests and responses -----------------------------------------------------

struct RequestRecord {
  std::int64_t id = 0;
  std::string serial;
  std::string method;  // GET | POST | PUT | DELETE
  std::string route;   // concrete path, e.g. /devices/100/settings/alarm
  Json body;
  std::int64_t sent_at_ms = 0;  // virtual time

  Json to_json() const;
  static RequestRecord from_json(const Json& j);
};

struct ResponseRecord {
  std::int64_t request_id = 0;
  int status_code = 0;  // 200 | 503 in-protocol
  std::int64_t response_time_ms = 0;
  Json body;
  bool synthetic = false;  // endpoint was unreachable; recorded as a flagged 503

  Json to_json() const;
  static ResponseRecord from_json(const Json& j);
};

// Where a concrete URL lands in the instance tree.
struct ResolvedTarget {
  const RouteEntry* entry = nullptr;
  bool status = false;
  bool collection = false;            // many-valued tail without an index
  model::ObjectPath object_path;      // target object (or collection parent)
  std::string collection_role;        // set when collection
  std::string tail_role;              // last role on the path ("" for the root)
};

// Throws DtError{route_not_found} for paths or methods outside the mapping.
ResolvedTarget resolve_route(const ApiMapping& mapping, const model::DeviceSchema& schema,
                             const std::string& method, const std::string& route);

// Field-by-field validation of an update body against the current object.
struct UpdateCheck {
  std::vector<std::pair<std::string, Json>> valid_fields;
  model::ValidationResult violations;

  bool all_valid() const { return violations.ok(); }
  bool mixed() const { return !valid_fields.empty() && !violations.ok(); }
};

UpdateCheck classify_object_update(const model::DeviceSchema& schema,
                                   const model::ObjectNode& node, const Json& body);

// Behavior toggles for request handling. Twins run the strict all-or-nothing
// policy; the reference emulator layers its partial-acceptance quirk on top.
struct HandlePolicy {
  double partial_accept_rate = 0.0;
};

// Serves one request against one twin: advances the twin's virtual clock to
// the request time, applies busy/shutdown rejection, validates and mutates.
// Only 200 and 503 leave this function; unmapped routes throw
// DtError{route_not_found} (transport-level 404).
ResponseRecord handle(const ApiMapping& mapping, behavior::TwinRuntime& rt,
                      const RequestRecord& request, const HandlePolicy& policy = {});

// Re-issues the request to the mapped device route on an upstream host and
// returns its response verbatim. Throws DtError{device_unreachable}.
ResponseRecord forward_to_device(const RequestRecord& request, const ApiMapping& mapping,
                                 const std::string& upstream_base_url);

std::string kebab_case(const std::string& role);

}  // namespace dtwin::gateway
