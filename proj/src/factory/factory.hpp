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

#include <string>
#include <vector>

#include "model/instance.hpp"
#include "model/schema.hpp"

namespace dtwin::factory {

// JSON input template mirroring the schema's containment tree, rooted at a
// lower-cased root-class key ("device"). Many-valued roles become arrays with
// one exemplar element; every property is pre-filled with its default.
Json generate_template(const model::DeviceSchema& schema);

// Sidecar documentation for a template: per path, the type, the allowed enum
// literals and the integer ranges implied by registered constraints.
Json template_doc(const model::DeviceSchema& schema);

// Materializes one object subtree of `class_name` from JSON, validating every
// value and multiplicity on the way. Aborts atomically: throws
// DtError{constraint_violation} with the aggregated violation list,
// DtError{multiplicity} or DtError{parse}. Shared by instantiate() and by the
// gateway's collection POST handling.
std::unique_ptr<model::ObjectNode> materialize_node(const model::DeviceSchema& schema,
                                                    const std::string& class_name,
                                                    const Json& filled,
                                                    const std::string& path_hint);

// Depth-first materialization of a whole instance from a filled template.
// The root "number" slot is overridden with the serial.
model::DeviceInstance instantiate(const model::DeviceSchema& schema, const Json& filled,
                                  const std::string& serial);

struct FleetResult {
  std::vector<model::DeviceInstance> instances;
  double elapsed_ms = 0.0;
};

// |serials| independent twins from one filled template. Serials must be
// unique and non-empty; the wall-clock cost of the whole batch is reported.
FleetResult create_fleet(const model::DeviceSchema& schema, const Json& filled,
                         const std::vector<std::string>& serials);

// "1".."n"
std::vector<std::string> derive_serials(int n);

}  // namespace dtwin::factory
