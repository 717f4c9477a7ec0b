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
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "model/schema.hpp"

namespace dtwin::model {

// One object of an instance model: a class reference, its property slots and
// its contained children per association role.
struct ObjectNode {
  std::string class_name;
  Json slots = Json::object();
  std::map<std::string, std::vector<std::unique_ptr<ObjectNode>>> children;

  Json slot(const std::string& prop) const {
    const auto it = slots.find(prop);
    return it == slots.end() ? Json() : *it;
  }

  std::unique_ptr<ObjectNode> clone() const;

  // Subtree as JSON: slots inlined, children nested by role
  // (arrays for many-valued roles, plain objects otherwise).
  Json subtree_json(const DeviceSchema& schema) const;
};

// A path from the root: (role, index) steps.
using ObjectPath = std::vector<std::pair<std::string, std::size_t>>;
std::string object_path_string(const ObjectPath& path);

// Structural state of one twin, uniquely identified by its serial number.
class DeviceInstance {
 public:
  DeviceInstance() = default;
  DeviceInstance(std::string serial, std::unique_ptr<ObjectNode> root);

  DeviceInstance(DeviceInstance&&) noexcept = default;
  DeviceInstance& operator=(DeviceInstance&&) noexcept = default;
  DeviceInstance(const DeviceInstance& other);
  DeviceInstance& operator=(const DeviceInstance& other);

  const std::string& serial() const { return serial_; }
  ObjectNode* root() { return root_.get(); }
  const ObjectNode* root() const { return root_.get(); }

  ObjectNode* resolve(const ObjectPath& path);
  const ObjectNode* resolve(const ObjectPath& path) const;

  // Mutations bump a version counter so runtimes can refresh cached schedules.
  std::uint64_t version() const { return version_; }
  void set_slot(ObjectNode& node, const std::string& prop, Json value);
  ObjectNode& append_child(ObjectNode& parent, const std::string& role,
                           std::unique_ptr<ObjectNode> child);
  void remove_child(ObjectNode& parent, const std::string& role, std::size_t index);

  // Canonical dump (sorted keys); byte-equal for structurally equal instances.
  Json to_json() const;
  std::string dump() const { return to_json().dump(); }

 private:
  std::string serial_;
  std::unique_ptr<ObjectNode> root_;
  std::uint64_t version_ = 0;
};

// Aggregates every constraint violation over all objects, including type and
// multiplicity checks. Unknown classes/properties/roles in the instance raise
// DtError{structural_mismatch}.
ValidationResult validate_instance(const DeviceSchema& schema, const DeviceInstance& instance);

}  // namespace dtwin::model
