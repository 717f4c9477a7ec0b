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

#include "model/instance.hpp"

namespace dtwin::model {

std::unique_ptr<ObjectNode> ObjectNode::clone() const {
  auto copy = std::make_unique<ObjectNode>();
  copy->class_name = class_name;
  copy->slots = slots;
  for (const auto& [role, nodes] : children) {
    auto& out = copy->children[role];
    out.reserve(nodes.size());
    for (const auto& n : nodes) out.push_back(n->clone());
  }
  return copy;
}

Json ObjectNode::subtree_json(const DeviceSchema& schema) const {
  Json j = slots;
  const ClassDef* cls = schema.find_class(class_name);
  for (const auto& [role, nodes] : children) {
    const AssociationDef* assoc = cls ? cls->find_association(role) : nullptr;
    const bool many = assoc ? assoc->many() : true;
    if (many) {
      Json arr = Json::array();
      for (const auto& n : nodes) arr.push_back(n->subtree_json(schema));
      j[role] = arr;
    } else {
      j[role] = nodes.empty() ? Json() : nodes.front()->subtree_json(schema);
    }
  }
  return j;
}

std::string object_path_string(const ObjectPath& path) {
  std::string out = "device";
  for (const auto& [role, index] : path) {
    out += "." + role + "[" + std::to_string(index) + "]";
  }
  return out;
}

DeviceInstance::DeviceInstance(std::string serial, std::unique_ptr<ObjectNode> root)
    : serial_(std::move(serial)), root_(std::move(root)) {}

DeviceInstance::DeviceInstance(const DeviceInstance& other)
    : serial_(other.serial_),
      root_(other.root_ ? other.root_->clone() : nullptr),
      version_(other.version_) {}

DeviceInstance& DeviceInstance::operator=(const DeviceInstance& other) {
  if (this != &other) {
    serial_ = other.serial_;
    root_ = other.root_ ? other.root_->clone() : nullptr;
    version_ = other.version_;
  }
  return *this;
}

ObjectNode* DeviceInstance::resolve(const ObjectPath& path) {
  ObjectNode* node = root_.get();
  for (const auto& [role, index] : path) {
    if (!node) return nullptr;
    const auto it = node->children.find(role);
    if (it == node->children.end() || index >= it->second.size()) return nullptr;
    node = it->second[index].get();
  }
  return node;
}

const ObjectNode* DeviceInstance::resolve(const ObjectPath& path) const {
  return const_cast<DeviceInstance*>(this)->resolve(path);
}

void DeviceInstance::set_slot(ObjectNode& node, const std::string& prop, Json value) {
  node.slots[prop] = std::move(value);
  ++version_;
}

ObjectNode& DeviceInstance::append_child(ObjectNode& parent, const std::string& role,
                                         std::unique_ptr<ObjectNode> child) {
  auto& vec = parent.children[role];
  vec.push_back(std::move(child));
  ++version_;
  return *vec.back();
}

void DeviceInstance::remove_child(ObjectNode& parent, const std::string& role,
                                  std::size_t index) {
  auto it = parent.children.find(role);
  if (it == parent.children.end() || index >= it->second.size()) {
    throw DtError(Errc::invalid_argument, "no child at " + role + "[" +
                                              std::to_string(index) + "]");
  }
  it->second.erase(it->second.begin() + static_cast<std::ptrdiff_t>(index));
  ++version_;
}

namespace {

Json node_to_json(const ObjectNode& node) {
  Json j{{"class", node.class_name}, {"slots", node.slots}};
  Json kids = Json::object();
  for (const auto& [role, nodes] : node.children) {
    Json arr = Json::array();
    for (const auto& n : nodes) arr.push_back(node_to_json(*n));
    kids[role] = arr;
  }
  j["children"] = kids;
  return j;
}

void validate_node(const DeviceSchema& schema, const ObjectNode& node,
                   const ObjectPath& path, ValidationResult& out) {
  const ClassDef* cls = schema.find_class(node.class_name);
  if (!cls) {
    throw DtError(Errc::structural_mismatch,
                  "instance object at " + object_path_string(path) +
                      " has unknown class " + node.class_name);
  }
  const std::string path_str = object_path_string(path);

  for (const auto& [prop, value] : node.slots.items()) {
    const PropertyDef* prop_def = cls->find_property(prop);
    if (!prop_def) {
      throw DtError(Errc::structural_mismatch,
                    "unknown property " + node.class_name + "." + prop + " at " + path_str);
    }
    check_value_type(schema, *cls, *prop_def, value, path_str, out);
  }

  auto resolve = [&](const std::string& name) -> Json {
    Json v = node.slot(name);
    if (!v.is_null()) return v;
    const PropertyDef* p = cls->find_property(name);
    return p ? p->default_value : Json();
  };
  for (const ConstraintDef* ct : schema.constraints_for(node.class_name)) {
    bool holds = false;
    try {
      holds = ct->predicate.evaluate(resolve);
    } catch (const DtError&) {
      holds = false;  // type errors already reported above
    }
    if (!holds) out.violations.push_back({ct->id, ct->message, path_str});
  }

  for (const auto& [role, nodes] : node.children) {
    const AssociationDef* assoc = cls->find_association(role);
    if (!assoc) {
      throw DtError(Errc::structural_mismatch,
                    "unknown association " + node.class_name + "." + role + " at " + path_str);
    }
    const auto count = static_cast<int>(nodes.size());
    if (count < assoc->lower ||
        (assoc->upper != AssociationDef::kUnbounded && count > assoc->upper)) {
      out.violations.push_back(
          {"M-" + node.class_name + "." + role,
           role + " expects between " + std::to_string(assoc->lower) + " and " +
               (assoc->upper == AssociationDef::kUnbounded ? std::string("*")
                                                           : std::to_string(assoc->upper)) +
               " elements, got " + std::to_string(count),
           path_str});
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      ObjectPath child_path = path;
      child_path.emplace_back(role, i);
      validate_node(schema, *nodes[i], child_path, out);
    }
  }
  // associations entirely absent from the children map
  for (const auto& assoc : cls->associations) {
    if (node.children.count(assoc.role) == 0 && assoc.lower > 0) {
      out.violations.push_back({"M-" + node.class_name + "." + assoc.role,
                                assoc.role + " expects at least " +
                                    std::to_string(assoc.lower) + " element(s), got 0",
                                path_str});
    }
  }
}

}  // namespace

Json DeviceInstance::to_json() const {
  Json j = root_ ? node_to_json(*root_) : Json();
  if (!j.is_null()) j["serial"] = serial_;
  return j;
}

ValidationResult validate_instance(const DeviceSchema& schema, const DeviceInstance& instance) {
  if (!instance.root()) {
    throw DtError(Errc::structural_mismatch, "instance has no root object");
  }
  if (instance.root()->class_name != schema.root_class()) {
    throw DtError(Errc::structural_mismatch,
                  "instance root class " + instance.root()->class_name +
                      " does not match schema root " + schema.root_class());
  }
  ValidationResult out;
  validate_node(schema, *instance.root(), {}, out);
  return out;
}

}  // namespace dtwin::model
