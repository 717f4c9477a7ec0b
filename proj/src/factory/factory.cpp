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

#include "factory/factory.hpp"

#include <chrono>
#include <set>

namespace dtwin::factory {

using model::AssociationDef;
using model::ClassDef;
using model::DeviceSchema;

namespace {

std::string to_lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

Json template_for_class(const DeviceSchema& schema, const ClassDef& cls) {
  Json obj = Json::object();
  for (const auto& prop : cls.properties) obj[prop.name] = prop.default_value;
  for (const auto& assoc : cls.associations) {
    const ClassDef& target = schema.require_class(assoc.target);
    Json child = template_for_class(schema, target);
    if (assoc.many()) {
      obj[assoc.role] = Json::array({child});
    } else {
      obj[assoc.role] = child;
    }
  }
  return obj;
}

void doc_for_class(const DeviceSchema& schema, const ClassDef& cls, const std::string& path,
                   Json& out) {
  for (const auto& prop : cls.properties) {
    Json entry{{"class", cls.name}, {"type", model::value_kind_name(prop.kind)},
               {"default", prop.default_value}};
    if (prop.kind == model::ValueKind::enumeration) {
      entry["literals"] = schema.find_enum(prop.enum_name)->literals;
    }
    Json::array_t ids;
    for (const auto* ct : schema.constraints_involving(cls.name, prop.name)) {
      ids.push_back(ct->id);
      const auto bounds = ct->predicate.implied_bounds(prop.name);
      if (bounds.lower) entry["min"] = *bounds.lower;
      if (bounds.upper) entry["max"] = *bounds.upper;
    }
    if (!ids.empty()) entry["constraints"] = ids;
    out[path + "." + prop.name] = entry;
  }
  for (const auto& assoc : cls.associations) {
    const std::string child_path =
        path + "." + assoc.role + (assoc.many() ? "[]" : "");
    out[path + "." + assoc.role] = Json{
        {"class", assoc.target},
        {"lower", assoc.lower},
        {"upper", assoc.upper == AssociationDef::kUnbounded ? Json("*") : Json(assoc.upper)}};
    doc_for_class(schema, schema.require_class(assoc.target), child_path, out);
  }
}

struct Materializer {
  const DeviceSchema& schema;
  model::ValidationResult violations;

  std::unique_ptr<model::ObjectNode> build(const std::string& class_name, const Json& json,
                                           const std::string& path) {
    if (!json.is_object()) {
      throw DtError(Errc::parse, "expected a JSON object for " + class_name + " at " + path);
    }
    const ClassDef& cls = schema.require_class(class_name);
    auto node = std::make_unique<model::ObjectNode>();
    node->class_name = class_name;

    for (const auto& [key, value] : json.items()) {
      if (cls.find_property(key) || cls.find_association(key)) continue;
      throw DtError(Errc::structural_mismatch,
                    "unknown key \"" + key + "\" for class " + class_name + " at " + path);
    }

    for (const auto& prop : cls.properties) {
      const Json value = json.contains(prop.name) ? json.at(prop.name) : prop.default_value;
      model::ValidationResult check;
      model::check_value_type(schema, cls, prop, value, path, check);
      if (check.ok()) {
        auto resolve = [&](const std::string& name) -> Json {
          if (name == prop.name) return value;
          if (json.contains(name)) return json.at(name);
          const auto* other = cls.find_property(name);
          return other ? other->default_value : Json();
        };
        for (const auto* ct : schema.constraints_involving(class_name, prop.name)) {
          if (!ct->predicate.evaluate(resolve)) {
            violations.violations.push_back({ct->id, ct->message, path});
          }
        }
      } else {
        for (auto& v : check.violations) violations.violations.push_back(std::move(v));
      }
      node->slots[prop.name] = value;
    }

    for (const auto& assoc : cls.associations) {
      auto& bucket = node->children[assoc.role];
      std::vector<Json> elements;
      if (json.contains(assoc.role)) {
        const Json& value = json.at(assoc.role);
        if (assoc.many()) {
          if (!value.is_array()) {
            throw DtError(Errc::parse, assoc.role + " must be an array at " + path);
          }
          for (const auto& el : value) elements.push_back(el);
        } else {
          if (value.is_array()) {
            throw DtError(Errc::parse, assoc.role + " must be a single object at " + path);
          }
          if (!value.is_null()) elements.push_back(value);
        }
      }
      const auto count = static_cast<int>(elements.size());
      if (count < assoc.lower ||
          (assoc.upper != AssociationDef::kUnbounded && count > assoc.upper)) {
        throw DtError(Errc::multiplicity,
                      path + "." + assoc.role + " expects between " +
                          std::to_string(assoc.lower) + " and " +
                          (assoc.upper == AssociationDef::kUnbounded
                               ? std::string("*")
                               : std::to_string(assoc.upper)) +
                          " elements, got " + std::to_string(count));
      }
      for (std::size_t i = 0; i < elements.size(); ++i) {
        bucket.push_back(build(assoc.target, elements[i],
                               path + "." + assoc.role + "[" + std::to_string(i) + "]"));
      }
    }
    return node;
  }
};

}  // namespace

Json generate_template(const DeviceSchema& schema) {
  schema.validate();
  const ClassDef& root = schema.require_class(schema.root_class());
  return Json{{to_lower(schema.root_class()), template_for_class(schema, root)}};
}

Json template_doc(const DeviceSchema& schema) {
  Json out = Json::object();
  doc_for_class(schema, schema.require_class(schema.root_class()),
                to_lower(schema.root_class()), out);
  return out;
}

std::unique_ptr<model::ObjectNode> materialize_node(const DeviceSchema& schema,
                                                    const std::string& class_name,
                                                    const Json& filled,
                                                    const std::string& path_hint) {
  Materializer m{schema, {}};
  auto node = m.build(class_name, filled, path_hint);
  if (!m.violations.ok()) {
    throw DtError(Errc::constraint_violation, "constraint violations while materializing",
                  m.violations.to_json());
  }
  return node;
}

model::DeviceInstance instantiate(const DeviceSchema& schema, const Json& filled,
                                  const std::string& serial) {
  if (serial.empty()) {
    throw DtError(Errc::invalid_argument, "serial must not be empty");
  }
  const std::string root_key = to_lower(schema.root_class());
  if (!filled.is_object() || !filled.contains(root_key)) {
    throw DtError(Errc::parse, "filled input must carry a \"" + root_key + "\" root object");
  }
  auto root = materialize_node(schema, schema.root_class(), filled.at(root_key), root_key);
  model::DeviceInstance instance(serial, std::move(root));
  if (instance.root()->slots.contains("number")) {
    instance.set_slot(*instance.root(), "number", serial);
  }
  return instance;
}

FleetResult create_fleet(const DeviceSchema& schema, const Json& filled,
                         const std::vector<std::string>& serials) {
  std::set<std::string> seen;
  for (const auto& s : serials) {
    if (s.empty()) throw DtError(Errc::invalid_argument, "serial must not be empty");
    if (!seen.insert(s).second) {
      throw DtError(Errc::duplicate_serial, "duplicate serial: " + s);
    }
  }
  FleetResult result;
  result.instances.reserve(serials.size());
  const auto started = std::chrono::steady_clock::now();
  for (const auto& s : serials) {
    result.instances.push_back(instantiate(schema, filled, s));
  }
  result.elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
          .count();
  return result;
}

std::vector<std::string> derive_serials(int n) {
  if (n < 0) throw DtError(Errc::invalid_argument, "fleet size must not be negative");
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) out.push_back(std::to_string(i));
  return out;
}

}  // namespace dtwin::factory
