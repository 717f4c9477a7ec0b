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

#include "gateway/gateway.hpp"

#include <algorithm>

#include "factory/factory.hpp"

namespace dtwin::gateway {

using model::AssociationDef;
using model::ClassDef;

std::string kebab_case(const std::string& role) {
  std::string out = role;
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

namespace {

std::string snake_case(const std::string& segment) {
  std::string out = segment;
  std::replace(out.begin(), out.end(), '-', '_');
  return out;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : path) {
    if (c == '/') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool is_index(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

[[noreturn]] void not_found(const std::string& why) {
  throw DtError(Errc::route_not_found, why);
}

}  // namespace

// --- mapping ---------------------------------------------------------------

const RouteEntry* ApiMapping::find_by_roles(const std::vector<std::string>& roles) const {
  for (const auto& e : entries_) {
    if (e.kind == RouteEntry::Kind::status) continue;
    if (e.roles == roles) return &e;
  }
  return nullptr;
}

std::optional<std::string> ApiMapping::to_device_route(const std::string& dt_route) const {
  const std::string dt_base = "/devices/";
  if (dt_route.rfind(dt_base, 0) != 0) return std::nullopt;
  return "/" + vendor_prefix_ + "/" + dt_route.substr(dt_base.size());
}

Json ApiMapping::to_json() const {
  Json rows = Json::array();
  for (const auto& e : entries_) {
    rows.push_back(Json{{"class", e.class_name},
                        {"dt_route", e.dt_route},
                        {"device_route", e.device_route}});
  }
  return Json{{"serial", serial_}, {"vendor_prefix", vendor_prefix_}, {"mapping", rows}};
}

namespace {

void enumerate_paths(const model::DeviceSchema& schema, const ClassDef& cls,
                     const std::string& serial, const std::string& vendor,
                     std::vector<std::string>& roles, std::string suffix,
                     std::vector<RouteEntry>& out) {
  for (const auto& assoc : cls.associations) {
    if (!assoc.containment) continue;
    RouteEntry e;
    e.kind = RouteEntry::Kind::association_path;
    e.class_name = assoc.target;
    roles.push_back(assoc.role);
    e.roles = roles;
    const std::string child_suffix = suffix + "/" + kebab_case(assoc.role);
    e.dt_route = "/devices/" + serial + child_suffix;
    e.device_route = "/" + vendor + "/" + serial + child_suffix;
    out.push_back(e);
    enumerate_paths(schema, schema.require_class(assoc.target), serial, vendor, roles,
                    child_suffix, out);
    roles.pop_back();
  }
}

}  // namespace

ApiMapping generate_routes(const model::DeviceSchema& schema, const std::string& serial,
                           const std::string& vendor_prefix) {
  if (serial.empty()) throw DtError(Errc::invalid_argument, "serial must not be empty");
  schema.validate();
  std::vector<RouteEntry> entries;

  RouteEntry root;
  root.kind = RouteEntry::Kind::object_root;
  root.class_name = schema.root_class();
  root.dt_route = "/devices/" + serial;
  root.device_route = "/" + vendor_prefix + "/" + serial;
  entries.push_back(root);

  RouteEntry status;
  status.kind = RouteEntry::Kind::status;
  status.class_name = schema.root_class();
  status.dt_route = "/devices/" + serial + "/status";
  status.device_route = "/" + vendor_prefix + "/" + serial + "/status";
  entries.push_back(status);

  std::vector<std::string> roles;
  enumerate_paths(schema, schema.require_class(schema.root_class()), serial, vendor_prefix,
                  roles, "", entries);
  return ApiMapping(serial, vendor_prefix, std::move(entries));
}

// --- records ---------------------------------------------------------------

Json RequestRecord::to_json() const {
  return Json{{"id", id},       {"serial", serial},       {"method", method},
              {"route", route}, {"body", body},           {"sent_at_ms", sent_at_ms}};
}

RequestRecord RequestRecord::from_json(const Json& j) {
  RequestRecord r;
  r.id = j.at("id").get<std::int64_t>();
  r.serial = j.at("serial").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.route = j.at("route").get<std::string>();
  r.body = j.value("body", Json());
  r.sent_at_ms = j.at("sent_at_ms").get<std::int64_t>();
  return r;
}

Json ResponseRecord::to_json() const {
  Json j{{"id", request_id},
         {"status", status_code},
         {"response_time_ms", response_time_ms},
         {"body", body}};
  if (synthetic) j["synthetic"] = true;
  return j;
}

ResponseRecord ResponseRecord::from_json(const Json& j) {
  ResponseRecord r;
  r.request_id = j.at("id").get<std::int64_t>();
  r.status_code = j.at("status").get<int>();
  r.response_time_ms = j.at("response_time_ms").get<std::int64_t>();
  r.body = j.value("body", Json());
  r.synthetic = j.value("synthetic", false);
  return r;
}

// --- route resolution ---------------------------------------------------------

ResolvedTarget resolve_route(const ApiMapping& mapping, const model::DeviceSchema& schema,
                             const std::string& method, const std::string& route) {
  const auto segments = split_path(route);
  if (segments.size() < 2) not_found("route too short: " + route);
  if (segments[0] != "devices" && segments[0] != mapping.vendor_prefix()) {
    not_found("unknown route prefix: " + segments[0]);
  }
  if (segments[1] != mapping.serial()) {
    not_found("serial " + segments[1] + " is not served by this mapping");
  }

  ResolvedTarget target;
  const ClassDef* cls = &schema.require_class(schema.root_class());
  std::vector<std::string> roles;
  std::size_t i = 2;
  while (i < segments.size()) {
    const std::string& seg = segments[i];
    if (seg == "status" && roles.empty() && i + 1 == segments.size()) {
      target.status = true;
      ++i;
      break;
    }
    const AssociationDef* assoc = cls->find_association(snake_case(seg));
    if (!assoc) not_found("no association for segment \"" + seg + "\"");
    roles.push_back(assoc->role);
    target.tail_role = assoc->role;
    if (assoc->many()) {
      if (i + 1 < segments.size() && is_index(segments[i + 1])) {
        target.object_path.emplace_back(assoc->role, std::stoul(segments[i + 1]));
        i += 2;
      } else if (i + 1 == segments.size()) {
        target.collection = true;
        target.collection_role = assoc->role;
        ++i;
      } else {
        not_found("collection \"" + seg + "\" needs an element index here");
      }
    } else {
      target.object_path.emplace_back(assoc->role, 0);
      ++i;
    }
    cls = &schema.require_class(assoc->target);
  }

  if (target.status) {
    if (method != "GET") not_found("status route supports GET only");
    target.entry = nullptr;
    for (const auto& e : mapping.entries()) {
      if (e.kind == RouteEntry::Kind::status) target.entry = &e;
    }
    return target;
  }

  target.entry = roles.empty() ? &mapping.entries().front() : mapping.find_by_roles(roles);
  if (!target.entry) not_found("no mapping entry for route " + route);

  if (method == "GET") return target;
  if (method == "POST") return target;  // object update or collection append
  if (method == "PUT") {
    if (target.collection) not_found("PUT needs a concrete element, not a collection");
    return target;
  }
  if (method == "DELETE") {
    if (target.collection || target.tail_role != "medication_plans") {
      not_found("DELETE is supported for medication plan elements only");
    }
    return target;
  }
  not_found("unsupported method " + method);
}

// --- update classification -------------------------------------------------------

UpdateCheck classify_object_update(const model::DeviceSchema& schema,
                                   const model::ObjectNode& node, const Json& body) {
  UpdateCheck check;
  if (!body.is_object()) {
    check.violations.violations.push_back(
        {"S-body", "update body must be a JSON object", ""});
    return check;
  }
  const ClassDef& cls = schema.require_class(node.class_name);
  for (const auto& [key, value] : body.items()) {
    const auto* prop = cls.find_property(key);
    if (!prop) {
      check.violations.violations.push_back(
          {"S-" + node.class_name + "." + key,
           "\"" + key + "\" is not a settable property of " + node.class_name, ""});
      continue;
    }
    model::ValidationResult field;
    model::check_value_type(schema, cls, *prop, value, "", field);
    if (field.ok()) {
      auto resolve = [&](const std::string& name) -> Json {
        if (name == key) return value;
        Json v = node.slot(name);
        if (!v.is_null()) return v;
        const auto* other = cls.find_property(name);
        return other ? other->default_value : Json();
      };
      for (const auto* ct : schema.constraints_involving(node.class_name, key)) {
        if (!ct->predicate.evaluate(resolve)) {
          field.violations.push_back({ct->id, ct->message, ""});
        }
      }
    }
    if (field.ok()) {
      check.valid_fields.emplace_back(key, value);
    } else {
      for (auto& v : field.violations) check.violations.violations.push_back(std::move(v));
    }
  }
  return check;
}

// --- request handling ---------------------------------------------------------------

namespace {

ResponseRecord make_response(const RequestRecord& req, int status, std::int64_t rt_ms,
                             Json payload, bool is_error) {
  Json body{{"status", status}, {"response_time_ms", rt_ms}};
  body[is_error ? "error" : "data"] = std::move(payload);
  return ResponseRecord{req.id, status, rt_ms, std::move(body), false};
}

}  // namespace

ResponseRecord handle(const ApiMapping& mapping, behavior::TwinRuntime& rt,
                      const RequestRecord& request, const HandlePolicy& policy) {
  if (request.serial != mapping.serial()) {
    not_found("request serial " + request.serial + " does not match this twin");
  }
  const ResolvedTarget target =
      resolve_route(mapping, rt.schema(), request.method, request.route);

  rt.run_until(request.sent_at_ms);
  const std::int64_t t = std::max(request.sent_at_ms, rt.now_ms());

  auto latency = [&](const char* op) {
    return rt.sample_delay(op) + rt.config().processing_ms;
  };

  if (rt.state() == behavior::State::shutdown) {
    return make_response(request, 503, latency("busy_reject"),
                         Json{{"code", "shutdown"}, {"message", "device is shut down"}}, true);
  }
  if (rt.busy_at(t)) {
    return make_response(
        request, 503, latency("busy_reject"),
        Json{{"code", "busy"}, {"message", "request cannot be handled at the moment"}}, true);
  }

  auto& instance = rt.instance();
  const auto& schema = rt.schema();

  if (target.status) {
    Json data{{"serial", instance.serial()},
              {"state", behavior::state_name(rt.state())},
              {"virtual_time", format_civil_datetime(rt.config().epoch_civil_ms + rt.now_ms())},
              {"busy", rt.busy_at(t)}};
    return make_response(request, 200, latency("settings_get"), std::move(data), false);
  }

  if (request.method == "GET") {
    if (target.collection) {
      auto* parent = instance.resolve(target.object_path);
      if (!parent) {
        return make_response(request, 503, latency("settings_get"),
                             Json{{"code", "not_found"}, {"message", "no such object"}}, true);
      }
      Json arr = Json::array();
      const auto it = parent->children.find(target.collection_role);
      if (it != parent->children.end()) {
        for (const auto& child : it->second) arr.push_back(child->subtree_json(schema));
      }
      return make_response(request, 200, latency("settings_get"), std::move(arr), false);
    }
    auto* node = instance.resolve(target.object_path);
    if (!node) {
      return make_response(request, 503, latency("settings_get"),
                           Json{{"code", "not_found"}, {"message", "no such object"}}, true);
    }
    return make_response(request, 200, latency("settings_get"), node->subtree_json(schema),
                         false);
  }

  if (request.method == "DELETE") {
    model::ObjectPath parent_path(target.object_path.begin(), target.object_path.end() - 1);
    auto* parent = instance.resolve(parent_path);
    const auto [role, index] = target.object_path.back();
    const bool exists = parent && parent->children.count(role) &&
                        index < parent->children.at(role).size();
    if (!exists) {
      return make_response(request, 503, latency("plan_delete"),
                           Json{{"code", "not_found"}, {"message", "no such medication plan"}},
                           true);
    }
    instance.remove_child(*parent, role, index);
    return make_response(request, 200, latency("plan_delete"),
                         Json{{"removed", static_cast<std::int64_t>(index)}}, false);
  }

  // POST | PUT
  if (target.collection) {
    if (request.method != "POST") not_found("collections accept GET and POST");
    auto* parent = instance.resolve(target.object_path);
    if (!parent) {
      return make_response(request, 503, latency("settings_update"),
                           Json{{"code", "not_found"}, {"message", "no such object"}}, true);
    }
    const auto& parent_cls = schema.require_class(parent->class_name);
    const auto* assoc = parent_cls.find_association(target.collection_role);
    const auto current =
        parent->children.count(target.collection_role)
            ? static_cast<int>(parent->children.at(target.collection_role).size())
            : 0;
    if (assoc->upper != AssociationDef::kUnbounded && current + 1 > assoc->upper) {
      return make_response(
          request, 503, latency("settings_update"),
          Json{{"code", "validation"},
               {"violations",
                Json::array({Json{{"id", "M-" + parent->class_name + "." + assoc->role},
                                  {"message", "collection is full"}}})}},
          true);
    }
    try {
      auto node = factory::materialize_node(schema, assoc->target, request.body,
                                            target.collection_role + "[new]");
      instance.append_child(*parent, target.collection_role, std::move(node));
    } catch (const DtError& e) {
      Json detail{{"code", "validation"}, {"message", e.what()}};
      if (!e.detail().is_null()) detail["violations"] = e.detail().value("violations", Json());
      return make_response(request, 503, latency("settings_update"), std::move(detail), true);
    }
    return make_response(request, 200, latency("settings_update"),
                         Json{{"index", current}}, false);
  }

  auto* node = instance.resolve(target.object_path);
  if (!node) {
    return make_response(request, 503, latency("settings_update"),
                         Json{{"code", "not_found"}, {"message", "no such object"}}, true);
  }
  UpdateCheck check = classify_object_update(schema, *node, request.body);
  bool apply_partial = false;
  if (!check.all_valid() && policy.partial_accept_rate > 0.0 && check.mixed()) {
    apply_partial = rt.chance(policy.partial_accept_rate);
  }
  if (check.all_valid() || apply_partial) {
    for (auto& [prop, value] : check.valid_fields) {
      instance.set_slot(*node, prop, std::move(value));
    }
    Json data = node->slots;
    if (apply_partial) {
      Json ignored = Json::array();
      for (const auto& v : check.violations.violations) ignored.push_back(v.constraint_id);
      data["_ignored"] = ignored;  // the device quietly dropped these fields
    }
    return make_response(request, 200, latency("settings_update"), std::move(data), false);
  }
  Json violations = Json::array();
  for (const auto& v : check.violations.violations) violations.push_back(v.to_json());
  return make_response(request, 503, latency("settings_update"),
                       Json{{"code", "validation"}, {"violations", violations}}, true);
}

}  // namespace dtwin::gateway
