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

#include "model/schema.hpp"

#include <algorithm>
#include <set>

#include "core/civiltime.hpp"

namespace dtwin::model {

namespace {

const char* compare_op_name(CompareOp op) {
  switch (op) {
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::gt: return ">";
    case CompareOp::ge: return ">=";
    case CompareOp::eq: return "==";
    case CompareOp::ne: return "!=";
  }
  return "==";
}

std::optional<CompareOp> compare_op_from_name(const std::string& name) {
  if (name == "<") return CompareOp::lt;
  if (name == "<=") return CompareOp::le;
  if (name == ">") return CompareOp::gt;
  if (name == ">=") return CompareOp::ge;
  if (name == "==") return CompareOp::eq;
  if (name == "!=") return CompareOp::ne;
  return std::nullopt;
}

bool json_less(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) {
    return a.get<double>() < b.get<double>();
  }
  if (a.is_string() && b.is_string()) {
    return a.get<std::string>() < b.get<std::string>();
  }
  throw DtError(Errc::structural_mismatch,
                "ordered comparison requires two numbers or two strings");
}

bool json_eq(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return a.get<double>() == b.get<double>();
  return a == b;
}

}  // namespace

const char* value_kind_name(ValueKind kind) {
  switch (kind) {
    case ValueKind::boolean: return "boolean";
    case ValueKind::integer: return "integer";
    case ValueKind::text: return "string";
    case ValueKind::date: return "date";
    case ValueKind::time_of_day: return "time";
    case ValueKind::enumeration: return "enum";
  }
  return "string";
}

std::optional<ValueKind> value_kind_from_name(const std::string& name) {
  if (name == "boolean") return ValueKind::boolean;
  if (name == "integer") return ValueKind::integer;
  if (name == "string") return ValueKind::text;
  if (name == "date") return ValueKind::date;
  if (name == "time") return ValueKind::time_of_day;
  if (name == "enum") return ValueKind::enumeration;
  return std::nullopt;
}

const PropertyDef* ClassDef::find_property(const std::string& prop) const {
  for (const auto& p : properties) {
    if (p.name == prop) return &p;
  }
  return nullptr;
}

const AssociationDef* ClassDef::find_association(const std::string& role) const {
  for (const auto& a : associations) {
    if (a.role == role) return &a;
  }
  return nullptr;
}

bool EnumDef::has_literal(const std::string& literal) const {
  return std::find(literals.begin(), literals.end(), literal) != literals.end();
}

// --- Predicate ---------------------------------------------------------------

Operand Operand::prop(std::string name) {
  Operand o;
  o.is_property = true;
  o.property = std::move(name);
  return o;
}

Operand Operand::value(Json v) {
  Operand o;
  o.literal = std::move(v);
  return o;
}

Predicate Predicate::compare(Operand lhs, CompareOp op, Operand rhs) {
  Predicate p;
  p.kind_ = Kind::compare;
  p.lhs_ = std::move(lhs);
  p.op_ = op;
  p.rhs_ = std::move(rhs);
  return p;
}

Predicate Predicate::all_of(std::vector<Predicate> children) {
  Predicate p;
  p.kind_ = Kind::logical_and;
  p.children_ = std::move(children);
  return p;
}

Predicate Predicate::any_of(std::vector<Predicate> children) {
  Predicate p;
  p.kind_ = Kind::logical_or;
  p.children_ = std::move(children);
  return p;
}

Predicate Predicate::negate(Predicate child) {
  Predicate p;
  p.kind_ = Kind::logical_not;
  p.children_.push_back(std::move(child));
  return p;
}

Predicate Predicate::between(const std::string& prop, std::int64_t lo, std::int64_t hi) {
  std::vector<Predicate> parts;
  parts.push_back(compare(Operand::prop(prop), CompareOp::ge, Operand::value(lo)));
  parts.push_back(compare(Operand::prop(prop), CompareOp::le, Operand::value(hi)));
  return all_of(std::move(parts));
}

Predicate Predicate::at_least(const std::string& prop, std::int64_t lo) {
  return compare(Operand::prop(prop), CompareOp::ge, Operand::value(lo));
}

bool Predicate::mentions(const std::string& prop) const {
  if (kind_ == Kind::compare) {
    return (lhs_.is_property && lhs_.property == prop) ||
           (rhs_.is_property && rhs_.property == prop);
  }
  return std::any_of(children_.begin(), children_.end(),
                     [&](const Predicate& c) { return c.mentions(prop); });
}

void Predicate::collect_properties(std::vector<std::string>& out) const {
  if (kind_ == Kind::compare) {
    if (lhs_.is_property) out.push_back(lhs_.property);
    if (rhs_.is_property) out.push_back(rhs_.property);
    return;
  }
  for (const auto& c : children_) c.collect_properties(out);
}

bool Predicate::evaluate(const std::function<Json(const std::string&)>& getter) const {
  switch (kind_) {
    case Kind::logical_and:
      return std::all_of(children_.begin(), children_.end(),
                         [&](const Predicate& c) { return c.evaluate(getter); });
    case Kind::logical_or:
      return std::any_of(children_.begin(), children_.end(),
                         [&](const Predicate& c) { return c.evaluate(getter); });
    case Kind::logical_not:
      return !children_.front().evaluate(getter);
    case Kind::compare:
      break;
  }
  const Json lhs = lhs_.is_property ? getter(lhs_.property) : lhs_.literal;
  const Json rhs = rhs_.is_property ? getter(rhs_.property) : rhs_.literal;
  switch (op_) {
    case CompareOp::lt: return json_less(lhs, rhs);
    case CompareOp::le: return !json_less(rhs, lhs);
    case CompareOp::gt: return json_less(rhs, lhs);
    case CompareOp::ge: return !json_less(lhs, rhs);
    case CompareOp::eq: return json_eq(lhs, rhs);
    case CompareOp::ne: return !json_eq(lhs, rhs);
  }
  return false;
}

Predicate::Bounds Predicate::implied_bounds(const std::string& prop) const {
  Bounds b;
  if (kind_ == Kind::logical_and) {
    for (const auto& c : children_) {
      const Bounds cb = c.implied_bounds(prop);
      if (cb.lower && (!b.lower || *cb.lower > *b.lower)) b.lower = cb.lower;
      if (cb.upper && (!b.upper || *cb.upper < *b.upper)) b.upper = cb.upper;
    }
    return b;
  }
  if (kind_ != Kind::compare) return b;
  // normalize to prop-on-the-left
  bool prop_left = lhs_.is_property && lhs_.property == prop && !rhs_.is_property;
  bool prop_right = rhs_.is_property && rhs_.property == prop && !lhs_.is_property;
  if (!prop_left && !prop_right) return b;
  const Json& lit = prop_left ? rhs_.literal : lhs_.literal;
  if (!lit.is_number_integer()) return b;
  const std::int64_t v = lit.get<std::int64_t>();
  CompareOp op = op_;
  if (prop_right) {
    switch (op_) {
      case CompareOp::lt: op = CompareOp::gt; break;
      case CompareOp::le: op = CompareOp::ge; break;
      case CompareOp::gt: op = CompareOp::lt; break;
      case CompareOp::ge: op = CompareOp::le; break;
      default: break;
    }
  }
  switch (op) {
    case CompareOp::ge: b.lower = v; break;
    case CompareOp::gt: b.lower = v + 1; break;
    case CompareOp::le: b.upper = v; break;
    case CompareOp::lt: b.upper = v - 1; break;
    case CompareOp::eq: b.lower = b.upper = v; break;
    case CompareOp::ne: break;
  }
  return b;
}

Json Predicate::to_json() const {
  switch (kind_) {
    case Kind::logical_and:
    case Kind::logical_or: {
      Json args = Json::array();
      for (const auto& c : children_) args.push_back(c.to_json());
      return Json{{"op", kind_ == Kind::logical_and ? "and" : "or"}, {"args", args}};
    }
    case Kind::logical_not:
      return Json{{"op", "not"}, {"args", Json::array({children_.front().to_json()})}};
    case Kind::compare: {
      auto operand = [](const Operand& o) -> Json {
        if (o.is_property) return Json{{"prop", o.property}};
        return Json{{"value", o.literal}};
      };
      return Json{{"op", compare_op_name(op_)}, {"lhs", operand(lhs_)}, {"rhs", operand(rhs_)}};
    }
  }
  return nullptr;
}

Predicate Predicate::from_json(const Json& j) {
  if (!j.is_object() || !j.contains("op")) {
    throw DtError(Errc::parse, "predicate node must be an object with an \"op\" key");
  }
  const std::string op = j.at("op").get<std::string>();
  if (op == "and" || op == "or" || op == "not") {
    std::vector<Predicate> children;
    for (const auto& c : j.at("args")) children.push_back(from_json(c));
    if (op == "not") {
      if (children.size() != 1) throw DtError(Errc::parse, "\"not\" takes one argument");
      return negate(std::move(children.front()));
    }
    if (children.empty()) throw DtError(Errc::parse, "empty logical predicate");
    return op == "and" ? all_of(std::move(children)) : any_of(std::move(children));
  }
  const auto cmp = compare_op_from_name(op);
  if (!cmp) throw DtError(Errc::parse, "unknown predicate op: " + op);
  auto operand = [](const Json& node) {
    if (node.contains("prop")) return Operand::prop(node.at("prop").get<std::string>());
    if (node.contains("value")) return Operand::value(node.at("value"));
    throw DtError(Errc::parse, "operand must carry \"prop\" or \"value\"");
  };
  return compare(operand(j.at("lhs")), *cmp, operand(j.at("rhs")));
}

// --- Validation results ------------------------------------------------------

Json Violation::to_json() const {
  Json j{{"id", constraint_id}, {"message", message}};
  if (!object_path.empty()) j["path"] = object_path;
  return j;
}

Json ValidationResult::to_json() const {
  Json arr = Json::array();
  for (const auto& v : violations) arr.push_back(v.to_json());
  return Json{{"ok", ok()}, {"violations", arr}};
}

// --- DeviceSchema --------------------------------------------------------------

void DeviceSchema::add_class(ClassDef cls) { classes_.push_back(std::move(cls)); }

void DeviceSchema::add_enum(EnumDef en) { enums_.push_back(std::move(en)); }

void DeviceSchema::register_constraint(ConstraintDef constraint) {
  constraints_.push_back(std::move(constraint));
}

const ClassDef* DeviceSchema::find_class(const std::string& name) const {
  for (const auto& c : classes_) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

const EnumDef* DeviceSchema::find_enum(const std::string& name) const {
  for (const auto& e : enums_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

const ClassDef& DeviceSchema::require_class(const std::string& name) const {
  const ClassDef* cls = find_class(name);
  if (!cls) throw DtError(Errc::unknown_class, "unknown class: " + name);
  return *cls;
}

std::vector<const ConstraintDef*> DeviceSchema::constraints_for(const std::string& cls) const {
  std::vector<const ConstraintDef*> out;
  for (const auto& c : constraints_) {
    if (c.context_class == cls) out.push_back(&c);
  }
  return out;
}

std::vector<const ConstraintDef*> DeviceSchema::constraints_involving(
    const std::string& cls, const std::string& prop) const {
  std::vector<const ConstraintDef*> out;
  for (const auto& c : constraints_) {
    if (c.context_class == cls && c.predicate.mentions(prop)) out.push_back(&c);
  }
  return out;
}

void DeviceSchema::validate() const {
  if (root_class_.empty() || !find_class(root_class_)) {
    throw DtError(Errc::structural_mismatch, "schema root class missing: " + root_class_);
  }
  std::set<std::string> names;
  for (const auto& c : classes_) {
    if (!names.insert(c.name).second) {
      throw DtError(Errc::structural_mismatch, "duplicate class: " + c.name);
    }
  }
  for (const auto& e : enums_) {
    if (e.literals.empty()) {
      throw DtError(Errc::structural_mismatch, "enum without literals: " + e.name);
    }
    std::set<std::string> lits(e.literals.begin(), e.literals.end());
    if (lits.size() != e.literals.size()) {
      throw DtError(Errc::structural_mismatch, "duplicate literal in enum: " + e.name);
    }
  }
  for (const auto& c : classes_) {
    for (const auto& p : c.properties) {
      if (p.kind == ValueKind::enumeration && !find_enum(p.enum_name)) {
        throw DtError(Errc::structural_mismatch,
                      "property " + c.name + "." + p.name + " uses unknown enum " + p.enum_name);
      }
    }
    for (const auto& a : c.associations) {
      if (!find_class(a.target)) {
        throw DtError(Errc::structural_mismatch,
                      "association " + c.name + "." + a.role + " targets unknown class " + a.target);
      }
      if (a.lower < 0 || (a.upper != AssociationDef::kUnbounded && a.upper < a.lower)) {
        throw DtError(Errc::structural_mismatch,
                      "bad multiplicity on " + c.name + "." + a.role);
      }
    }
  }
  for (const auto& ct : constraints_) {
    const ClassDef* cls = find_class(ct.context_class);
    if (!cls) {
      throw DtError(Errc::structural_mismatch,
                    "constraint " + ct.id + " references unknown class " + ct.context_class);
    }
    std::vector<std::string> props;
    ct.predicate.collect_properties(props);
    for (const auto& p : props) {
      if (!cls->find_property(p)) {
        throw DtError(Errc::structural_mismatch,
                      "constraint " + ct.id + " references unknown property " +
                          ct.context_class + "." + p);
      }
    }
  }
}

Json DeviceSchema::to_json() const {
  Json classes = Json::array();
  for (const auto& c : classes_) {
    Json props = Json::array();
    for (const auto& p : c.properties) {
      Json pj{{"name", p.name}, {"type", value_kind_name(p.kind)}, {"default", p.default_value}};
      if (p.kind == ValueKind::enumeration) pj["enum"] = p.enum_name;
      props.push_back(pj);
    }
    Json assocs = Json::array();
    for (const auto& a : c.associations) {
      assocs.push_back(Json{{"role", a.role},
                            {"target", a.target},
                            {"lower", a.lower},
                            {"upper", a.upper},
                            {"containment", a.containment}});
    }
    classes.push_back(Json{{"name", c.name}, {"properties", props}, {"associations", assocs}});
  }
  Json enums = Json::array();
  for (const auto& e : enums_) {
    enums.push_back(Json{{"name", e.name}, {"literals", e.literals}});
  }
  Json constraints = Json::array();
  for (const auto& ct : constraints_) {
    constraints.push_back(Json{{"id", ct.id},
                               {"context", ct.context_class},
                               {"message", ct.message},
                               {"predicate", ct.predicate.to_json()}});
  }
  return Json{{"root_class", root_class_},
              {"classes", classes},
              {"enums", enums},
              {"constraints", constraints}};
}

DeviceSchema DeviceSchema::from_json(const Json& j) {
  DeviceSchema schema;
  try {
    schema.set_root_class(j.at("root_class").get<std::string>());
    for (const auto& ej : j.at("enums")) {
      EnumDef e;
      e.name = ej.at("name").get<std::string>();
      e.literals = ej.at("literals").get<std::vector<std::string>>();
      schema.add_enum(std::move(e));
    }
    for (const auto& cj : j.at("classes")) {
      ClassDef c;
      c.name = cj.at("name").get<std::string>();
      for (const auto& pj : cj.at("properties")) {
        PropertyDef p;
        p.name = pj.at("name").get<std::string>();
        const auto kind = value_kind_from_name(pj.at("type").get<std::string>());
        if (!kind) throw DtError(Errc::parse, "unknown property type in schema json");
        p.kind = *kind;
        if (p.kind == ValueKind::enumeration) p.enum_name = pj.at("enum").get<std::string>();
        p.default_value = pj.value("default", Json());
        c.properties.push_back(std::move(p));
      }
      for (const auto& aj : cj.at("associations")) {
        AssociationDef a;
        a.role = aj.at("role").get<std::string>();
        a.target = aj.at("target").get<std::string>();
        a.lower = aj.at("lower").get<int>();
        a.upper = aj.at("upper").get<int>();
        a.containment = aj.value("containment", true);
        c.associations.push_back(std::move(a));
      }
      schema.add_class(std::move(c));
    }
    for (const auto& ctj : j.at("constraints")) {
      ConstraintDef ct;
      ct.id = ctj.at("id").get<std::string>();
      ct.context_class = ctj.at("context").get<std::string>();
      ct.message = ctj.at("message").get<std::string>();
      ct.predicate = Predicate::from_json(ctj.at("predicate"));
      schema.register_constraint(std::move(ct));
    }
  } catch (const Json::exception& e) {
    throw DtError(Errc::parse, std::string("malformed schema json: ") + e.what());
  }
  schema.validate();
  return schema;
}

// --- Builtin dispenser schema ---------------------------------------------------

DeviceSchema builtin_dispenser_schema() {
  DeviceSchema s;

  s.add_enum({"DeviceStatus", {"Good", "Test", "Defect", "Scrapped"}});
  s.add_enum({"Language", {"English", "Norwegian", "Swedish", "Danish", "German"}});
  s.add_enum({"ConnectionType", {"Cellular", "Wifi"}});

  ClassDef device;
  device.name = "Device";
  device.properties = {
      {"type", ValueKind::text, "", "dispenser"},
      {"status", ValueKind::enumeration, "DeviceStatus", "Good"},
      {"number", ValueKind::text, "", ""},
      {"location", ValueKind::text, "", "Oslo"},
      {"note", ValueKind::text, "", ""},
  };
  device.associations = {
      {"cartridge", "Cartridge", 1, 1, true},
      {"medication_plans", "MedicationPlan", 0, AssociationDef::kUnbounded, true},
      {"settings", "Setting", 1, 1, true},
  };
  s.add_class(std::move(device));

  ClassDef cartridge;
  cartridge.name = "Cartridge";
  cartridge.properties = {{"is_empty", ValueKind::boolean, "", false}};
  s.add_class(std::move(cartridge));

  ClassDef plan;
  plan.name = "MedicationPlan";
  plan.properties = {
      {"first_dose_date", ValueKind::date, "", "2023-01-01"},
      {"period_days", ValueKind::integer, "", 14},
  };
  plan.associations = {{"intake_times", "IntakeTime", 1, AssociationDef::kUnbounded, true}};
  s.add_class(std::move(plan));

  ClassDef intake;
  intake.name = "IntakeTime";
  intake.properties = {{"time", ValueKind::time_of_day, "", "09:00"}};
  intake.associations = {{"medicine_lines", "MedicationLine", 0, AssociationDef::kUnbounded, true}};
  s.add_class(std::move(intake));

  ClassDef line;
  line.name = "MedicationLine";
  line.properties = {
      {"doses", ValueKind::integer, "", 2},
      {"current_roll", ValueKind::integer, "", 9},
      {"next_roll", ValueKind::integer, "", 9},
  };
  s.add_class(std::move(line));

  ClassDef setting;
  setting.name = "Setting";
  setting.properties = {
      {"early_access_to_medication", ValueKind::integer, "", 30},
      {"language", ValueKind::enumeration, "Language", "English"},
      {"connection", ValueKind::enumeration, "ConnectionType", "Wifi"},
  };
  setting.associations = {
      {"date_and_time", "DateAndTime", 1, 1, true},
      {"display", "Display", 1, 1, true},
      {"alarm", "Alarm", 1, 1, true},
  };
  s.add_class(std::move(setting));

  ClassDef dat;
  dat.name = "DateAndTime";
  dat.properties = {
      {"date", ValueKind::date, "", "2023-01-01"},
      {"time", ValueKind::time_of_day, "", "08:00"},
  };
  s.add_class(std::move(dat));

  ClassDef display;
  display.name = "Display";
  display.properties = {
      {"brightness", ValueKind::integer, "", 3},
      {"sleep_mode", ValueKind::boolean, "", false},
      {"auto_brightness", ValueKind::boolean, "", false},
      {"volume", ValueKind::integer, "", 5},
  };
  s.add_class(std::move(display));

  ClassDef alarm;
  alarm.name = "Alarm";
  alarm.properties = {
      {"silent_mode", ValueKind::boolean, "", false},
      {"melody", ValueKind::text, "", "M1"},
      {"repetitions", ValueKind::integer, "", 2},
  };
  s.add_class(std::move(alarm));

  s.set_root_class("Device");

  s.register_constraint({"C1", "MedicationPlan", Predicate::between("period_days", 1, 28),
                         "period_days must be between 1 and 28"});
  s.register_constraint({"C2", "MedicationLine", Predicate::between("doses", 0, 9),
                         "doses must be between 0 and 9"});
  s.register_constraint({"C3", "Setting",
                         Predicate::between("early_access_to_medication", 1, 300),
                         "early_access_to_medication must be between 1 and 300"});
  s.register_constraint({"C4", "Display", Predicate::between("brightness", 1, 5),
                         "brightness must be between 1 and 5"});
  s.register_constraint({"C5", "Alarm", Predicate::at_least("repetitions", 0),
                         "repetitions must not be negative"});
  s.register_constraint({"C6", "Display", Predicate::between("volume", 0, 10),
                         "volume must be between 0 and 10"});

  s.validate();
  return s;
}

// --- Value validation -------------------------------------------------------------

void check_value_type(const DeviceSchema& schema, const ClassDef& cls,
                      const PropertyDef& prop, const Json& value,
                      const std::string& object_path, ValidationResult& out) {
  const std::string id = "T-" + cls.name + "." + prop.name;
  auto fail = [&](const std::string& why) {
    out.violations.push_back({id, cls.name + "." + prop.name + ": " + why, object_path});
  };
  switch (prop.kind) {
    case ValueKind::boolean:
      if (!value.is_boolean()) fail("expected a boolean");
      break;
    case ValueKind::integer:
      if (!value.is_number_integer()) fail("expected an integer");
      break;
    case ValueKind::text:
      if (!value.is_string()) fail("expected a string");
      break;
    case ValueKind::date:
      if (!value.is_string() || !parse_civil_date(value.get<std::string>())) {
        fail("expected an ISO-8601 date (YYYY-MM-DD)");
      }
      break;
    case ValueKind::time_of_day:
      if (!value.is_string() || !parse_time_of_day(value.get<std::string>())) {
        fail("expected a time of day (HH:MM)");
      }
      break;
    case ValueKind::enumeration: {
      const EnumDef* en = schema.find_enum(prop.enum_name);
      if (!value.is_string() || !en || !en->has_literal(value.get<std::string>())) {
        fail("expected a literal of enum " + prop.enum_name);
      }
      break;
    }
  }
}

ValidationResult validate_value(const DeviceSchema& schema, const std::string& cls,
                                const std::string& prop, const Json& value,
                                const std::function<Json(const std::string&)>& getter) {
  const ClassDef& class_def = schema.require_class(cls);
  const PropertyDef* prop_def = class_def.find_property(prop);
  if (!prop_def) {
    throw DtError(Errc::unknown_property, "unknown property: " + cls + "." + prop);
  }

  ValidationResult result;
  check_value_type(schema, class_def, *prop_def, value, "", result);
  if (!result.ok()) return result;  // a type error makes constraint evaluation moot

  auto resolve = [&](const std::string& name) -> Json {
    if (name == prop) return value;
    if (getter) {
      Json v = getter(name);
      if (!v.is_null()) return v;
    }
    const PropertyDef* other = class_def.find_property(name);
    return other ? other->default_value : Json();
  };

  for (const ConstraintDef* ct : schema.constraints_involving(cls, prop)) {
    if (!ct->predicate.evaluate(resolve)) {
      result.violations.push_back({ct->id, ct->message, ""});
    }
  }
  return result;
}

}  // namespace dtwin::model
