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

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/jsonio.hpp"

namespace dtwin::model {

// Scalar kinds a property slot can hold. Dates and times of day are ISO-8601
// strings on a timezone-free calendar shared with the virtual clock.
enum class ValueKind { boolean, integer, text, date, time_of_day, enumeration };

const char* value_kind_name(ValueKind kind);
std::optional<ValueKind> value_kind_from_name(const std::string& name);

struct PropertyDef {
  std::string name;
  ValueKind kind = ValueKind::text;
  std::string enum_name;  // set when kind == enumeration
  Json default_value;
};

// Containment association towards another class. upper == kUnbounded means *.
struct AssociationDef {
  static constexpr int kUnbounded = -1;

  std::string role;    // slot/JSON key, e.g. "medication_plans"
  std::string target;  // class name
  int lower = 0;
  int upper = kUnbounded;
  bool containment = true;

  bool many() const { return upper == kUnbounded || upper > 1; }
};

struct ClassDef {
  std::string name;
  std::vector<PropertyDef> properties;
  std::vector<AssociationDef> associations;

  const PropertyDef* find_property(const std::string& prop) const;
  const AssociationDef* find_association(const std::string& role) const;
};

struct EnumDef {
  std::string name;
  std::vector<std::string> literals;

  bool has_literal(const std::string& literal) const;
};

// --- Constraint predicates ------------------------------------------------
//
// Constraints are small expression trees over the properties of one context
// class: comparisons between a property and a literal (or another property),
// combined with and/or/not.

enum class CompareOp { lt, le, gt, ge, eq, ne };

struct Operand {
  bool is_property = false;
  std::string property;
  Json literal;

  static Operand prop(std::string name);
  static Operand value(Json v);
};

class Predicate {
 public:
  enum class Kind { compare, logical_and, logical_or, logical_not };

  Predicate() = default;  // an empty comparison; assign before use

  static Predicate compare(Operand lhs, CompareOp op, Operand rhs);
  static Predicate all_of(std::vector<Predicate> children);
  static Predicate any_of(std::vector<Predicate> children);
  static Predicate negate(Predicate child);

  // Range helper used by the shipped constraints: lo <= prop <= hi.
  static Predicate between(const std::string& prop, std::int64_t lo, std::int64_t hi);
  static Predicate at_least(const std::string& prop, std::int64_t lo);

  Kind kind() const { return kind_; }
  bool mentions(const std::string& prop) const;
  void collect_properties(std::vector<std::string>& out) const;

  // getter resolves a property name to its current value.
  bool evaluate(const std::function<Json(const std::string&)>& getter) const;

  // Integral bounds implied on a property by this predicate, when the
  // predicate is a conjunction of comparisons against integer literals.
  // Used by the request generator to aim inside/outside valid ranges.
  struct Bounds {
    std::optional<std::int64_t> lower;
    std::optional<std::int64_t> upper;
  };
  Bounds implied_bounds(const std::string& prop) const;

  Json to_json() const;
  static Predicate from_json(const Json& j);

 private:
  Kind kind_ = Kind::compare;
  CompareOp op_ = CompareOp::eq;
  Operand lhs_, rhs_;
  std::vector<Predicate> children_;
};

struct ConstraintDef {
  std::string id;             // e.g. "C1"
  std::string context_class;  // e.g. "MedicationPlan"
  Predicate predicate;
  std::string message;
};

// --- Validation results ----------------------------------------------------

struct Violation {
  std::string constraint_id;
  std::string message;
  std::string object_path;  // empty for value-level checks

  Json to_json() const;
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  Json to_json() const;
};

// --- Schema -----------------------------------------------------------------

class DeviceSchema {
 public:
  DeviceSchema() = default;

  void set_root_class(const std::string& name) { root_class_ = name; }
  void add_class(ClassDef cls);
  void add_enum(EnumDef en);
  void register_constraint(ConstraintDef constraint);

  const std::string& root_class() const { return root_class_; }
  const std::vector<ClassDef>& classes() const { return classes_; }
  const std::vector<EnumDef>& enums() const { return enums_; }
  const std::vector<ConstraintDef>& constraints() const { return constraints_; }

  const ClassDef* find_class(const std::string& name) const;
  const EnumDef* find_enum(const std::string& name) const;
  const ClassDef& require_class(const std::string& name) const;  // throws unknown_class

  std::vector<const ConstraintDef*> constraints_for(const std::string& cls) const;
  std::vector<const ConstraintDef*> constraints_involving(const std::string& cls,
                                                          const std::string& prop) const;

  // Structural invariants: exactly one root, association targets declared,
  // constraints reference declared classes/properties, enums well formed.
  // Throws DtError{structural_mismatch} on the first failure.
  void validate() const;

  Json to_json() const;
  static DeviceSchema from_json(const Json& j);

 private:
  std::string root_class_;
  std::vector<ClassDef> classes_;
  std::vector<EnumDef> enums_;
  std::vector<ConstraintDef> constraints_;
};

// The shipped medicine-dispenser domain model with constraints C1..C6.
DeviceSchema builtin_dispenser_schema();

// Checks the type of `value` against the property definition (kind, enum
// membership, date/time format). Violations use constraint id "T-<Class>.<prop>".
void check_value_type(const DeviceSchema& schema, const ClassDef& cls,
                      const PropertyDef& prop, const Json& value,
                      const std::string& object_path, ValidationResult& out);

// Evaluates every registered constraint that involves `prop`, with `prop`
// bound to `value` and all other referenced properties taking the values
// supplied by `getter` (defaults when getter is null).
// Throws DtError{unknown_class|unknown_property}.
ValidationResult validate_value(
    const DeviceSchema& schema, const std::string& cls, const std::string& prop,
    const Json& value,
    const std::function<Json(const std::string&)>& getter = nullptr);

}  // namespace dtwin::model
