#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "schemex/errors.hpp"

namespace schemex {

enum class FieldKind { Str, List };

/// One attribute of a structure, usually written in the field DSL:
///
///   name[::type][::[opt1|opt2|...]][::description]
///
/// where type is `str` or `list`. The type token and the choice list may
/// appear in either order; everything after the last of them is the
/// description, verbatim (it may itself contain "::").
struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::Str;
  std::optional<std::string> description;
  std::optional<std::vector<std::string>> choices;

  bool operator==(const FieldSpec&) const = default;
};

struct EntitySpec {
  std::string label;
  std::optional<std::string> description;

  bool operator==(const EntitySpec&) const = default;
};

struct EntityTask {
  std::string task_label = "entities";
  std::vector<EntitySpec> entities;

  bool operator==(const EntityTask&) const = default;
};

struct ClassLabel {
  std::string label;
  std::optional<std::string> description;

  bool operator==(const ClassLabel&) const = default;
};

struct ClassificationSpec {
  std::string task_name;
  std::vector<ClassLabel> labels;
  bool multi_label = false;
  double threshold = 0.5;

  bool operator==(const ClassificationSpec&) const = default;
};

struct StructureSpec {
  std::string parent_name;
  std::vector<FieldSpec> fields;

  bool operator==(const StructureSpec&) const = default;
};

struct Schema {
  std::optional<EntityTask> entity_task;
  std::vector<ClassificationSpec> classification_tasks;
  std::vector<StructureSpec> structure_tasks;

  std::size_t task_count() const {
    return (entity_task ? 1 : 0) + classification_tasks.size() + structure_tasks.size();
  }

  bool operator==(const Schema&) const = default;
};

/// Throws DslError (EmptyName, InvalidName, UnknownTypeToken, MalformedChoices).
FieldSpec parse_field_dsl(std::string_view spec);

/// Canonical DSL form: name, then the choice list if any, then the type
/// token, then the description if any. Parsing the result yields `field`.
std::string render_field_dsl(const FieldSpec& field);

/// Checks the invariants of a single field; paths are relative to `path`.
void validate_field(const FieldSpec& field, const std::string& path,
                    std::vector<Violation>& out);

/// Every invariant violation in `schema`; empty means valid.
std::vector<Violation> validate_schema(const Schema& schema);

std::string schema_to_json(const Schema& schema, int indent = -1);

/// Throws ParseError for malformed documents and SchemaInvalid when the
/// document is well formed but violates schema invariants.
Schema json_to_schema(std::string_view doc);

}  // namespace schemex
