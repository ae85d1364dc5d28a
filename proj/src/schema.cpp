#include "schemex/schema.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "json.hpp"

namespace schemex {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::string_view kSep = "::";
constexpr std::string_view kForbiddenNameChars = "()[]|:";

std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool is_blank(std::string_view s) { return trim(s).empty(); }

std::vector<std::string_view> split_segments(std::string_view spec) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t hit = spec.find(kSep, pos);
    if (hit == std::string_view::npos) {
      out.push_back(spec.substr(pos));
      return out;
    }
    out.push_back(spec.substr(pos, hit - pos));
    pos = hit + kSep.size();
  }
}

bool is_type_token(std::string_view seg) {
  seg = trim(seg);
  return seg == "str" || seg == "list";
}

bool is_choice_segment(std::string_view seg) { return trim(seg).starts_with('['); }

std::vector<std::string> parse_choices(std::string_view seg) {
  seg = trim(seg);
  if (seg.size() < 2 || seg.back() != ']') {
    throw DslError("MalformedChoices", "choice list must be enclosed in [ ]");
  }
  const std::string_view inner = seg.substr(1, seg.size() - 2);
  std::vector<std::string> options;
  std::size_t pos = 0;
  while (true) {
    const std::size_t bar = inner.find('|', pos);
    const std::string_view raw =
        bar == std::string_view::npos ? inner.substr(pos) : inner.substr(pos, bar - pos);
    const std::string_view opt = trim(raw);
    if (opt.empty()) throw DslError("MalformedChoices", "empty choice option");
    if (opt.find_first_of("[]") != std::string_view::npos) {
      throw DslError("MalformedChoices", "choice option contains a bracket");
    }
    if (std::find(options.begin(), options.end(), opt) != options.end()) {
      throw DslError("MalformedChoices", "duplicate choice option '" + std::string(opt) + "'");
    }
    options.emplace_back(opt);
    if (bar == std::string_view::npos) break;
    pos = bar + 1;
  }
  if (options.size() < 2) {
    throw DslError("MalformedChoices", "a choice list needs at least two options");
  }
  return options;
}

std::string join_segments(const std::vector<std::string_view>& segs, std::size_t from) {
  std::string out;
  for (std::size_t i = from; i < segs.size(); ++i) {
    if (i > from) out += kSep;
    out += segs[i];
  }
  return out;
}

std::optional<std::string> optional_text(const ordered_json& value, const std::string& path) {
  if (value.is_null()) return std::nullopt;
  if (!value.is_string()) throw ParseError(path + ": expected string or null", 0, 0);
  return value.get<std::string>();
}

const ordered_json& require(const ordered_json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + ": missing required key \"" + key + "\"", 0, 0);
  return *it;
}

void reject_unknown_keys(const ordered_json& obj, std::initializer_list<std::string_view> known,
                         const std::string& path) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ParseError(path + ": unknown key \"" + key + "\"", 0, 0);
    }
  }
}

std::pair<std::size_t, std::size_t> line_column(std::string_view doc, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, doc.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (doc[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

}  // namespace

FieldSpec parse_field_dsl(std::string_view spec) {
  const auto segs = split_segments(spec);

  FieldSpec field;
  const std::string_view name = trim(segs.front());
  if (name.empty()) throw DslError("EmptyName", "field name is empty");
  if (name.find_first_of(kForbiddenNameChars) != std::string_view::npos) {
    throw DslError("InvalidName", "field name '" + std::string(name) +
                                      "' contains one of ( ) [ ] | :");
  }
  field.name = std::string(name);

  // Modifiers occupy every segment up to the last recognized one.
  std::size_t last_modifier = 0;
  for (std::size_t i = 1; i < segs.size(); ++i) {
    if (is_type_token(segs[i]) || is_choice_segment(segs[i])) last_modifier = i;
  }

  bool saw_type = false;
  for (std::size_t i = 1; i <= last_modifier; ++i) {
    if (is_type_token(segs[i])) {
      if (saw_type) throw DslError("UnknownTypeToken", "type given twice");
      saw_type = true;
      field.kind = trim(segs[i]) == "list" ? FieldKind::List : FieldKind::Str;
    } else if (is_choice_segment(segs[i])) {
      if (field.choices) throw DslError("UnknownTypeToken", "choice list given twice");
      field.choices = parse_choices(segs[i]);
    } else {
      throw DslError("UnknownTypeToken",
                     "'" + std::string(trim(segs[i])) + "' is not str, list, or [choices]");
    }
  }

  if (last_modifier + 1 < segs.size()) {
    const std::string desc = join_segments(segs, last_modifier + 1);
    const std::string_view trimmed = trim(desc);
    if (!trimmed.empty()) field.description = std::string(trimmed);
  }
  return field;
}

std::string render_field_dsl(const FieldSpec& field) {
  std::string out = field.name;
  if (field.choices) {
    out += "::[";
    for (std::size_t i = 0; i < field.choices->size(); ++i) {
      if (i > 0) out += '|';
      out += (*field.choices)[i];
    }
    out += ']';
  }
  out += field.kind == FieldKind::List ? "::list" : "::str";
  if (field.description) {
    out += kSep;
    out += *field.description;
  }
  return out;
}

void validate_field(const FieldSpec& field, const std::string& path, std::vector<Violation>& out) {
  if (is_blank(field.name)) {
    out.push_back({path, "field name is empty"});
  } else if (field.name.find_first_of(kForbiddenNameChars) != std::string::npos) {
    out.push_back({path, "field name contains one of ( ) [ ] | :"});
  } else if (trim(field.name) != field.name) {
    out.push_back({path, "field name has surrounding whitespace"});
  }
  if (field.choices) {
    const auto& opts = *field.choices;
    if (opts.size() < 2) out.push_back({path, "choices need at least two options"});
    std::set<std::string> seen;
    for (const auto& opt : opts) {
      if (is_blank(opt) || opt.find_first_of("[]|") != std::string::npos ||
          opt.find(kSep) != std::string::npos) {
        out.push_back({path, "malformed choice option '" + opt + "'"});
      }
      if (!seen.insert(opt).second) out.push_back({path, "duplicate choice option '" + opt + "'"});
    }
  }
}

std::vector<Violation> validate_schema(const Schema& schema) {
  std::vector<Violation> out;
  if (schema.task_count() == 0) {
    out.push_back({"", "schema declares no tasks"});
    return out;
  }

  std::set<std::string> task_names;
  auto claim_task_name = [&](const std::string& name, const std::string& path) {
    if (is_blank(name)) {
      out.push_back({path, "task name is empty"});
    } else if (!task_names.insert(name).second) {
      out.push_back({path, "duplicate task name '" + name + "'"});
    }
  };

  if (schema.entity_task) {
    const auto& task = *schema.entity_task;
    claim_task_name(task.task_label, "entities");
    if (task.entities.empty()) out.push_back({"entities", "entity task has no entity types"});
    std::set<std::string> labels;
    for (std::size_t i = 0; i < task.entities.size(); ++i) {
      const std::string path = "entities[" + std::to_string(i) + "]";
      const auto& label = task.entities[i].label;
      if (is_blank(label)) {
        out.push_back({path, "entity label is empty"});
      } else if (!labels.insert(label).second) {
        out.push_back({path, "duplicate entity label '" + label + "'"});
      }
    }
  }

  for (std::size_t t = 0; t < schema.classification_tasks.size(); ++t) {
    const auto& task = schema.classification_tasks[t];
    const std::string path = "classifications[" + std::to_string(t) + "]";
    claim_task_name(task.task_name, path);
    if (task.labels.size() < 2) out.push_back({path + ".labels", "needs at least two labels"});
    std::set<std::string> labels;
    for (std::size_t i = 0; i < task.labels.size(); ++i) {
      const std::string lpath = path + ".labels[" + std::to_string(i) + "]";
      const auto& label = task.labels[i].label;
      if (is_blank(label)) {
        out.push_back({lpath, "label is empty"});
      } else if (!labels.insert(label).second) {
        out.push_back({lpath, "duplicate label '" + label + "'"});
      }
    }
    if (!(task.threshold >= 0.0 && task.threshold <= 1.0)) {
      out.push_back({path + ".threshold", "threshold must lie in [0, 1]"});
    }
  }

  for (std::size_t s = 0; s < schema.structure_tasks.size(); ++s) {
    const auto& structure = schema.structure_tasks[s];
    const std::string path = "structures[" + std::to_string(s) + "]";
    claim_task_name(structure.parent_name, path);
    if (structure.fields.empty()) out.push_back({path + ".fields", "structure has no fields"});
    std::set<std::string> names;
    for (std::size_t f = 0; f < structure.fields.size(); ++f) {
      const std::string fpath = path + ".fields[" + std::to_string(f) + "]";
      validate_field(structure.fields[f], fpath, out);
      if (!names.insert(structure.fields[f].name).second) {
        out.push_back({fpath, "duplicate field name '" + structure.fields[f].name + "'"});
      }
    }
  }
  return out;
}

std::string schema_to_json(const Schema& schema, int indent) {
  ordered_json doc;
  doc["version"] = 1;
  if (schema.entity_task) {
    ordered_json entities = ordered_json::object();
    for (const auto& e : schema.entity_task->entities) {
      entities[e.label] = e.description ? ordered_json(*e.description) : ordered_json(nullptr);
    }
    doc["entities"] = std::move(entities);
  }
  if (!schema.classification_tasks.empty()) {
    ordered_json tasks = ordered_json::array();
    for (const auto& c : schema.classification_tasks) {
      ordered_json labels = ordered_json::object();
      for (const auto& l : c.labels) {
        labels[l.label] = l.description ? ordered_json(*l.description) : ordered_json(nullptr);
      }
      tasks.push_back({{"task", c.task_name},
                       {"labels", std::move(labels)},
                       {"multi_label", c.multi_label},
                       {"threshold", c.threshold}});
    }
    doc["classifications"] = std::move(tasks);
  }
  if (!schema.structure_tasks.empty()) {
    ordered_json structures = ordered_json::array();
    for (const auto& s : schema.structure_tasks) {
      ordered_json fields = ordered_json::array();
      for (const auto& f : s.fields) fields.push_back(render_field_dsl(f));
      structures.push_back({{"name", s.parent_name}, {"fields", std::move(fields)}});
    }
    doc["structures"] = std::move(structures);
  }
  return doc.dump(indent);
}

Schema json_to_schema(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, column] = line_column(text, e.byte);
    throw ParseError("malformed JSON at line " + std::to_string(line) + ", column " +
                         std::to_string(column),
                     line, column);
  }
  if (!doc.is_object()) throw ParseError("schema document must be a JSON object", 0, 0);
  reject_unknown_keys(doc, {"version", "entities", "classifications", "structures"}, "$");

  const auto& version = require(doc, "version", "$");
  if (!version.is_number_integer() || version.get<long long>() != 1) {
    throw ParseError("$.version: unsupported schema version (expected 1)", 0, 0);
  }

  Schema schema;
  std::vector<Violation> violations;

  if (auto it = doc.find("entities"); it != doc.end()) {
    if (!it->is_object()) throw ParseError("$.entities: expected object", 0, 0);
    EntityTask task;
    for (const auto& [label, desc] : it->items()) {
      task.entities.push_back({label, optional_text(desc, "$.entities." + label)});
    }
    schema.entity_task = std::move(task);
  }

  if (auto it = doc.find("classifications"); it != doc.end()) {
    if (!it->is_array()) throw ParseError("$.classifications: expected array", 0, 0);
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& item = (*it)[i];
      const std::string path = "$.classifications[" + std::to_string(i) + "]";
      if (!item.is_object()) throw ParseError(path + ": expected object", 0, 0);
      reject_unknown_keys(item, {"task", "labels", "multi_label", "threshold"}, path);
      ClassificationSpec spec;
      const auto& task = require(item, "task", path);
      if (!task.is_string()) throw ParseError(path + ".task: expected string", 0, 0);
      spec.task_name = task.get<std::string>();
      const auto& labels = require(item, "labels", path);
      if (!labels.is_object()) throw ParseError(path + ".labels: expected object", 0, 0);
      for (const auto& [label, desc] : labels.items()) {
        spec.labels.push_back({label, optional_text(desc, path + ".labels." + label)});
      }
      if (auto ml = item.find("multi_label"); ml != item.end()) {
        if (!ml->is_boolean()) throw ParseError(path + ".multi_label: expected boolean", 0, 0);
        spec.multi_label = ml->get<bool>();
      }
      if (auto th = item.find("threshold"); th != item.end()) {
        if (!th->is_number()) throw ParseError(path + ".threshold: expected number", 0, 0);
        spec.threshold = th->get<double>();
      }
      schema.classification_tasks.push_back(std::move(spec));
    }
  }

  if (auto it = doc.find("structures"); it != doc.end()) {
    if (!it->is_array()) throw ParseError("$.structures: expected array", 0, 0);
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& item = (*it)[i];
      const std::string path = "$.structures[" + std::to_string(i) + "]";
      if (!item.is_object()) throw ParseError(path + ": expected object", 0, 0);
      reject_unknown_keys(item, {"name", "fields"}, path);
      StructureSpec spec;
      const auto& name = require(item, "name", path);
      if (!name.is_string()) throw ParseError(path + ".name: expected string", 0, 0);
      spec.parent_name = name.get<std::string>();
      const auto& fields = require(item, "fields", path);
      if (!fields.is_array()) throw ParseError(path + ".fields: expected array", 0, 0);
      for (std::size_t f = 0; f < fields.size(); ++f) {
        const std::string fpath = "structures[" + std::to_string(i) + "].fields[" +
                                  std::to_string(f) + "]";
        if (!fields[f].is_string()) throw ParseError("$." + fpath + ": expected string", 0, 0);
        try {
          spec.fields.push_back(parse_field_dsl(fields[f].get<std::string>()));
        } catch (const DslError& e) {
          violations.push_back({fpath, e.kind() + ": " + e.what()});
        }
      }
      schema.structure_tasks.push_back(std::move(spec));
    }
  }

  if (violations.empty()) violations = validate_schema(schema);
  if (!violations.empty()) throw SchemaInvalid(std::move(violations));
  return schema;
}

}  // namespace schemex
