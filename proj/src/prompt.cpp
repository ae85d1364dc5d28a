#include "schemex/prompt.hpp"

#include "json.hpp"

namespace schemex {

namespace {

void append_text(PromptFragment& frag, const Vocabulary& vocab, std::string_view text) {
  for (const auto& piece : split_pieces(text)) {
    frag.ids.push_back(vocab.id(text.substr(piece.start, piece.end - piece.start)));
  }
}

void append_token(PromptFragment& frag, const Vocabulary& vocab, std::string_view token) {
  frag.ids.push_back(vocab.id(token));
}

void append_element(PromptFragment& frag, const Vocabulary& vocab, TokenId marker, Role role,
                    TaskKind kind, std::size_t task, std::size_t element, std::string owner,
                    std::string_view label) {
  if (split_pieces(label).empty()) {
    throw Error("EmptyLabel", "'" + owner + "' renders to no tokens");
  }
  frag.bindings.push_back({frag.ids.size(), role, kind, task, element, std::move(owner)});
  frag.ids.push_back(marker);
  append_text(frag, vocab, label);
}

void append_description(PromptFragment& frag, const Vocabulary& vocab,
                        const std::optional<std::string>& description) {
  if (!description) return;
  append_token(frag, vocab, ":");
  append_text(frag, vocab, *description);
}

void open_task(PromptFragment& frag, const Vocabulary& vocab, TaskKind kind, std::size_t task,
               std::string owner, std::string_view name) {
  if (split_pieces(name).empty()) throw Error("EmptyLabel", "task '" + owner + "' has no name");
  frag.bindings.push_back({0, Role::Prompt, kind, task, 0, std::move(owner)});
  frag.ids.push_back(special::kPrompt);
  append_text(frag, vocab, name);
  append_token(frag, vocab, "(");
}

}  // namespace

const char* role_name(Role role) {
  switch (role) {
    case Role::Prompt:
      return "P";
    case Role::Entity:
      return "E";
    case Role::Child:
      return "C";
    case Role::Label:
      return "L";
  }
  return "?";
}

std::size_t PromptPlan::prompt_position(TaskKind kind, std::size_t task) const {
  for (const auto& b : bindings) {
    if (b.role == Role::Prompt && b.kind == kind && b.task == task) return b.position;
  }
  throw std::out_of_range("task not present in prompt plan");
}

std::vector<std::size_t> PromptPlan::element_positions(TaskKind kind, std::size_t task) const {
  std::vector<std::size_t> out;
  for (const auto& b : bindings) {
    if (b.role != Role::Prompt && b.kind == kind && b.task == task) out.push_back(b.position);
  }
  return out;
}

PromptFragment compile_entity_prompt(const EntityTask& task, const Vocabulary& vocab) {
  if (task.entities.empty()) throw Error("EmptyLabel", "entity task has no entity types");
  PromptFragment frag;
  open_task(frag, vocab, TaskKind::Entities, 0, "entities", task.task_label);
  for (std::size_t i = 0; i < task.entities.size(); ++i) {
    const auto& e = task.entities[i];
    append_element(frag, vocab, special::kEntity, Role::Entity, TaskKind::Entities, 0, i,
                   "entities[" + std::to_string(i) + "]", e.label);
    append_description(frag, vocab, e.description);
  }
  append_token(frag, vocab, ")");
  return frag;
}

PromptFragment compile_structure_prompt(const StructureSpec& spec, std::size_t index,
                                        const Vocabulary& vocab) {
  PromptFragment frag;
  const std::string owner = "structures[" + std::to_string(index) + "]";
  open_task(frag, vocab, TaskKind::Structure, index, owner, spec.parent_name);
  for (std::size_t i = 0; i < spec.fields.size(); ++i) {
    const auto& f = spec.fields[i];
    append_element(frag, vocab, special::kChild, Role::Child, TaskKind::Structure, index, i,
                   owner + ".fields[" + std::to_string(i) + "]", f.name);
    if (f.choices) {
      append_token(frag, vocab, "[");
      for (std::size_t c = 0; c < f.choices->size(); ++c) {
        if (c > 0) append_token(frag, vocab, "|");
        append_text(frag, vocab, (*f.choices)[c]);
      }
      append_token(frag, vocab, "]");
    }
    append_description(frag, vocab, f.description);
  }
  append_token(frag, vocab, ")");
  return frag;
}

PromptFragment compile_classification_prompt(const ClassificationSpec& spec, std::size_t index,
                                             const Vocabulary& vocab) {
  PromptFragment frag;
  const std::string owner = "classifications[" + std::to_string(index) + "]";
  open_task(frag, vocab, TaskKind::Classification, index, owner, spec.task_name);
  for (std::size_t i = 0; i < spec.labels.size(); ++i) {
    const auto& l = spec.labels[i];
    append_element(frag, vocab, special::kLabel, Role::Label, TaskKind::Classification, index,
                   i, owner + ".labels[" + std::to_string(i) + "]", l.label);
    append_description(frag, vocab, l.description);
  }
  append_token(frag, vocab, ")");
  return frag;
}

PromptPlan assemble_plan(const std::vector<PromptFragment>& fragments, std::string_view text,
                         const Vocabulary& vocab, std::size_t max_len) {
  PromptPlan plan;
  for (const auto& frag : fragments) {
    const std::size_t base = plan.ids.size();
    plan.ids.insert(plan.ids.end(), frag.ids.begin(), frag.ids.end());
    for (auto b : frag.bindings) {
      b.position += base;
      plan.bindings.push_back(std::move(b));
    }
    plan.ids.push_back(special::kSep);
  }
  plan.text = tokenize(vocab, text);
  plan.text_start = plan.ids.size();
  plan.text_len = plan.text.size();
  const std::size_t needed = plan.text_start + plan.text_len;
  if (needed > max_len) throw ContextOverflow(needed, max_len);
  plan.ids.insert(plan.ids.end(), plan.text.ids.begin(), plan.text.ids.end());
  return plan;
}

PromptPlan compose_tasks(const Schema& schema, std::string_view text, const Vocabulary& vocab,
                         std::size_t max_len) {
  if (auto violations = validate_schema(schema); !violations.empty()) {
    throw SchemaInvalid(std::move(violations));
  }
  std::vector<PromptFragment> fragments;
  if (schema.entity_task) fragments.push_back(compile_entity_prompt(*schema.entity_task, vocab));
  for (std::size_t i = 0; i < schema.classification_tasks.size(); ++i) {
    fragments.push_back(compile_classification_prompt(schema.classification_tasks[i], i, vocab));
  }
  for (std::size_t i = 0; i < schema.structure_tasks.size(); ++i) {
    fragments.push_back(compile_structure_prompt(schema.structure_tasks[i], i, vocab));
  }
  return assemble_plan(fragments, text, vocab, max_len);
}

std::string plan_to_json(const PromptPlan& plan, const Vocabulary& vocab, int indent) {
  nlohmann::ordered_json doc;
  auto tokens = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < plan.ids.size(); ++i) {
    if (i >= plan.text_start) {
      tokens.push_back(std::string(plan.text.surface(i - plan.text_start)));
    } else {
      tokens.push_back(vocab.token(plan.ids[i]));
    }
  }
  doc["tokens"] = std::move(tokens);
  doc["ids"] = plan.ids;
  auto bindings = nlohmann::ordered_json::array();
  for (const auto& b : plan.bindings) {
    bindings.push_back({{"position", b.position}, {"role", role_name(b.role)}, {"owner", b.owner}});
  }
  doc["bindings"] = std::move(bindings);
  doc["text_start"] = plan.text_start;
  doc["text_len"] = plan.text_len;
  auto offsets = nlohmann::ordered_json::array();
  for (const auto& o : plan.text.offsets) offsets.push_back({o.start, o.end});
  doc["source_offsets"] = std::move(offsets);
  return doc.dump(indent);
}

}  // namespace schemex
