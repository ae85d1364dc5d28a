#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "schemex/schema.hpp"
#include "schemex/tokenizer.hpp"

namespace schemex {

inline constexpr std::size_t kDefaultMaxLen = 512;

enum class Role { Prompt, Entity, Child, Label };

enum class TaskKind { Entities, Classification, Structure };

/// Where a special token landed and which schema element it stands for.
/// `task` indexes the task within its kind (always 0 for the entity task);
/// `element` indexes the entity/label/field inside the task (0 for [P]).
struct Binding {
  std::size_t position = 0;
  Role role = Role::Prompt;
  TaskKind kind = TaskKind::Entities;
  std::size_t task = 0;
  std::size_t element = 0;
  std::string owner;

  bool operator==(const Binding&) const = default;
};

/// A task prompt before it is placed in a full sequence; binding positions
/// are relative to the start of `ids`.
struct PromptFragment {
  std::vector<TokenId> ids;
  std::vector<Binding> bindings;
};

struct PromptPlan {
  std::vector<TokenId> ids;
  std::vector<Binding> bindings;
  std::size_t text_start = 0;
  std::size_t text_len = 0;
  TokenSeq text;

  /// Position of the [P] token of a task.
  std::size_t prompt_position(TaskKind kind, std::size_t task) const;
  /// Positions of the element tokens ([E], [C] or [L]) of a task, in order.
  std::vector<std::size_t> element_positions(TaskKind kind, std::size_t task) const;
};

/// Throws Error("EmptyLabel") when there is nothing to render.
PromptFragment compile_entity_prompt(const EntityTask& task, const Vocabulary& vocab);
PromptFragment compile_structure_prompt(const StructureSpec& spec, std::size_t index,
                                        const Vocabulary& vocab);
PromptFragment compile_classification_prompt(const ClassificationSpec& spec, std::size_t index,
                                             const Vocabulary& vocab);

/// Task prompts in canonical order (entity task, classifications,
/// structures), each closed by [SEP], followed by the text tokens.
/// Throws SchemaInvalid or ContextOverflow.
PromptPlan compose_tasks(const Schema& schema, std::string_view text, const Vocabulary& vocab,
                         std::size_t max_len = kDefaultMaxLen);

/// Joins fragments with [SEP] after each and appends `text`. No schema
/// validation; used by compose_tasks and by the per-label latency baseline.
PromptPlan assemble_plan(const std::vector<PromptFragment>& fragments, std::string_view text,
                         const Vocabulary& vocab, std::size_t max_len);

/// Debug dump of a plan (token strings, bindings, text region).
std::string plan_to_json(const PromptPlan& plan, const Vocabulary& vocab, int indent = 2);

const char* role_name(Role role);

}  // namespace schemex
