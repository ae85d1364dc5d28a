#include <map>
#include <stdexcept>

#include "schemex/heads.hpp"
#include "schemex/training.hpp"

namespace schemex {

namespace {

using SpanIndex = std::map<std::pair<std::size_t, std::size_t>, std::size_t>;

std::size_t lookup(const SpanIndex& index, const CharSpan& chars) {
  auto it = index.find({chars.start, chars.end});
  if (it == index.end()) {
    throw std::invalid_argument("gold span [" + std::to_string(chars.start) + ", " +
                                std::to_string(chars.end) + ") is not a candidate span");
  }
  return it->second;
}

// Positives and negatives each carry half the total weight, so a sparse
// positive is not averaged away by the O(N * W) negative spans. Entries set
// in `hard` (gold spans of sibling instances) are weighted like positives.
Tensor balanced_weights(const Tensor& targets, const Tensor* hard = nullptr) {
  std::size_t positives = 0;
  for (double t : targets.data) positives += t > 0.5 ? 1 : 0;
  const std::size_t negatives = targets.size() - positives;
  Tensor w = Tensor::vector(targets.size(), 1.0);
  if (positives == 0 || negatives == 0) return w;
  const double n = static_cast<double>(targets.size());
  const double wp = n / (2.0 * static_cast<double>(positives));
  const double wn = n / (2.0 * static_cast<double>(negatives));
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const bool emphasized = targets.data[i] > 0.5 || (hard != nullptr && hard->data[i] > 0.5);
    w.data[i] = emphasized ? wp : wn;
  }
  return w;
}

const GoldStructure* find_structure(const Example& ex, const std::string& parent) {
  for (const auto& s : ex.structures) {
    if (s.parent == parent) return &s;
  }
  return nullptr;
}

const GoldClassification* find_classification(const Example& ex, const std::string& task) {
  for (const auto& c : ex.classifications) {
    if (c.task == task) return &c;
  }
  return nullptr;
}

}  // namespace

Var build_loss(Graph& g, const Model& model, const Example& example, LossReport* report,
               std::size_t max_len) {
  const Schema& schema = example.schema;
  const PromptPlan plan = compose_tasks(schema, example.text, model.vocab, max_len);
  const Var hidden = encode(g, model, plan);

  std::vector<Var> terms;
  std::vector<std::string> names;
  auto add_term = [&](std::string name, Var v) {
    names.push_back(std::move(name));
    terms.push_back(v);
  };

  const bool needs_spans = schema.entity_task.has_value() || !schema.structure_tasks.empty();
  std::vector<heads::TokenRange> ranges;
  SpanIndex span_index;
  Var span_reps{};
  if (needs_spans) {
    ranges = heads::enumerate_spans(plan.text_len, model.config.max_span_width);
    const auto candidates = heads::span_candidates(plan, ranges);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      span_index.emplace(std::pair{candidates[i].chars.start, candidates[i].chars.end}, i);
    }
    span_reps = heads::span_representations(g, model, hidden, plan, ranges);
  }

  if (schema.entity_task) {
    const auto& types = schema.entity_task->entities;
    Tensor targets = Tensor::matrix(ranges.size(), types.size());
    for (const auto& gold : example.entities) {
      for (std::size_t j = 0; j < types.size(); ++j) {
        if (types[j].label == gold.label) targets(lookup(span_index, gold.chars), j) = 1.0;
      }
    }
    const auto positions = plan.element_positions(TaskKind::Entities, 0);
    const Var logits =
        heads::match_logits(g, span_reps, heads::prompt_embeddings(g, hidden, positions));
    add_term("entities", ops::bce_with_logits(g, logits, targets, balanced_weights(targets)));
  }

  for (std::size_t t = 0; t < schema.classification_tasks.size(); ++t) {
    const auto& spec = schema.classification_tasks[t];
    const GoldClassification* gold = find_classification(example, spec.task_name);
    if (gold == nullptr) continue;
    const auto positions = plan.element_positions(TaskKind::Classification, t);
    const Var logits = heads::classification_logits(
        g, model, heads::prompt_embeddings(g, hidden, positions));
    if (spec.multi_label) {
      Tensor targets = Tensor::matrix(spec.labels.size(), 1);
      for (std::size_t i = 0; i < spec.labels.size(); ++i) {
        for (const auto& l : gold->labels) {
          if (l == spec.labels[i].label) targets.data[i] = 1.0;
        }
      }
      add_term("classification:" + spec.task_name, ops::bce_with_logits(g, logits, targets));
    } else {
      if (gold->labels.size() != 1) {
        throw std::invalid_argument("single-label task '" + spec.task_name + "' needs one gold label");
      }
      std::size_t target = spec.labels.size();
      for (std::size_t i = 0; i < spec.labels.size(); ++i) {
        if (spec.labels[i].label == gold->labels.front()) target = i;
      }
      add_term("classification:" + spec.task_name, ops::softmax_cross_entropy(g, logits, target));
    }
  }

  for (std::size_t t = 0; t < schema.structure_tasks.size(); ++t) {
    const auto& spec = schema.structure_tasks[t];
    const GoldStructure* gold = find_structure(example, spec.parent_name);
    const std::size_t count = gold == nullptr ? 0 : gold->instances.size();

    const std::size_t p_pos[] = {plan.prompt_position(TaskKind::Structure, t)};
    const Var prompt = heads::prompt_embeddings(g, hidden, p_pos);
    add_term("count:" + spec.parent_name,
             ops::softmax_cross_entropy(g, heads::count_logits(g, model, prompt),
                                        std::min(count, kMaxInstances)));
    if (count == 0 || ranges.empty()) continue;

    const auto positions = plan.element_positions(TaskKind::Structure, t);
    const Var fields = heads::prompt_embeddings(g, hidden, positions);
    const std::size_t used = std::min(count, kMaxInstances);
    auto instance_targets = [&](std::size_t i) {
      Tensor targets = Tensor::matrix(ranges.size(), spec.fields.size());
      for (const auto& [field, spans] : gold->instances[i].fields) {
        for (std::size_t j = 0; j < spec.fields.size(); ++j) {
          if (spec.fields[j].name != field) continue;
          for (const auto& chars : spans) targets(lookup(span_index, chars), j) = 1.0;
        }
      }
      return targets;
    };
    std::vector<Tensor> all_targets;
    for (std::size_t i = 0; i < used; ++i) all_targets.push_back(instance_targets(i));
    std::vector<Var> per_instance;
    for (std::size_t i = 0; i < used; ++i) {
      const Tensor& targets = all_targets[i];
      Tensor siblings = Tensor::matrix(ranges.size(), spec.fields.size());
      for (std::size_t o = 0; o < used; ++o) {
        if (o == i) continue;
        for (std::size_t e = 0; e < siblings.size(); ++e) {
          if (all_targets[o].data[e] > 0.5) siblings.data[e] = 1.0;
        }
      }
      const Var logits =
          heads::match_logits(g, span_reps, heads::conditioned_fields(g, model, fields, i));
      per_instance.push_back(
          ops::bce_with_logits(g, logits, targets, balanced_weights(targets, &siblings)));
    }
    add_term("fields:" + spec.parent_name,
             ops::scale(g, ops::sum(g, per_instance), 1.0 / static_cast<double>(used)));
  }

  const Var total = ops::sum(g, terms);
  if (report != nullptr) {
    report->terms.clear();
    for (std::size_t i = 0; i < terms.size(); ++i) {
      report->terms.emplace_back(names[i], g.value(terms[i]).data[0]);
    }
    report->total = g.value(total).data[0];
  }
  return total;
}

LossReport total_loss(const Model& model, const Example& example, std::size_t max_len) {
  Graph g(false);
  LossReport report;
  build_loss(g, model, example, &report, max_len);
  return report;
}

GradientResult backward(const Model& model, const Example& example, std::size_t max_len) {
  Graph g(true);
  GradientResult out;
  const Var loss = build_loss(g, model, example, &out.loss, max_len);
  g.backward(loss);
  for (const auto& [name, t] : model.params) out.grads.emplace(name, Tensor(t.shape, 0.0));
  g.accumulate_parameter_grads(out.grads);
  return out;
}

}  // namespace schemex
