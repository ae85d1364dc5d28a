#include "schemex/decode.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "json.hpp"

namespace schemex {

namespace {

using ordered_json = nlohmann::ordered_json;

SpanResult make_span(const heads::SpanCandidate& span, std::string_view source, double score) {
  return {std::string(source.substr(span.chars.start, span.chars.end - span.chars.start)),
          span.chars.start, span.chars.end, score};
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

bool matches_choice(const FieldSpec& field, std::string_view text) {
  if (!field.choices) return true;
  return std::any_of(field.choices->begin(), field.choices->end(),
                     [&](const std::string& c) { return iequals(c, text); });
}

ordered_json span_json(const SpanResult& s) {
  return {{"text", s.text}, {"char_start", s.char_start}, {"char_end", s.char_end}, {"score", s.score}};
}

Tensor sigmoid_of(const Tensor& logits) {
  Tensor out = logits;
  for (double& x : out.data) x = heads::sigmoid(x);
  return out;
}

template <typename T>
const T* find_by_key(const std::vector<std::pair<std::string, T>>& items, std::string_view key) {
  for (const auto& [k, v] : items) {
    if (k == key) return &v;
  }
  return nullptr;
}

}  // namespace

const FieldValue* StructureInstance::find(std::string_view field) const {
  return find_by_key(fields, field);
}

const std::vector<SpanResult>* ExtractionResult::entity(std::string_view label) const {
  return entities ? find_by_key(*entities, label) : nullptr;
}

const ClassificationResult* ExtractionResult::classification(std::string_view task) const {
  return find_by_key(classifications, task);
}

const std::vector<StructureInstance>* ExtractionResult::structure(std::string_view name) const {
  return find_by_key(structures, name);
}

std::vector<std::pair<std::string, std::vector<SpanResult>>> decode_entities(
    const Tensor& probs, std::span<const heads::SpanCandidate> spans,
    std::span<const std::string> labels, std::string_view source, double threshold) {
  std::vector<std::pair<std::string, std::vector<SpanResult>>> out;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    std::vector<SpanResult> found;
    for (std::size_t i = 0; i < spans.size(); ++i) {
      const double p = probs(i, j);
      if (p > threshold) found.push_back(make_span(spans[i], source, p));
    }
    std::stable_sort(found.begin(), found.end(), [](const SpanResult& a, const SpanResult& b) {
      if (a.char_start != b.char_start) return a.char_start < b.char_start;
      return a.score > b.score;
    });
    out.emplace_back(labels[j], std::move(found));
  }
  return out;
}

std::vector<StructureInstance> decode_structures(std::span<const Tensor> instance_probs,
                                                 std::span<const heads::SpanCandidate> spans,
                                                 const StructureSpec& spec,
                                                 std::string_view source, double threshold) {
  std::vector<StructureInstance> out;
  for (const Tensor& probs : instance_probs) {
    StructureInstance instance;
    for (std::size_t j = 0; j < spec.fields.size(); ++j) {
      const FieldSpec& field = spec.fields[j];
      auto eligible = [&](std::size_t i) {
        const auto& c = spans[i].chars;
        return matches_choice(field, source.substr(c.start, c.end - c.start));
      };
      if (field.kind == FieldKind::Str) {
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < spans.size(); ++i) {
          if (!eligible(i)) continue;
          const bool better =
              !best || probs(i, j) > probs(*best, j) ||
              (probs(i, j) == probs(*best, j) && spans[i].chars.start < spans[*best].chars.start);
          if (better) best = i;
        }
        if (best && probs(*best, j) > threshold) {
          instance.fields.emplace_back(field.name, make_span(spans[*best], source, probs(*best, j)));
        }
      } else {
        std::vector<SpanResult> values;
        for (std::size_t i = 0; i < spans.size(); ++i) {
          if (eligible(i) && probs(i, j) > threshold) {
            values.push_back(make_span(spans[i], source, probs(i, j)));
          }
        }
        std::stable_sort(values.begin(), values.end(),
                         [](const SpanResult& a, const SpanResult& b) { return a.char_start < b.char_start; });
        if (!values.empty()) instance.fields.emplace_back(field.name, std::move(values));
      }
    }
    if (!instance.fields.empty()) out.push_back(std::move(instance));
  }
  return out;
}

ClassificationResult decode_classification(std::span<const double> logits,
                                           const ClassificationSpec& spec) {
  ClassificationResult out;
  out.multi_label = spec.multi_label;
  if (spec.multi_label) {
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const double p = heads::sigmoid(logits[i]);
      out.probabilities.emplace_back(spec.labels[i].label, p);
      if (p >= spec.threshold) out.labels.push_back(spec.labels[i].label);
    }
    return out;
  }
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double x : logits) total += std::exp(x - max_logit);
  std::size_t best = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.probabilities.emplace_back(spec.labels[i].label, std::exp(logits[i] - max_logit) / total);
    if (logits[i] > logits[best]) best = i;
  }
  out.labels.push_back(spec.labels[best].label);
  return out;
}

ExtractionResult run_schema(const Model& model, const Schema& schema, std::string_view text,
                            const RunOptions& options, PassCounter* counter) {
  const PromptPlan plan = compose_tasks(schema, text, model.vocab, options.max_len);

  ExtractionResult result;
  PassCounter local;
  Graph g(false);
  const Var hidden = encode(g, model, plan, &local);
  if (counter != nullptr) counter->increment();

  const bool needs_spans = schema.entity_task.has_value() || !schema.structure_tasks.empty();
  std::vector<heads::TokenRange> ranges;
  std::vector<heads::SpanCandidate> spans;
  Var span_reps{};
  if (needs_spans && plan.text_len > 0) {
    ranges = heads::enumerate_spans(plan.text_len, model.config.max_span_width);
    spans = heads::span_candidates(plan, ranges);
    span_reps = heads::span_representations(g, model, hidden, plan, ranges);
  }

  if (schema.entity_task) {
    std::vector<std::string> labels;
    for (const auto& e : schema.entity_task->entities) labels.push_back(e.label);
    Tensor probs = Tensor::matrix(0, labels.size());
    if (!spans.empty()) {
      const auto positions = plan.element_positions(TaskKind::Entities, 0);
      const Var embeds = heads::prompt_embeddings(g, hidden, positions);
      probs = sigmoid_of(g.value(heads::match_logits(g, span_reps, embeds)));
    }
    result.entities = decode_entities(probs, spans, labels, text, options.threshold);
  }

  for (std::size_t t = 0; t < schema.classification_tasks.size(); ++t) {
    const auto& spec = schema.classification_tasks[t];
    const auto positions = plan.element_positions(TaskKind::Classification, t);
    const Var embeds = heads::prompt_embeddings(g, hidden, positions);
    const Tensor& logits = g.value(heads::classification_logits(g, model, embeds));
    result.classifications.emplace_back(spec.task_name, decode_classification(logits.data, spec));
  }

  for (std::size_t t = 0; t < schema.structure_tasks.size(); ++t) {
    const auto& spec = schema.structure_tasks[t];
    const std::size_t p_pos[] = {plan.prompt_position(TaskKind::Structure, t)};
    const Var prompt = heads::prompt_embeddings(g, hidden, p_pos);
    const std::size_t k_hat = heads::argmax_count(g.value(heads::count_logits(g, model, prompt)).data);
    result.structure_counts.emplace_back(spec.parent_name, k_hat);

    std::vector<Tensor> instance_probs;
    if (!spans.empty()) {
      const auto positions = plan.element_positions(TaskKind::Structure, t);
      const Var fields = heads::prompt_embeddings(g, hidden, positions);
      for (std::size_t i = 0; i < k_hat; ++i) {
        const Var cond = heads::conditioned_fields(g, model, fields, i);
        instance_probs.push_back(sigmoid_of(g.value(heads::match_logits(g, span_reps, cond))));
      }
    }
    result.structures.emplace_back(
        spec.parent_name, decode_structures(instance_probs, spans, spec, text, options.threshold));
  }

  result.encoder_passes = local.value();
  return result;
}

std::string result_to_json(const ExtractionResult& result, int indent) {
  ordered_json doc;
  doc["format_version"] = kResultFormatVersion;
  if (result.entities) {
    ordered_json entities = ordered_json::object();
    for (const auto& [label, spans] : *result.entities) {
      ordered_json list = ordered_json::array();
      for (const auto& s : spans) list.push_back(span_json(s));
      entities[label] = std::move(list);
    }
    doc["entities"] = std::move(entities);
  }
  if (!result.classifications.empty()) {
    ordered_json tasks = ordered_json::object();
    for (const auto& [task, r] : result.classifications) {
      ordered_json probs = ordered_json::object();
      for (const auto& [label, p] : r.probabilities) probs[label] = p;
      ordered_json entry;
      entry["multi_label"] = r.multi_label;
      if (!r.multi_label) entry["label"] = r.labels.front();
      entry["labels"] = r.labels;
      entry["probabilities"] = std::move(probs);
      tasks[task] = std::move(entry);
    }
    doc["classifications"] = std::move(tasks);
  }
  if (!result.structures.empty()) {
    ordered_json structures = ordered_json::object();
    for (const auto& [name, instances] : result.structures) {
      ordered_json list = ordered_json::array();
      for (const auto& inst : instances) {
        ordered_json obj = ordered_json::object();
        for (const auto& [field, value] : inst.fields) {
          if (const auto* one = std::get_if<SpanResult>(&value)) {
            obj[field] = span_json(*one);
          } else {
            ordered_json values = ordered_json::array();
            for (const auto& s : std::get<std::vector<SpanResult>>(value)) values.push_back(span_json(s));
            obj[field] = std::move(values);
          }
        }
        list.push_back(std::move(obj));
      }
      structures[name] = std::move(list);
    }
    doc["structures"] = std::move(structures);
  }
  ordered_json meta;
  meta["encoder_passes"] = result.encoder_passes;
  ordered_json counts = ordered_json::object();
  for (const auto& [name, k] : result.structure_counts) counts[name] = k;
  meta["structure_counts"] = std::move(counts);
  doc["meta"] = std::move(meta);
  return doc.dump(indent);
}

}  // namespace schemex
