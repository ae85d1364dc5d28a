#include <algorithm>
#include <set>

#include "json.hpp"
#include "schemex/decode.hpp"
#include "schemex/evalbench.hpp"

namespace schemex {

namespace {

std::string joined_labels(std::vector<std::string> labels) {
  std::sort(labels.begin(), labels.end());
  std::string out;
  for (const auto& l : labels) {
    if (!out.empty()) out += '|';
    out += l;
  }
  return out;
}

std::string field_label(const std::string& parent, std::size_t instance, const std::string& field) {
  return parent + "[" + std::to_string(instance) + "]." + field;
}

}  // namespace

PrecisionRecall span_f1(std::span<const LabeledSpan> predicted, std::span<const LabeledSpan> gold) {
  const std::set<LabeledSpan> pred(predicted.begin(), predicted.end());
  const std::set<LabeledSpan> ref(gold.begin(), gold.end());
  if (pred.empty() && ref.empty()) return {1.0, 1.0, 1.0};
  if (pred.empty() || ref.empty()) return {0.0, 0.0, 0.0};
  std::size_t hits = 0;
  for (const auto& s : pred) hits += ref.count(s);
  PrecisionRecall out;
  out.precision = static_cast<double>(hits) / static_cast<double>(pred.size());
  out.recall = static_cast<double>(hits) / static_cast<double>(ref.size());
  out.f1 = hits == 0 ? 0.0 : 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

double accuracy(std::span<const std::string> predicted, std::span<const std::string> gold) {
  if (predicted.size() != gold.size()) {
    throw Error("LengthMismatch", "accuracy over " + std::to_string(predicted.size()) +
                                      " predictions and " + std::to_string(gold.size()) + " labels");
  }
  if (gold.empty()) return 1.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predicted[i] == gold[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

EvalReport evaluate(const Model& model, const std::vector<Example>& corpus, std::size_t max_len) {
  std::vector<LabeledSpan> pred_spans;
  std::vector<LabeledSpan> gold_spans;
  std::vector<std::string> pred_labels;
  std::vector<std::string> gold_labels;
  std::size_t counts_right = 0;
  std::size_t counts_total = 0;

  RunOptions options;
  options.max_len = max_len;
  for (std::size_t e = 0; e < corpus.size(); ++e) {
    const Example& ex = corpus[e];
    // Example index keeps identical spans of different examples apart.
    const std::string tag = "#" + std::to_string(e) + ":";
    const ExtractionResult r = run_schema(model, ex.schema, ex.text, options);

    for (const auto& g : ex.entities) gold_spans.push_back({tag + g.label, g.chars.start, g.chars.end});
    if (r.entities) {
      for (const auto& [label, spans] : *r.entities) {
        for (const auto& s : spans) pred_spans.push_back({tag + label, s.char_start, s.char_end});
      }
    }

    for (const auto& gs : ex.structures) {
      for (std::size_t i = 0; i < gs.instances.size(); ++i) {
        for (const auto& [field, spans] : gs.instances[i].fields) {
          for (const auto& c : spans) {
            gold_spans.push_back({tag + field_label(gs.parent, i, field), c.start, c.end});
          }
        }
      }
      ++counts_total;
      for (const auto& [name, k] : r.structure_counts) {
        if (name == gs.parent && k == gs.instances.size()) ++counts_right;
      }
    }
    for (const auto& [name, instances] : r.structures) {
      for (std::size_t i = 0; i < instances.size(); ++i) {
        for (const auto& [field, value] : instances[i].fields) {
          const std::string label = tag + field_label(name, i, field);
          if (const auto* one = std::get_if<SpanResult>(&value)) {
            pred_spans.push_back({label, one->char_start, one->char_end});
          } else {
            for (const auto& s : std::get<std::vector<SpanResult>>(value)) {
              pred_spans.push_back({label, s.char_start, s.char_end});
            }
          }
        }
      }
    }

    for (const auto& gc : ex.classifications) {
      gold_labels.push_back(joined_labels(gc.labels));
      const ClassificationResult* pc = r.classification(gc.task);
      pred_labels.push_back(pc == nullptr ? std::string("<missing>") : joined_labels(pc->labels));
    }
  }

  EvalReport report;
  report.examples = corpus.size();
  report.spans = span_f1(pred_spans, gold_spans);
  report.gold_spans = gold_spans.size();
  report.predicted_spans = pred_spans.size();
  report.classification_items = gold_labels.size();
  report.classification_accuracy = accuracy(pred_labels, gold_labels);
  report.count_accuracy =
      counts_total == 0 ? 1.0 : static_cast<double>(counts_right) / static_cast<double>(counts_total);
  return report;
}

std::string eval_to_json(const EvalReport& report, int indent) {
  nlohmann::ordered_json doc;
  doc["examples"] = report.examples;
  doc["span_precision"] = report.spans.precision;
  doc["span_recall"] = report.spans.recall;
  doc["span_f1"] = report.spans.f1;
  doc["gold_spans"] = report.gold_spans;
  doc["predicted_spans"] = report.predicted_spans;
  doc["classification_accuracy"] = report.classification_accuracy;
  doc["classification_items"] = report.classification_items;
  doc["count_accuracy"] = report.count_accuracy;
  return doc.dump(indent);
}

}  // namespace schemex
