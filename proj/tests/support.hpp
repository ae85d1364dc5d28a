#pragma once

// Shared fixtures and oracles for the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "schemex/training.hpp"

namespace schemex::test {

/// Byte range of the `nth` occurrence of `word` in `text`.
inline CharSpan span_of(const std::string& text, const std::string& word, std::size_t nth = 0) {
  std::size_t pos = text.find(word);
  for (std::size_t i = 0; i < nth && pos != std::string::npos; ++i) pos = text.find(word, pos + 1);
  if (pos == std::string::npos) throw std::invalid_argument("'" + word + "' not in text");
  return {pos, pos + word.size()};
}

inline Schema product_schema() {
  Schema s;
  s.structure_tasks.push_back({"product", {parse_field_dsl("name::str"), parse_field_dsl("price::str")}});
  return s;
}

inline ClassificationSpec sentiment_spec() {
  return {"sentiment", {{"positive", {}}, {"negative", {}}, {"neutral", {}}}, false, 0.5};
}

inline ClassificationSpec topics_spec() {
  return {"topics", {{"technology", {}}, {"travel", {}}, {"business", {}}}, true, 0.5};
}

/// One example that touches every head: entity typing, single- and
/// multi-label classification, and a two-instance structure.
inline Example all_heads_example() {
  Example ex;
  ex.text = "Steve Jobs loved the iPhone. iPhone costs $999. Galaxy is $899.";
  ex.schema.entity_task = EntityTask{"entities", {{"person", {}}, {"product", {}}}};
  ex.schema.classification_tasks = {sentiment_spec(), topics_spec()};
  ex.schema.structure_tasks = product_schema().structure_tasks;
  ex.entities = {{"person", span_of(ex.text, "Steve Jobs")},
                 {"product", span_of(ex.text, "iPhone")},
                 {"product", span_of(ex.text, "iPhone", 1)},
                 {"product", span_of(ex.text, "Galaxy")}};
  ex.classifications = {{"sentiment", {"positive"}}, {"topics", {"technology", "business"}}};
  GoldStructure product{"product", {}};
  product.instances.push_back({{{"name", {span_of(ex.text, "iPhone", 1)}},
                                {"price", {span_of(ex.text, "$999")}}}});
  product.instances.push_back({{{"name", {span_of(ex.text, "Galaxy")}},
                                {"price", {span_of(ex.text, "$899")}}}});
  ex.structures = {product};
  return ex;
}

inline Vocabulary small_vocab() {
  std::vector<std::string> corpus = corpus_strings(generate_synthetic(1, 60));
  corpus.push_back(all_heads_example().text);
  return build_vocab(corpus, 512, prompt_sugar_tokens());
}

inline Model small_model(std::uint64_t seed = 3, std::size_t d = 16, std::size_t layers = 2,
                         std::size_t heads = 2) {
  ModelConfig cfg;
  cfg.hidden_dim = d;
  cfg.layers = layers;
  cfg.heads = heads;
  cfg.ffn_dim = 2 * d;
  cfg.max_positions = 256;
  cfg.seed = seed;
  return make_model(cfg, small_vocab());
}

struct GradCheckReport {
  std::size_t coordinates = 0;
  /// Coordinates where both gradients sit below the finite-difference
  /// resolution (the attention key bias, whose true gradient is 0).
  std::size_t below_resolution = 0;
  double max_relative_error = 0.0;
  std::string worst;
  std::set<std::string> tensors;
};

/// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps exactly
/// zero gradients (where both sides are rounding noise) from dividing by 0.
inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

/// Central finite differences of total_loss against the analytic gradient.
/// Every tensor gets one coordinate first, then the rest are drawn at random.
/// A difference quotient cannot resolve gradients below a few ulps of the
/// loss over 2 * eps; coordinates where both sides are under that level
/// agree by definition and are counted separately.
inline GradCheckReport gradient_check(Model model, const Example& ex, std::size_t coordinates,
                                      std::uint64_t seed, double eps = 1e-5) {
  const GradientResult analytic = backward(model, ex);
  std::vector<std::string> names;
  for (const auto& [name, _] : model.params) names.push_back(name);

  std::mt19937_64 rng(seed);
  std::vector<std::pair<std::string, std::size_t>> picks;
  for (const auto& name : names) {
    const std::size_t n = model.params.at(name).size();
    picks.emplace_back(name, std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  }
  while (picks.size() < coordinates) {
    const auto& name = names[std::uniform_int_distribution<std::size_t>(0, names.size() - 1)(rng)];
    const std::size_t n = model.params.at(name).size();
    picks.emplace_back(name, std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  }

  const double loss = analytic.loss.total;
  const double resolution = 4.0 * std::numeric_limits<double>::epsilon() * std::abs(loss) / (2.0 * eps);

  GradCheckReport report;
  for (const auto& [name, index] : picks) {
    double& w = model.params.at(name).data[index];
    const double saved = w;
    w = saved + eps;
    const double up = total_loss(model, ex).total;
    w = saved - eps;
    const double down = total_loss(model, ex).total;
    w = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic.grads.at(name).data[index];
    report.tensors.insert(name);
    ++report.coordinates;
    if (std::abs(a) <= resolution && std::abs(numeric) <= resolution) {
      ++report.below_resolution;
      continue;
    }
    const double err = relative_error(a, numeric);
    if (err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst = name + "[" + std::to_string(index) + "] analytic " + std::to_string(a) +
                     " numeric " + std::to_string(numeric);
    }
  }
  return report;
}

/// Softmax computed independently of the library.
inline std::vector<double> softmax_oracle(const std::vector<double>& logits) {
  double m = logits.front();
  for (double x : logits) m = std::max(m, x);
  double z = 0.0;
  for (double x : logits) z += std::exp(x - m);
  std::vector<double> out;
  for (double x : logits) out.push_back(std::exp(x - m) / z);
  return out;
}

}  // namespace schemex::test
