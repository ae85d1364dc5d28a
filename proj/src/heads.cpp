#include "schemex/heads.hpp"

#include <algorithm>
#include <cmath>

namespace schemex::heads {

namespace {

Var param(Graph& g, const Model& model, const std::string& name) {
  return g.parameter(name, model.params.at(name));
}

Var mlp(Graph& g, const Model& model, const std::string& prefix, Var x) {
  const Var h = ops::gelu(g, ops::linear(g, x, param(g, model, prefix + "w1"),
                                         param(g, model, prefix + "b1")));
  return ops::linear(g, h, param(g, model, prefix + "w2"), param(g, model, prefix + "b2"));
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<TokenRange> enumerate_spans(std::size_t text_len, std::size_t max_width) {
  std::vector<TokenRange> out;
  for (std::size_t i = 0; i < text_len; ++i) {
    for (std::size_t j = i; j < text_len && j - i + 1 <= max_width; ++j) out.push_back({i, j});
  }
  return out;
}

std::vector<SpanCandidate> span_candidates(const PromptPlan& plan,
                                           std::span<const TokenRange> spans) {
  std::vector<SpanCandidate> out;
  out.reserve(spans.size());
  for (const auto& s : spans) {
    out.push_back({s.start, s.end, {plan.text.offsets.at(s.start).start, plan.text.offsets.at(s.end).end}});
  }
  return out;
}

Var span_representations(Graph& g, const Model& model, Var hidden, const PromptPlan& plan,
                         std::span<const TokenRange> spans) {
  std::vector<std::size_t> starts(spans.size());
  std::vector<std::size_t> ends(spans.size());
  for (std::size_t i = 0; i < spans.size(); ++i) {
    starts[i] = plan.text_start + spans[i].start;
    ends[i] = plan.text_start + spans[i].end;
  }
  const Var endpoints =
      ops::concat_cols(g, ops::gather_rows(g, hidden, starts), ops::gather_rows(g, hidden, ends));
  return mlp(g, model, "heads.span.", endpoints);
}

Var prompt_embeddings(Graph& g, Var hidden, std::span<const std::size_t> positions) {
  return ops::gather_rows(g, hidden, positions);
}

Var match_logits(Graph& g, Var span_reps, Var type_embeds) {
  return ops::matmul_nt(g, span_reps, type_embeds);
}

Var count_logits(Graph& g, const Model& model, Var prompt_embed) {
  return mlp(g, model, "heads.count.", prompt_embed);
}

Var conditioned_fields(Graph& g, const Model& model, Var field_embeds, std::size_t instance) {
  if (instance >= model.config.max_count) {
    throw Error("CountOutOfRange", "instance index " + std::to_string(instance) +
                                       " outside the occurrence table");
  }
  const std::size_t row[] = {instance};
  const Var occurrence = ops::gather_rows(g, param(g, model, "heads.occurrence.table"), row);
  return mlp(g, model, "heads.occurrence.", ops::add_row(g, field_embeds, occurrence));
}

Var classification_logits(Graph& g, const Model& model, Var label_embeds) {
  return mlp(g, model, "heads.cls.", label_embeds);
}

Tensor entity_scores(const Tensor& span_reps, const Tensor& type_embeds) {
  Graph g(false);
  Tensor p = g.value(match_logits(g, g.constant(span_reps), g.constant(type_embeds)));
  for (double& x : p.data) x = sigmoid(x);
  return p;
}

std::size_t argmax_count(std::span<const double> logits) {
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

CountPrediction predict_count(const Model& model, const Tensor& prompt_embed) {
  Graph g(false);
  Tensor embed = prompt_embed;
  embed.shape = {1, prompt_embed.size()};
  const Tensor& logits = g.value(count_logits(g, model, g.constant(std::move(embed))));
  CountPrediction out{logits.data, 0};
  out.k_hat = argmax_count(out.logits);
  return out;
}

Tensor occurrence_conditioned_fields(const Model& model, const Tensor& field_embeds, std::size_t k) {
  if (k > model.config.max_count) {
    throw Error("CountOutOfRange", "count " + std::to_string(k) + " exceeds " +
                                       std::to_string(model.config.max_count));
  }
  const std::size_t m = field_embeds.rows();
  const std::size_t d = field_embeds.cols();
  Tensor out({k, m, d});
  Graph g(false);
  const Var fields = g.constant(field_embeds);
  for (std::size_t i = 0; i < k; ++i) {
    const Tensor& cond = g.value(conditioned_fields(g, model, fields, i));
    std::copy(cond.data.begin(), cond.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(i * m * d));
  }
  return out;
}

std::vector<double> classification_logits(const Model& model, const Tensor& label_embeds) {
  Graph g(false);
  return g.value(classification_logits(g, model, g.constant(label_embeds))).data;
}

}  // namespace schemex::heads
