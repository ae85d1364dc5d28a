#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "schemex/autograd.hpp"
#include "schemex/model.hpp"
#include "schemex/prompt.hpp"

namespace schemex::heads {

/// Inclusive token range relative to the start of the text region.
struct TokenRange {
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const TokenRange&) const = default;
};

struct SpanCandidate {
  std::size_t start_token = 0;
  std::size_t end_token = 0;
  CharSpan chars;
};

struct CountPrediction {
  std::vector<double> logits;
  std::size_t k_hat = 0;
};

/// Every (i, j) with 0 <= i <= j < text_len and j - i + 1 <= max_width, in
/// lexicographic order.
std::vector<TokenRange> enumerate_spans(std::size_t text_len, std::size_t max_width);

/// Character extent of each span taken from the plan's text offsets.
std::vector<SpanCandidate> span_candidates(const PromptPlan& plan,
                                           std::span<const TokenRange> spans);

/// rep = W2 * gelu(W1 * [H[start] ; H[end]] + b1) + b2, one row per span.
Var span_representations(Graph& g, const Model& model, Var hidden, const PromptPlan& plan,
                         std::span<const TokenRange> spans);

/// Rows of `hidden` at the given sequence positions (prompt-token embeddings).
Var prompt_embeddings(Graph& g, Var hidden, std::span<const std::size_t> positions);

/// Span-type logits [spans x types]; probabilities are their sigmoids.
Var match_logits(Graph& g, Var span_reps, Var type_embeds);

/// Two-layer GELU MLP over the [P] embedding, 20 logits.
Var count_logits(Graph& g, const Model& model, Var prompt_embed);

/// FFN(field_embeds + occurrence[instance]); [m x d]. Throws
/// Error("CountOutOfRange") when instance >= 20.
Var conditioned_fields(Graph& g, const Model& model, Var field_embeds, std::size_t instance);

/// Shared two-layer MLP applied per label embedding; [labels x 1].
Var classification_logits(Graph& g, const Model& model, Var label_embeds);

// Tensor-level entry points (no gradient tracking).

/// P[i][j] = sigmoid(reps[i] . embeds[j]).
Tensor entity_scores(const Tensor& span_reps, const Tensor& type_embeds);

/// k_hat is the argmax of the logits, ties toward the smaller count.
std::size_t argmax_count(std::span<const double> logits);

CountPrediction predict_count(const Model& model, const Tensor& prompt_embed);

/// Shape {k, m, d}. Throws Error("CountOutOfRange") when k > 20.
Tensor occurrence_conditioned_fields(const Model& model, const Tensor& field_embeds, std::size_t k);

std::vector<double> classification_logits(const Model& model, const Tensor& label_embeds);

double sigmoid(double x);

}  // namespace schemex::heads
