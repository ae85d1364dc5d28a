#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "schemex/heads.hpp"
#include "schemex/model.hpp"
#include "schemex/schema.hpp"

namespace schemex {

inline constexpr int kResultFormatVersion = 1;
inline constexpr double kDefaultThreshold = 0.5;

struct SpanResult {
  std::string text;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  double score = 0.0;

  bool operator==(const SpanResult&) const = default;
};

struct ClassificationResult {
  bool multi_label = false;
  /// Exactly one entry for single-label tasks; any number for multi-label.
  std::vector<std::string> labels;
  /// (label, probability) in schema order.
  std::vector<std::pair<std::string, double>> probabilities;
};

/// Str fields hold one span, List fields a non-empty list.
using FieldValue = std::variant<SpanResult, std::vector<SpanResult>>;

struct StructureInstance {
  /// Present fields only, in schema order.
  std::vector<std::pair<std::string, FieldValue>> fields;

  const FieldValue* find(std::string_view field) const;
};

struct ExtractionResult {
  /// Present iff the schema has an entity task; every declared label has an
  /// entry, possibly empty.
  std::optional<std::vector<std::pair<std::string, std::vector<SpanResult>>>> entities;
  std::vector<std::pair<std::string, ClassificationResult>> classifications;
  std::vector<std::pair<std::string, std::vector<StructureInstance>>> structures;
  /// Predicted instance count per structure task.
  std::vector<std::pair<std::string, std::size_t>> structure_counts;
  /// Encoder forward passes spent on this call.
  std::uint64_t encoder_passes = 0;

  const std::vector<SpanResult>* entity(std::string_view label) const;
  const ClassificationResult* classification(std::string_view task) const;
  const std::vector<StructureInstance>* structure(std::string_view name) const;
};

struct RunOptions {
  double threshold = kDefaultThreshold;
  std::size_t max_len = kDefaultMaxLen;
};

/// Every (span, type) with probability > threshold; per type sorted by
/// char_start, then descending score.
std::vector<std::pair<std::string, std::vector<SpanResult>>> decode_entities(
    const Tensor& probs, std::span<const heads::SpanCandidate> spans,
    std::span<const std::string> labels, std::string_view source,
    double threshold = kDefaultThreshold);

/// `instance_probs[i]` is the [spans x fields] probability matrix for
/// instance i (k_hat = instance_probs.size()).
std::vector<StructureInstance> decode_structures(std::span<const Tensor> instance_probs,
                                                 std::span<const heads::SpanCandidate> spans,
                                                 const StructureSpec& spec,
                                                 std::string_view source,
                                                 double threshold = kDefaultThreshold);

ClassificationResult decode_classification(std::span<const double> logits,
                                           const ClassificationSpec& spec);

/// Runs every task of `schema` on `text` from a single encoder pass.
/// Throws SchemaInvalid or ContextOverflow.
ExtractionResult run_schema(const Model& model, const Schema& schema, std::string_view text,
                            const RunOptions& options = {}, PassCounter* counter = nullptr);

std::string result_to_json(const ExtractionResult& result, int indent = -1);

}  // namespace schemex
