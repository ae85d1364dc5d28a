#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <string>

#include "schemex/autograd.hpp"
#include "schemex/prompt.hpp"
#include "schemex/tokenizer.hpp"

namespace schemex {

/// Number of count classes; counts 0..19.
inline constexpr std::size_t kMaxCount = 20;

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden_dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ffn_dim = 128;
  std::size_t max_positions = 512;
  std::size_t max_span_width = 8;
  std::size_t max_count = kMaxCount;
  std::uint64_t seed = 7;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Parameters, configuration and vocabulary. Immutable during inference, so
/// one Model may serve any number of concurrent extraction calls.
struct Model {
  ModelConfig config;
  Vocabulary vocab;
  TensorMap params;
};

/// Counts encoder forward passes. Safe to share between threads.
class PassCounter {
 public:
  void increment() { count_.fetch_add(1, std::memory_order_relaxed); }
  std::uint64_t value() const { return count_.load(std::memory_order_relaxed); }

 private:
  std::atomic<std::uint64_t> count_{0};
};

/// Zero-mean normal weights with standard deviation 1/sqrt(hidden_dim),
/// layer-norm gains 1, every bias 0. Deterministic in cfg.seed.
TensorMap init_params(const ModelConfig& cfg);

/// Builds a fresh model around `vocab` (cfg.vocab_size is overwritten).
Model make_model(ModelConfig cfg, Vocabulary vocab);

/// Head parameters train at the head learning rate, everything else at the
/// backbone rate.
bool is_head_parameter(const std::string& name);

/// Pre-layer-norm bidirectional transformer over the whole plan; returns the
/// [len x hidden_dim] hidden states. Throws Error("SequenceTooLong").
Var encode(Graph& g, const Model& model, const PromptPlan& plan, PassCounter* counter = nullptr);

/// Forward-only convenience wrapper.
Tensor encode(const Model& model, const PromptPlan& plan, PassCounter* counter = nullptr);

}  // namespace schemex
