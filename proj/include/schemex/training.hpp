#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "schemex/autograd.hpp"
#include "schemex/model.hpp"
#include "schemex/schema.hpp"

namespace schemex {

// ---------------------------------------------------------------------------
// Examples
// ---------------------------------------------------------------------------

struct GoldEntity {
  std::string label;
  CharSpan chars;

  bool operator==(const GoldEntity&) const = default;
};

struct GoldInstance {
  /// field name -> gold spans (exactly one for Str fields).
  std::vector<std::pair<std::string, std::vector<CharSpan>>> fields;

  bool operator==(const GoldInstance&) const = default;
};

struct GoldStructure {
  std::string parent;
  /// In order of appearance in the text.
  std::vector<GoldInstance> instances;

  bool operator==(const GoldStructure&) const = default;
};

struct GoldClassification {
  std::string task;
  std::vector<std::string> labels;

  bool operator==(const GoldClassification&) const = default;
};

struct Example {
  std::string text;
  Schema schema;
  std::vector<GoldEntity> entities;
  std::vector<GoldStructure> structures;
  std::vector<GoldClassification> classifications;

  bool operator==(const Example&) const = default;
};

/// Largest instance count the count head can represent.
inline constexpr std::size_t kMaxInstances = 19;

/// Violations of the example invariants: schema valid, every gold span on
/// token boundaries and no wider than `max_span_width`, gold labels declared
/// in the schema, at most 19 instances per structure.
std::vector<std::string> validate_example(const Example& example, std::size_t max_span_width);

std::string example_to_json(const Example& example);
Example example_from_json(const std::string& line);

/// One example per line. Throws ParseError (with the line number) on bad input.
std::vector<Example> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::vector<Example>& corpus, const std::filesystem::path& path);

/// Deterministic templated corpus: NER sentences, product/price structures
/// with 0-3 instances, single- and multi-label classification and composed
/// examples. The first examples are always the four canonical sentences
/// ("John works in Paris", "iPhone costs $999. Galaxy is $899.",
/// "This movie is amazing!", "Steve Jobs loved the iPhone").
std::vector<Example> generate_synthetic(std::uint64_t seed, std::size_t n);

/// Texts, schema names and labels of a corpus, for vocabulary building.
std::vector<std::string> corpus_strings(const std::vector<Example>& corpus);

/// Prompt punctuation and keywords that must always be in the vocabulary.
const std::vector<std::string>& prompt_sugar_tokens();

// ---------------------------------------------------------------------------
// Losses and gradients
// ---------------------------------------------------------------------------

struct LossReport {
  double total = 0.0;
  /// (term, value): "entities", "classification:<task>", "count:<name>",
  /// "fields:<name>".
  std::vector<std::pair<std::string, double>> terms;
};

/// Builds the summed task loss of `example` on `g` and returns the scalar
/// node. Entity and field terms are mean binary cross-entropy over every
/// (span, type) pair; counts use 20-way cross-entropy; single-label tasks
/// softmax cross-entropy; multi-label tasks mean binary cross-entropy.
Var build_loss(Graph& g, const Model& model, const Example& example, LossReport* report = nullptr,
               std::size_t max_len = kDefaultMaxLen);

LossReport total_loss(const Model& model, const Example& example,
                      std::size_t max_len = kDefaultMaxLen);

struct GradientResult {
  LossReport loss;
  /// Same names and shapes as model.params; unused tensors are zero.
  TensorMap grads;
};

GradientResult backward(const Model& model, const Example& example,
                        std::size_t max_len = kDefaultMaxLen);

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 10;
  double lr_backbone = 7e-4;
  double lr_heads = 1.4e-3;
  double weight_decay = 0.01;
  std::size_t warmup_steps = 100;
  double grad_clip = 1.0;
  std::size_t batch_size = 2;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t max_len = kDefaultMaxLen;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

struct AdamState {
  TensorMap first_moment;
  TensorMap second_moment;
};

/// Linear warmup from base/warmup at step 1 to base at step `warmup`, then
/// constant.
double scheduled_lr(double base, std::size_t step, std::size_t warmup_steps);

struct StepInfo {
  double grad_norm = 0.0;
  double applied_norm = 0.0;
  double lr_backbone = 0.0;
  double lr_heads = 0.0;
};

/// One AdamW update (step >= 1): global-norm clipping, moment update with
/// bias correction, decoupled weight decay.
StepInfo optimizer_step(TensorMap& params, const TensorMap& grads, AdamState& state,
                        const TrainConfig& cfg, std::size_t step);

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainReport {
  /// Mean example loss per epoch.
  std::vector<double> epoch_loss;
  std::size_t steps = 0;
  std::size_t skipped = 0;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Trains `model` in place. Examples that overflow the context are skipped
/// and counted. Deterministic for a fixed cfg.seed.
TrainReport train(Model& model, const std::vector<Example>& corpus, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Default desk model for a corpus: vocabulary from the corpus plus the
/// prompt sugar tokens, default ModelConfig with the given seed.
Model make_desk_model(const std::vector<Example>& corpus, std::uint64_t seed = 7,
                      std::size_t max_vocab = 4096);

}  // namespace schemex
