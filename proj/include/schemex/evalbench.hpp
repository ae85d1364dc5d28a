#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "schemex/model.hpp"
#include "schemex/training.hpp"

namespace schemex {

struct LabeledSpan {
  std::string label;
  std::size_t start = 0;
  std::size_t end = 0;

  auto operator<=>(const LabeledSpan&) const = default;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Exact-match micro P/R/F1 over (label, start, end). Two empty sets score
/// 1.0; exactly one empty set scores 0.
PrecisionRecall span_f1(std::span<const LabeledSpan> predicted, std::span<const LabeledSpan> gold);

/// Fraction of equal entries. Throws Error("LengthMismatch").
double accuracy(std::span<const std::string> predicted, std::span<const std::string> gold);

struct EvalReport {
  PrecisionRecall spans;
  double classification_accuracy = 1.0;
  double count_accuracy = 1.0;
  std::size_t examples = 0;
  std::size_t gold_spans = 0;
  std::size_t predicted_spans = 0;
  std::size_t classification_items = 0;
};

/// Runs every example's schema through the model and scores entity spans,
/// structure field spans (labelled "<parent>[<instance>].<field>"),
/// classification decisions and instance counts.
EvalReport evaluate(const Model& model, const std::vector<Example>& corpus,
                    std::size_t max_len = kDefaultMaxLen);

std::string eval_to_json(const EvalReport& report, int indent = 2);

struct BenchConfig {
  std::vector<std::size_t> label_counts = {5, 10, 20, 50};
  std::size_t repeats = 15;
  std::size_t warmup = 3;
  std::size_t text_tokens = 128;
};

struct BenchRow {
  std::size_t labels = 0;
  double composed_ms = 0.0;
  double baseline_ms = 0.0;
  std::uint64_t composed_passes = 0;
  std::uint64_t baseline_passes = 0;
  std::size_t composed_sequence = 0;
  std::size_t baseline_sequence = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  /// Median latency at the largest label count over the smallest.
  double composed_ratio = 0.0;
  double baseline_ratio = 0.0;
  std::size_t repeats = 0;
  std::size_t warmup = 0;
  std::size_t text_tokens = 0;
  std::string hardware;
};

/// For each label count L, times a composed run (one classification task
/// with L labels, one encoder pass) and a per-label baseline (L encoder
/// passes, one prompt per label). Reports medians of `repeats` timed runs
/// after `warmup` discarded ones, on a single OpenMP thread. Each round
/// times every label count once, interleaved.
BenchReport latency_bench(const Model& model, const BenchConfig& cfg = {});

/// Passes spent by one per-label baseline run; exposed for tests.
std::uint64_t run_per_label_baseline(const Model& model, std::span<const std::string> labels,
                                     const std::string& text, std::vector<double>* probabilities = nullptr);

/// Deterministic benchmark text of exactly `tokens` tokens.
std::string bench_text(std::size_t tokens);
std::vector<std::string> bench_labels(std::size_t count);

std::string bench_to_json(const BenchReport& report, int indent = 2);
std::string bench_to_table(const BenchReport& report);

double median(std::vector<double> values);

}  // namespace schemex
