#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "schemex/decode.hpp"
#include "schemex/evalbench.hpp"
#include "schemex/heads.hpp"

namespace schemex {

namespace {

using Clock = std::chrono::steady_clock;

std::string cpu_model() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.starts_with("model name")) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) return line.substr(colon + 2);
    }
  }
  return "unknown";
}

template <typename Fn>
double elapsed_ms(Fn&& fn) {
  const auto t0 = Clock::now();
  fn();
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Restores the OpenMP thread count on scope exit.
class SingleThread {
 public:
  SingleThread() : previous_(omp_get_max_threads()) { omp_set_num_threads(1); }
  ~SingleThread() { omp_set_num_threads(previous_); }
  SingleThread(const SingleThread&) = delete;
  SingleThread& operator=(const SingleThread&) = delete;

 private:
  int previous_;
};

Schema composed_schema(std::span<const std::string> labels) {
  ClassificationSpec spec{"category", {}, false, 0.5};
  for (const auto& l : labels) spec.labels.push_back({l, std::nullopt});
  Schema schema;
  schema.classification_tasks.push_back(std::move(spec));
  return schema;
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::string bench_text(std::size_t tokens) {
  static const std::vector<std::string> kWords = {
      "the",    "quarterly", "report", "describes", "how",   "the",   "team",   "shipped",
      "a",      "new",       "phone",  "while",     "costs", "fell",  "and",    "customers",
      "in",     "Paris",     "and",    "London",    "wrote", "about", "prices", ","};
  std::string out;
  for (std::size_t i = 0; i < tokens; ++i) {
    const std::string& w = kWords[i % kWords.size()];
    if (!out.empty() && w != ",") out += ' ';
    out += w;
  }
  return out;
}

std::vector<std::string> bench_labels(std::size_t count) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back("topic" + std::to_string(i));
  return out;
}

std::uint64_t run_per_label_baseline(const Model& model, std::span<const std::string> labels,
                                     const std::string& text, std::vector<double>* probabilities) {
  PassCounter counter;
  std::vector<double> logits;
  logits.reserve(labels.size());
  for (const auto& label : labels) {
    ClassificationSpec one{"category", {{label, std::nullopt}}, false, 0.5};
    const PromptPlan plan = assemble_plan({compile_classification_prompt(one, 0, model.vocab)}, text,
                                          model.vocab, model.config.max_positions);
    Graph g(false);
    const Var hidden = encode(g, model, plan, &counter);
    const auto positions = plan.element_positions(TaskKind::Classification, 0);
    const Var embeds = heads::prompt_embeddings(g, hidden, positions);
    logits.push_back(g.value(heads::classification_logits(g, model, embeds)).data[0]);
  }
  if (probabilities != nullptr && !logits.empty()) {
    ClassificationSpec spec{"category", {}, false, 0.5};
    for (const auto& l : labels) spec.labels.push_back({l, std::nullopt});
    probabilities->clear();
    for (const auto& [_, p] : decode_classification(logits, spec).probabilities) {
      probabilities->push_back(p);
    }
  }
  return counter.value();
}

BenchReport latency_bench(const Model& model, const BenchConfig& cfg) {
  SingleThread pin;
  BenchReport report;
  report.repeats = cfg.repeats;
  report.warmup = cfg.warmup;
  report.text_tokens = cfg.text_tokens;
  report.hardware = cpu_model() + ", 1 OpenMP thread";

  const std::string text = bench_text(cfg.text_tokens);
  RunOptions options;
  options.max_len = model.config.max_positions;

  struct Case {
    std::vector<std::string> labels;
    Schema schema;
    std::vector<double> composed;
    std::vector<double> baseline;
  };
  std::vector<Case> cases;
  for (std::size_t count : cfg.label_counts) {
    Case c{bench_labels(count), {}, {}, {}};
    c.schema = composed_schema(c.labels);
    BenchRow row;
    row.labels = count;
    row.composed_sequence = compose_tasks(c.schema, text, model.vocab, options.max_len).ids.size();
    row.composed_passes = run_schema(model, c.schema, text, options).encoder_passes;
    ClassificationSpec one{"category", {{c.labels.front(), std::nullopt}}, false, 0.5};
    row.baseline_sequence =
        assemble_plan({compile_classification_prompt(one, 0, model.vocab)}, text, model.vocab,
                      model.config.max_positions)
            .ids.size();
    row.baseline_passes = run_per_label_baseline(model, c.labels, text);
    report.rows.push_back(row);
    cases.push_back(std::move(c));
  }

  // Rounds visit every label count in turn, so slow stretches of a shared
  // machine land on all of them rather than on one.
  for (std::size_t round = 0; round < cfg.warmup + cfg.repeats; ++round) {
    const bool timed = round >= cfg.warmup;
    for (auto& c : cases) {
      const double composed = elapsed_ms([&] { run_schema(model, c.schema, text, options); });
      const double baseline = elapsed_ms([&] { run_per_label_baseline(model, c.labels, text); });
      if (timed) {
        c.composed.push_back(composed);
        c.baseline.push_back(baseline);
      }
    }
  }
  for (std::size_t i = 0; i < cases.size(); ++i) {
    report.rows[i].composed_ms = median(std::move(cases[i].composed));
    report.rows[i].baseline_ms = median(std::move(cases[i].baseline));
  }

  if (!report.rows.empty()) {
    const auto [lo, hi] = std::minmax_element(
        report.rows.begin(), report.rows.end(),
        [](const BenchRow& a, const BenchRow& b) { return a.labels < b.labels; });
    report.composed_ratio = hi->composed_ms / lo->composed_ms;
    report.baseline_ratio = hi->baseline_ms / lo->baseline_ms;
  }
  return report;
}

std::string bench_to_json(const BenchReport& report, int indent) {
  nlohmann::ordered_json doc;
  doc["hardware"] = report.hardware;
  doc["text_tokens"] = report.text_tokens;
  doc["repeats"] = report.repeats;
  doc["warmup"] = report.warmup;
  doc["label_counts"] = nlohmann::ordered_json::array();
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    doc["label_counts"].push_back(r.labels);
    rows.push_back({{"labels", r.labels},
                    {"composed_median_ms", r.composed_ms},
                    {"composed_passes", r.composed_passes},
                    {"composed_sequence", r.composed_sequence},
                    {"baseline_median_ms", r.baseline_ms},
                    {"baseline_passes", r.baseline_passes},
                    {"baseline_sequence", r.baseline_sequence}});
  }
  doc["rows"] = std::move(rows);
  doc["composed_ratio"] = report.composed_ratio;
  doc["baseline_ratio"] = report.baseline_ratio;
  return doc.dump(indent);
}

std::string bench_to_table(const BenchReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%8s %14s %8s %14s %8s\n", "labels", "composed ms", "passes",
                "per-label ms", "passes");
  out << line;
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%8zu %14.3f %8llu %14.3f %8llu\n", r.labels, r.composed_ms,
                  static_cast<unsigned long long>(r.composed_passes), r.baseline_ms,
                  static_cast<unsigned long long>(r.baseline_passes));
    out << line;
  }
  std::snprintf(line, sizeof line, "scaling (max/min labels): composed %.2fx, per-label %.2fx\n",
                report.composed_ratio, report.baseline_ratio);
  out << line << "hardware: " << report.hardware << '\n';
  return out.str();
}

}  // namespace schemex
