// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "schemex/decode.hpp"
#include "schemex/errors.hpp"
#include "schemex/evalbench.hpp"
#include "schemex/model_io.hpp"
#include "support.hpp"

using namespace schemex;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Collects failed sub-checks of one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  bool ok() const { return failures_.empty(); }
  std::string summary() const {
    std::string out;
    for (std::size_t i = 0; i < failures_.size() && i < 5; ++i) {
      out += (i ? "; " : "") + failures_[i];
    }
    if (failures_.size() > 5) out += "; +" + std::to_string(failures_.size() - 5) + " more";
    return out;
  }

 private:
  std::vector<std::string> failures_;
};

int failed = 0;

void report(const std::string& name, const Checks& c, const std::string& detail) {
  if (!c.ok()) ++failed;
  std::printf("%s  %-22s %s%s%s\n", c.ok() ? "PASS" : "FAIL", name.c_str(), detail.c_str(),
              c.ok() ? "" : " | ", c.summary().c_str());
  std::fflush(stdout);
}

void run_guarded(const std::string& name, const std::function<std::string(Checks&)>& body) {
  Checks c;
  std::string detail;
  try {
    detail = body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  report(name, c, detail);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const SpanResult* single_span(const ExtractionResult& r, const std::string& label) {
  const auto* spans = r.entity(label);
  return spans != nullptr && spans->size() == 1 ? &spans->front() : nullptr;
}

std::string str_field(const StructureInstance& inst, const std::string& field) {
  const FieldValue* v = inst.find(field);
  if (v == nullptr) return "<missing>";
  if (const auto* s = std::get_if<SpanResult>(v)) return s->text;
  return "<list>";
}

// Parse-render-parse over random strings; any non-DSL exception is a crash.
void dsl_fuzz(Checks& c) {
  static const std::vector<std::string> kPieces = {"a",   "b",  "x y", " ",     "::",   ":",
                                                   "[",   "]",  "|",   "str",   "list", "[a|b]",
                                                   "d",   "\t", "(",   "\xC3\xA9", "_", "-"};
  std::mt19937_64 rng(77);
  std::size_t accepted = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::string s;
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 10)(rng);
    for (std::size_t i = 0; i < n; ++i) {
      s += kPieces[std::uniform_int_distribution<std::size_t>(0, kPieces.size() - 1)(rng)];
    }
    FieldSpec f;
    try {
      f = parse_field_dsl(s);
    } catch (const DslError&) {
      continue;
    }
    ++accepted;
    const std::string canonical = render_field_dsl(f);
    const FieldSpec again = parse_field_dsl(canonical);
    c.expect(again == f && render_field_dsl(again) == canonical, "DSL fixpoint broken for '" + s + "'");
  }
  c.expect(accepted > 1000, "fuzz accepted too few strings");
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");

  run_guarded("gradient_oracle", [](Checks& c) {
    const auto start = Clock::now();
    const Model model = test::small_model(7, 64, 2, 4);
    const test::GradCheckReport r = test::gradient_check(model, test::all_heads_example(), 256, 11);
    const std::size_t resolved = r.coordinates - r.below_resolution;
    const double elapsed = seconds_since(start);
    c.expect(resolved >= 200, "only " + std::to_string(resolved) + " resolved coordinates");
    c.expect(r.max_relative_error < 1e-4, "max relative error " + fmt("%.3g", r.max_relative_error) + " at " + r.worst);
    for (const char* head : {"heads.span.", "heads.count.", "heads.occurrence.", "heads.cls.", "encoder."}) {
      bool covered = false;
      for (const auto& name : r.tensors) covered |= name.starts_with(head);
      c.expect(covered, std::string("no coordinate in ") + head);
    }
    c.expect(elapsed < 120.0, "runtime " + fmt("%.1f s", elapsed));
    return std::to_string(r.coordinates) + " coords (" + std::to_string(resolved) +
           " above the difference resolution), max rel err " + fmt("%.2e", r.max_relative_error) +
           ", " + fmt("%.1f s", elapsed);
  });

  // The trained desk model is shared by the criteria below.
  const auto corpus = generate_synthetic(1, 200);
  Model model = make_desk_model(corpus);
  TrainReport train_report;
  double train_seconds = 0.0;
  std::string train_error;
  try {
    const auto start = Clock::now();
    train_report = train(model, corpus, TrainConfig{});
    train_seconds = seconds_since(start);
  } catch (const std::exception& e) {
    train_error = e.what();
  }

  run_guarded("overfit_worked_examples", [&](Checks& c) {
    c.expect(train_error.empty(), "training failed: " + train_error);
    c.expect(train_report.epoch_loss.size() <= 10, "more than 10 epochs");
    c.expect(train_seconds < 300.0, "training took " + fmt("%.1f s", train_seconds));
    // Epoch losses fall, allowing each epoch to rise by 5% of the first epoch's loss.
    const auto& loss = train_report.epoch_loss;
    for (std::size_t e = 1; e < loss.size(); ++e) {
      c.expect(loss[e] <= loss[e - 1] + 0.05 * loss.front(), "loss rose at epoch " + std::to_string(e + 1));
    }

    {
      const ExtractionResult r = run_schema(model, test::product_schema(), "iPhone costs $999. Galaxy is $899.");
      const auto* products = r.structure("product");
      c.expect(r.structure_counts.size() == 1 && r.structure_counts[0].second == 2, "k_hat != 2");
      c.expect(products != nullptr && products->size() == 2, "expected two product instances");
      if (products != nullptr && products->size() == 2) {
        c.expect(str_field((*products)[0], "name") == "iPhone" && str_field((*products)[0], "price") == "$999",
                 "first instance is not {iPhone, $999}");
        c.expect(str_field((*products)[1], "name") == "Galaxy" && str_field((*products)[1], "price") == "$899",
                 "second instance is not {Galaxy, $899}");
      }
    }
    {
      Schema s;
      s.entity_task = EntityTask{"entities", {{"person", {}}, {"location", {}}}};
      const ExtractionResult r = run_schema(model, s, "John works in Paris");
      const auto* person = single_span(r, "person");
      const auto* location = single_span(r, "location");
      c.expect(person != nullptr && person->text == "John", "person != [John]");
      c.expect(location != nullptr && location->text == "Paris", "location != [Paris]");
    }
    {
      Schema s;
      s.classification_tasks.push_back(test::sentiment_spec());
      const ExtractionResult r = run_schema(model, s, "This movie is amazing!");
      const auto* sentiment = r.classification("sentiment");
      c.expect(sentiment != nullptr && sentiment->labels == std::vector<std::string>{"positive"},
               "sentiment != positive");
    }
    {
      Schema s;
      s.entity_task = EntityTask{"entities", {{"person", {}}, {"product", {}}}};
      s.classification_tasks.push_back(test::sentiment_spec());
      PassCounter counter;
      const ExtractionResult r = run_schema(model, s, "Steve Jobs loved the iPhone", {}, &counter);
      const auto* person = single_span(r, "person");
      const auto* product = single_span(r, "product");
      const auto* sentiment = r.classification("sentiment");
      c.expect(person != nullptr && person->text == "Steve Jobs", "person != [Steve Jobs]");
      c.expect(product != nullptr && product->text == "iPhone", "product != [iPhone]");
      c.expect(sentiment != nullptr && sentiment->labels.front() == "positive", "sentiment != positive");
      c.expect(counter.value() == 1 && r.encoder_passes == 1, "composed run used more than one pass");
    }
    std::string trace;
    for (double l : loss) trace += (trace.empty() ? "" : " ") + fmt("%.3g", l);
    return std::to_string(loss.size()) + " epochs in " + fmt("%.1f s", train_seconds) + ", loss " + trace;
  });

  run_guarded("overfit_metrics", [&](Checks& c) {
    const EvalReport r = evaluate(model, corpus);
    c.expect(r.spans.f1 >= 0.99, "span F1 " + fmt("%.4f", r.spans.f1));
    c.expect(r.classification_accuracy >= 0.99, "classification accuracy " + fmt("%.4f", r.classification_accuracy));
    return "span F1 " + fmt("%.4f", r.spans.f1) + ", classification accuracy " +
           fmt("%.4f", r.classification_accuracy) + ", count accuracy " + fmt("%.4f", r.count_accuracy);
  });

  run_guarded("single_pass_contract", [&](Checks& c) {
    std::vector<Schema> schemas;
    for (const auto& ex : corpus) schemas.push_back(ex.schema);
    schemas.push_back(test::all_heads_example().schema);
    PassCounter counter;
    std::uint64_t calls = 0;
    for (std::size_t i = 0; i < schemas.size(); ++i) {
      const ExtractionResult r = run_schema(model, schemas[i], corpus[i % corpus.size()].text, {}, &counter);
      ++calls;
      c.expect(r.encoder_passes == 1, "schema " + std::to_string(i) + " used " + std::to_string(r.encoder_passes) + " passes");
    }
    c.expect(counter.value() == calls, "counter " + std::to_string(counter.value()) + " after " + std::to_string(calls) + " calls");

    const std::string text = bench_text(32);
    for (std::size_t L : {5, 10, 20, 50}) {
      const auto labels = bench_labels(L);
      Schema s;
      ClassificationSpec spec{"category", {}, false, 0.5};
      for (const auto& l : labels) spec.labels.push_back({l, std::nullopt});
      s.classification_tasks.push_back(spec);
      RunOptions opts;
      opts.max_len = model.config.max_positions;
      c.expect(run_schema(model, s, text, opts).encoder_passes == 1, "composed L=" + std::to_string(L));
      c.expect(run_per_label_baseline(model, labels, text) == L, "baseline L=" + std::to_string(L));
    }
    return std::to_string(calls) + " schemas, 1 pass each; L in {5,10,20,50}: composed 1, baseline L";
  });

  run_guarded("latency_scaling", [&](Checks& c) {
    const auto start = Clock::now();
    const BenchReport r = latency_bench(model);
    const double elapsed = seconds_since(start);
    c.expect(r.composed_ratio <= 3.0, "composed ratio " + fmt("%.2f", r.composed_ratio));
    c.expect(r.baseline_ratio >= 8.0, "baseline ratio " + fmt("%.2f", r.baseline_ratio));
    c.expect(elapsed < 180.0, "runtime " + fmt("%.1f s", elapsed));
    return "composed " + fmt("%.2fx", r.composed_ratio) + ", per-label " + fmt("%.2fx", r.baseline_ratio) +
           " (L=50/L=5), " + fmt("%.1f s", elapsed);
  });

  run_guarded("dsl_and_properties", [&](Checks& c) {
    dsl_fuzz(c);

    for (const auto& ex : corpus) {
      c.expect(json_to_schema(schema_to_json(ex.schema)) == ex.schema, "schema JSON round trip: " + ex.text);
    }

    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.0, 10.0);
    for (int trial = 0; trial < 1000; ++trial) {
      ClassificationSpec spec{"t", {}, false, 0.5};
      std::vector<double> logits;
      const std::size_t n = 2 + static_cast<std::size_t>(trial % 60);
      for (std::size_t i = 0; i < n; ++i) {
        spec.labels.push_back({"l" + std::to_string(i), std::nullopt});
        logits.push_back(nd(rng));
      }
      const ClassificationResult r = decode_classification(logits, spec);
      double total = 0.0;
      for (const auto& [_, p] : r.probabilities) total += p;
      c.expect(std::abs(total - 1.0) <= 1e-9, "softmax sums to " + fmt("%.17g", total));
      std::vector<double> shifted = logits;
      const double shift = nd(rng) * 50.0;
      for (double& x : shifted) x += shift;
      c.expect(decode_classification(shifted, spec).labels == r.labels, "argmax not shift invariant");
      const double x = nd(rng) * 100.0;
      const double s = heads::sigmoid(x);
      c.expect(s >= 0.0 && s <= 1.0 && std::isfinite(s), "sigmoid out of bounds");
    }

    for (std::size_t n = 0; n <= 40; ++n) {
      for (std::size_t w = 1; w <= 10; ++w) {
        std::size_t expected = 0;
        for (std::size_t width = 1; width <= w && width <= n; ++width) expected += n - width + 1;
        c.expect(heads::enumerate_spans(n, w).size() == expected, "enumerate_spans count N=" + std::to_string(n));
      }
    }

    // Span fidelity and threshold monotonicity on every corpus example.
    std::size_t spans_checked = 0;
    for (const auto& ex : corpus) {
      std::set<std::tuple<std::string, std::size_t, std::size_t>> previous;
      bool first = true;
      for (double threshold : {0.1, 0.5, 0.9}) {
        RunOptions opts;
        opts.threshold = threshold;
        const ExtractionResult r = run_schema(model, ex.schema, ex.text, opts);
        std::set<std::tuple<std::string, std::size_t, std::size_t>> current;
        auto visit = [&](const std::string& key, const SpanResult& s) {
          ++spans_checked;
          c.expect(ex.text.substr(s.char_start, s.char_end - s.char_start) == s.text, "span text mismatch: " + s.text);
          current.emplace(key, s.char_start, s.char_end);
        };
        if (r.entities) {
          for (const auto& [label, spans] : *r.entities)
            for (const auto& s : spans) visit(label, s);
        }
        for (const auto& [name, instances] : r.structures) {
          for (const auto& inst : instances) {
            for (const auto& [field, value] : inst.fields) {
              if (const auto* one = std::get_if<SpanResult>(&value)) {
                visit(name + "." + field, *one);
              } else {
                for (const auto& s : std::get<std::vector<SpanResult>>(value)) visit(name + "." + field, s);
              }
            }
          }
        }
        if (!first) {
          for (const auto& key : current) c.expect(previous.count(key) == 1, "threshold monotonicity: " + ex.text);
        }
        previous = std::move(current);
        first = false;
      }
    }
    return "10k DSL strings, " + std::to_string(corpus.size()) + " schema round trips, " +
           std::to_string(spans_checked) + " decoded spans checked";
  });

  run_guarded("model_file_round_trip", [&](Checks& c) {
    const auto dir = std::filesystem::temp_directory_path() / "schemex_acceptance";
    std::filesystem::create_directories(dir);
    const auto path = dir / "model.bin";
    save_model(model, path);
    const Model loaded = load_model(path);
    c.expect(loaded.params == model.params, "parameters differ after load");
    c.expect(loaded.config == model.config, "config differs after load");
    c.expect(loaded.vocab.tokens() == model.vocab.tokens(), "vocabulary differs after load");
    c.expect(model_file_id(path).size() == 64, "model id is not a SHA-256 hex digest");

    std::string bytes;
    {
      std::ifstream in(path, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      bytes = ss.str();
    }
    auto expect_kind = [&](std::string corrupted, const std::string& kind) {
      const auto bad = dir / "bad.bin";
      std::ofstream(bad, std::ios::binary | std::ios::trunc) << corrupted;
      try {
        load_model(bad);
        c.expect(false, kind + " not raised");
      } catch (const ModelFileError& e) {
        c.expect(e.kind() == kind, "expected " + kind + ", got " + e.kind());
      }
    };
    std::string magic = bytes;
    magic[0] = 'X';
    expect_kind(magic, "BadMagic");
    std::string version = bytes;
    version[6] = 9;
    expect_kind(version, "VersionMismatch");
    std::string header = bytes;
    header[16] = '#';
    expect_kind(header, "CorruptHeader");
    expect_kind(bytes.substr(0, 10), "TruncatedFile");
    expect_kind(bytes.substr(0, bytes.size() - 8), "TruncatedFile");
    std::filesystem::remove_all(dir);
    return "bit-exact reload; BadMagic, VersionMismatch, CorruptHeader, TruncatedFile raised";
  });

  std::printf("%d criteria failed\n", failed);
  return failed;
}
