#include <random>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "schemex/decode.hpp"
#include "support.hpp"

using namespace schemex;

namespace {

// Candidate spans over "aa bb cc" (three one-token spans plus two-token ones).
struct Fixture {
  std::string source = "aa bb cc";
  std::vector<heads::SpanCandidate> spans = {
      {0, 0, {0, 2}}, {0, 1, {0, 5}}, {1, 1, {3, 5}}, {1, 2, {3, 8}}, {2, 2, {6, 8}}};
};

template <typename F>
void for_each_span(const ExtractionResult& r, F&& f) {
  if (r.entities) {
    for (const auto& [label, spans] : *r.entities)
      for (const auto& s : spans) f(s);
  }
  for (const auto& [name, instances] : r.structures) {
    for (const auto& inst : instances) {
      for (const auto& [field, value] : inst.fields) {
        if (const auto* one = std::get_if<SpanResult>(&value)) {
          f(*one);
        } else {
          for (const auto& s : std::get<std::vector<SpanResult>>(value)) f(s);
        }
      }
    }
  }
}

std::set<std::tuple<std::string, std::size_t, std::size_t>> keyed_spans(const ExtractionResult& r) {
  std::set<std::tuple<std::string, std::size_t, std::size_t>> out;
  if (r.entities) {
    for (const auto& [label, spans] : *r.entities)
      for (const auto& s : spans) out.emplace(label, s.char_start, s.char_end);
  }
  for (const auto& [name, instances] : r.structures) {
    // Instance indices shift when an instance empties out, so key by field only.
    for (const auto& inst : instances) {
      for (const auto& [field, value] : inst.fields) {
        const std::string key = name + "." + field;
        if (const auto* one = std::get_if<SpanResult>(&value)) {
          out.emplace(key, one->char_start, one->char_end);
        } else {
          for (const auto& s : std::get<std::vector<SpanResult>>(value)) out.emplace(key, s.char_start, s.char_end);
        }
      }
    }
  }
  return out;
}

Schema everything_schema() {
  Schema s;
  s.entity_task = EntityTask{"entities", {{"person", {}}, {"product", {}}, {"location", {}}}};
  s.classification_tasks = {test::sentiment_spec(), test::topics_spec()};
  s.structure_tasks.push_back({"product", {parse_field_dsl("name::str"), parse_field_dsl("price::list")}});
  return s;
}

}  // namespace

TEST_CASE("decode_entities: threshold is strict and types are independent") {
  Fixture fx;
  const std::vector<std::string> labels = {"a", "b"};
  const Tensor low = Tensor::matrix(5, 2, 0.4);
  for (const auto& [label, found] : decode_entities(low, fx.spans, labels, fx.source)) CHECK(found.empty());

  Tensor p = Tensor::matrix(5, 2, 0.1);
  p(2, 0) = p(2, 1) = 0.9;
  p(4, 0) = 0.5;  // exactly at threshold: not emitted
  const auto out = decode_entities(p, fx.spans, labels, fx.source);
  REQUIRE(out.size() == 2);
  for (const auto& [label, found] : out) {
    REQUIRE(found.size() == 1);
    CHECK(found[0].text == "bb");
    CHECK(found[0].score == 0.9);
  }
}

TEST_CASE("decode_structures: per-instance argmax") {
  Fixture fx;
  const StructureSpec spec{"product", {parse_field_dsl("name")}};
  Tensor first = Tensor::matrix(5, 1, 0.2);
  first(0, 0) = 0.9;
  first(4, 0) = 0.7;
  Tensor second = Tensor::matrix(5, 1, 0.2);
  second(0, 0) = 0.6;
  second(4, 0) = 0.8;
  const std::vector<Tensor> probs = {first, second};
  const auto out = decode_structures(probs, fx.spans, spec, fx.source);
  REQUIRE(out.size() == 2);
  // Brute force: each instance independently takes its best span.
  for (std::size_t k = 0; k < 2; ++k) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 5; ++i) {
      if (probs[k](i, 0) > probs[k](best, 0)) best = i;
    }
    const auto& got = std::get<SpanResult>(*out[k].find("name"));
    CHECK(got.char_start == fx.spans[best].chars.start);
    CHECK(got.char_end == fx.spans[best].chars.end);
  }
  CHECK(std::get<SpanResult>(*out[0].find("name")).text == "aa");
  CHECK(std::get<SpanResult>(*out[1].find("name")).text == "cc");

  CHECK(decode_structures({}, fx.spans, spec, fx.source).empty());
}

TEST_CASE("decode_structures: list fields, choices, empty instances") {
  Fixture fx;
  const StructureSpec spec{"p", {parse_field_dsl("tags::list"), parse_field_dsl("kind::[CC|bb]::str")}};
  Tensor probs = Tensor::matrix(5, 2, 0.1);
  probs(4, 0) = 0.8;
  probs(0, 0) = 0.7;
  probs(1, 1) = 0.95;  // "aa bb" is not an allowed option
  probs(4, 1) = 0.6;   // "cc" matches "CC" ignoring case
  const std::vector<Tensor> one = {probs};
  const auto out = decode_structures(one, fx.spans, spec, fx.source);
  REQUIRE(out.size() == 1);
  const auto& tags = std::get<std::vector<SpanResult>>(*out[0].find("tags"));
  REQUIRE(tags.size() == 2);
  CHECK(tags[0].text == "aa");
  CHECK(tags[1].text == "cc");
  CHECK(std::get<SpanResult>(*out[0].find("kind")).text == "cc");

  const std::vector<Tensor> silent = {Tensor::matrix(5, 2, 0.1)};
  CHECK(decode_structures(silent, fx.spans, spec, fx.source).empty());
}

TEST_CASE("decode_classification: single-label softmax") {
  const ClassificationSpec spec = test::sentiment_spec();
  const std::vector<double> logits = {2.0, -1.0, 0.1};
  const ClassificationResult r = decode_classification(logits, spec);
  REQUIRE(r.labels.size() == 1);
  CHECK(r.labels[0] == "positive");
  const auto oracle = test::softmax_oracle(logits);
  const double expected[] = {0.8338, 0.0415, 0.1247};
  double total = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.probabilities[i].second == doctest::Approx(oracle[i]).epsilon(1e-12));
    CHECK(std::abs(r.probabilities[i].second - expected[i]) < 5e-4);
    total += r.probabilities[i].second;
  }
  CHECK(std::abs(total - 1.0) <= 1e-9);

  const std::vector<double> tied = {1.0, 1.0, 0.0};
  CHECK(decode_classification(tied, spec).labels[0] == "positive");
}

TEST_CASE("decode_classification: multi-label threshold is inclusive") {
  const ClassificationSpec spec = test::topics_spec();
  const std::vector<double> zeros = {0.0, 0.0, 0.0};
  const ClassificationResult r = decode_classification(zeros, spec);
  CHECK(r.labels.size() == 3);
  for (const auto& [label, p] : r.probabilities) CHECK(p == 0.5);
  const std::vector<double> mixed = {3.0, -3.0, 0.0};
  CHECK(decode_classification(mixed, spec).labels == std::vector<std::string>{"technology", "business"});
}

TEST_CASE("softmax normalization and shift invariance on random logits") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd(0.0, 5.0);
  std::uniform_int_distribution<std::size_t> count(2, 60);
  for (int trial = 0; trial < 500; ++trial) {
    ClassificationSpec spec;
    spec.task_name = "t";
    const std::size_t n = count(rng);
    std::vector<double> logits;
    for (std::size_t i = 0; i < n; ++i) {
      spec.labels.push_back({"l" + std::to_string(i), {}});
      logits.push_back(nd(rng));
    }
    const ClassificationResult r = decode_classification(logits, spec);
    double total = 0.0;
    for (const auto& [label, p] : r.probabilities) total += p;
    CHECK(std::abs(total - 1.0) <= 1e-9);
    const double shift = nd(rng) * 100.0;
    std::vector<double> shifted = logits;
    for (double& x : shifted) x += shift;
    CHECK(decode_classification(shifted, spec).labels == r.labels);
  }
}

TEST_CASE("run_schema: one encoder pass per call") {
  const Model model = test::small_model();
  PassCounter counter;
  const std::vector<std::pair<Schema, std::string>> cases = {
      {everything_schema(), "Steve Jobs loved the iPhone in Paris."},
      {test::product_schema(), "iPhone costs $999. Galaxy is $899."},
      {test::all_heads_example().schema, test::all_heads_example().text},
  };
  std::uint64_t expected = 0;
  for (const auto& [schema, text] : cases) {
    const ExtractionResult r = run_schema(model, schema, text, {}, &counter);
    ++expected;
    CHECK(counter.value() == expected);
    CHECK(r.encoder_passes == 1);
  }
  Schema cls;
  cls.classification_tasks.push_back(test::sentiment_spec());
  const ExtractionResult r = run_schema(model, cls, "This movie is amazing!", {}, &counter);
  CHECK(counter.value() == expected + 1);
  CHECK_FALSE(r.entities.has_value());
  const auto doc = nlohmann::json::parse(result_to_json(r));
  CHECK(doc.at("format_version") == 1);
  CHECK_FALSE(doc.contains("entities"));
  CHECK(doc.at("classifications").at("sentiment").at("label").is_string());
  CHECK(doc.at("meta").at("encoder_passes") == 1);
}

TEST_CASE("run_schema properties: span fidelity and threshold monotonicity") {
  const Model model = test::small_model(11);
  const Schema schema = everything_schema();
  std::mt19937_64 rng(23);
  const std::vector<std::string> words = {"Steve", "Jobs", "loved", "the", "iPhone", "in", "Paris",
                                          "$999", ".", "Galaxy", "costs", "caf\xC3\xA9", ","};
  for (int trial = 0; trial < 25; ++trial) {
    std::string text;
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 14)(rng);
    for (std::size_t i = 0; i < n; ++i) {
      if (!text.empty()) text += ' ';
      text += words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)];
    }
    std::vector<std::set<std::tuple<std::string, std::size_t, std::size_t>>> by_threshold;
    for (double threshold : {0.05, 0.3, 0.5, 0.7, 0.95}) {
      RunOptions opts;
      opts.threshold = threshold;
      const ExtractionResult r = run_schema(model, schema, text, opts);
      for_each_span(r, [&](const SpanResult& s) {
        CHECK(text.substr(s.char_start, s.char_end - s.char_start) == s.text);
        CHECK(s.score > threshold);
      });
      by_threshold.push_back(keyed_spans(r));
    }
    for (std::size_t i = 1; i < by_threshold.size(); ++i) {
      for (const auto& key : by_threshold[i]) CHECK(by_threshold[i - 1].count(key) == 1);
    }
  }
}
