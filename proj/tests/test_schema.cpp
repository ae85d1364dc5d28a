#include <fstream>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "schemex/schema.hpp"

using namespace schemex;

namespace {

std::string dsl_error_kind(std::string_view spec) {
  try {
    parse_field_dsl(spec);
  } catch (const DslError& e) {
    return e.kind();
  }
  return "";
}

Schema product_with_category() {
  Schema s;
  s.structure_tasks.push_back({"product",
                               {parse_field_dsl("name::str::product name"),
                                parse_field_dsl("price::str"),
                                parse_field_dsl("category::[electronics|software|hardware]::str")}});
  return s;
}

}  // namespace

TEST_CASE("field DSL: type and description") {
  const FieldSpec f = parse_field_dsl("name::str::product name");
  CHECK(f.name == "name");
  CHECK(f.kind == FieldKind::Str);
  CHECK(f.description == "product name");
  CHECK_FALSE(f.choices.has_value());
}

TEST_CASE("field DSL: choice constraint") {
  const FieldSpec f = parse_field_dsl("category::[electronics|software|hardware]::str");
  CHECK(f.name == "category");
  CHECK(f.kind == FieldKind::Str);
  REQUIRE(f.choices.has_value());
  CHECK(*f.choices == std::vector<std::string>{"electronics", "software", "hardware"});
  CHECK_FALSE(f.description.has_value());
}

TEST_CASE("field DSL: bare name takes every default") {
  const FieldSpec f = parse_field_dsl("tags");
  CHECK(f.name == "tags");
  CHECK(f.kind == FieldKind::Str);
  CHECK_FALSE(f.description.has_value());
  CHECK_FALSE(f.choices.has_value());
}

TEST_CASE("field DSL: error kinds") {
  CHECK(dsl_error_kind("price::[x]::str") == "MalformedChoices");
  CHECK(dsl_error_kind("") == "EmptyName");
  CHECK(dsl_error_kind("  ::list") == "EmptyName");
  CHECK(dsl_error_kind("a::[x|]::str") == "MalformedChoices");
  CHECK(dsl_error_kind("a::int::str") == "UnknownTypeToken");
  CHECK(dsl_error_kind("a::str::list") == "UnknownTypeToken");
}

TEST_CASE("field DSL: list kind and canonical rendering") {
  const FieldSpec f = parse_field_dsl("mode::list::[fast|slow]::how it runs");
  CHECK(f.kind == FieldKind::List);
  CHECK(render_field_dsl(f) == "mode::[fast|slow]::list::how it runs");
  CHECK(parse_field_dsl(render_field_dsl(f)) == f);
}

TEST_CASE("field DSL: golden vectors") {
  std::ifstream in(std::string(SCHEMEX_FIXTURE_DIR) + "/dsl_golden.json");
  REQUIRE(in.good());
  const auto doc = nlohmann::json::parse(in);
  REQUIRE(doc.at("cases").size() >= 20);
  for (const auto& c : doc.at("cases")) {
    const std::string input = c.at("input");
    CAPTURE(input);
    if (!c.at("valid").get<bool>()) {
      CHECK(dsl_error_kind(input) == c.at("error").get<std::string>());
      continue;
    }
    const FieldSpec f = parse_field_dsl(input);
    const auto& want = c.at("field");
    CHECK(f.name == want.at("name").get<std::string>());
    CHECK((f.kind == FieldKind::List ? "list" : "str") == want.at("kind").get<std::string>());
    if (want.at("description").is_null()) {
      CHECK_FALSE(f.description.has_value());
    } else {
      CHECK(f.description == want.at("description").get<std::string>());
    }
    if (want.at("choices").is_null()) {
      CHECK_FALSE(f.choices.has_value());
    } else {
      CHECK(f.choices == want.at("choices").get<std::vector<std::string>>());
    }
    CHECK(render_field_dsl(f) == c.at("canonical").get<std::string>());
  }
}

TEST_CASE("field DSL fuzz: typed error or valid fixpoint") {
  static const std::vector<std::string> kPieces = {
      "a", "b", "x y", " ", "::", ":", "[", "]", "|", "str", "list", "[a|b]", "desc", "\t", "(", "é"};
  std::mt19937_64 rng(2024);
  std::size_t accepted = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::string s;
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 9)(rng);
    for (std::size_t i = 0; i < n; ++i) {
      s += kPieces[std::uniform_int_distribution<std::size_t>(0, kPieces.size() - 1)(rng)];
    }
    CAPTURE(s);
    FieldSpec f;
    try {
      f = parse_field_dsl(s);
    } catch (const DslError& e) {
      const std::string& k = e.kind();
      CHECK((k == "EmptyName" || k == "InvalidName" || k == "UnknownTypeToken" ||
             k == "MalformedChoices"));
      continue;
    }
    ++accepted;
    std::vector<Violation> v;
    validate_field(f, "f", v);
    CHECK(v.empty());
    const std::string canonical = render_field_dsl(f);
    const FieldSpec again = parse_field_dsl(canonical);
    CHECK(again == f);
    CHECK(render_field_dsl(again) == canonical);
  }
  CHECK(accepted > 1000);
}

TEST_CASE("validate_schema") {
  Schema product;
  product.structure_tasks.push_back({"product", {parse_field_dsl("name"), parse_field_dsl("price")}});
  CHECK(validate_schema(product).empty());

  const auto empty = validate_schema(Schema{});
  REQUIRE(empty.size() == 1);
  CHECK(empty.front().path.empty());

  Schema dup;
  dup.classification_tasks.push_back({"sentiment", {{"pos", {}}, {"neg", {}}}, false, 0.5});
  dup.classification_tasks.push_back({"sentiment", {{"pos", {}}, {"neg", {}}}, false, 0.5});
  const auto v = validate_schema(dup);
  REQUIRE_FALSE(v.empty());
  CHECK(v.front().message.find("sentiment") != std::string::npos);

  Schema one_label;
  one_label.classification_tasks.push_back({"t", {{"only", {}}}, false, 0.5});
  CHECK_FALSE(validate_schema(one_label).empty());

  Schema bad_threshold;
  bad_threshold.classification_tasks.push_back({"t", {{"a", {}}, {"b", {}}}, true, 1.5});
  CHECK_FALSE(validate_schema(bad_threshold).empty());

  Schema dup_field;
  dup_field.structure_tasks.push_back({"p", {parse_field_dsl("a"), parse_field_dsl("a::list")}});
  CHECK_FALSE(validate_schema(dup_field).empty());
}

TEST_CASE("schema JSON round trip") {
  Schema s;
  s.entity_task = EntityTask{"entities", {{"person", {}}, {"location", "cities and countries"}}};
  CHECK(json_to_schema(schema_to_json(s)) == s);

  Schema full = product_with_category();
  full.entity_task = s.entity_task;
  full.classification_tasks.push_back({"sentiment", {{"positive", {}}, {"negative", "bad"}}, false, 0.5});
  full.classification_tasks.push_back({"topics", {{"a", {}}, {"b", {}}, {"c", {}}}, true, 0.3});
  const std::string doc = schema_to_json(full, 2);
  CHECK(json_to_schema(doc) == full);
  CHECK(schema_to_json(json_to_schema(doc), 2) == doc);
}

TEST_CASE("schema JSON: structure with a choice field") {
  const Schema s = json_to_schema(R"({"version":1,"structures":[{"name":"product","fields":[
      "name::str::product name","price::str","category::[electronics|software|hardware]::str"]}]})");
  REQUIRE(s.structure_tasks.size() == 1);
  CHECK(s == product_with_category());
  CHECK(s.structure_tasks[0].fields.size() == 3);
  CHECK(s.structure_tasks[0].fields[2].choices->size() == 3);
}

TEST_CASE("schema JSON: errors") {
  CHECK_THROWS_AS(json_to_schema(R"({"entities":{"person":null}})"), ParseError);
  CHECK_THROWS_AS(json_to_schema(R"({"version":1,"entities":{"person":null},"extra":1})"), ParseError);
  try {
    json_to_schema("{\n  \"version\": 1,\n  \"entities\": {\"person\" null}\n}");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() > 1);
  }
  try {
    json_to_schema(R"({"version":1,"structures":[{"name":"p","fields":["price::[x]::str"]}]})");
    FAIL("expected SchemaInvalid");
  } catch (const SchemaInvalid& e) {
    REQUIRE(e.violations().size() == 1);
    CHECK(e.violations()[0].path == "structures[0].fields[0]");
    CHECK(e.violations()[0].message.find("MalformedChoices") != std::string::npos);
  }
  CHECK_THROWS_AS(json_to_schema(R"({"version":1})"), SchemaInvalid);
}
