#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "json.hpp"
#include "schemex/training.hpp"

namespace schemex {

namespace {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Vocabularies and schemas of the generator
// ---------------------------------------------------------------------------

const std::vector<std::string> kPersons = {"John",   "Mary",       "Steve Jobs", "Alice Chen",
                                           "Bob",    "Maria Garcia", "Tim Cook", "Sarah"};
const std::vector<std::string> kLocations = {"Paris",    "London", "Berlin", "Tokyo",
                                             "New York", "Madrid", "Rome",   "Boston"};
const std::vector<std::string> kProducts = {"iPhone",  "Galaxy",  "Pixel",   "ThinkPad",
                                            "Kindle",  "MacBook", "Surface", "Xbox"};
const std::vector<std::string> kPrices = {"$999", "$899", "$499", "$199",
                                          "$49",  "$1299", "$299", "$79"};
const std::vector<std::string> kSubjects = {"This movie", "The food",  "The service",
                                            "This phone", "The hotel", "The concert"};
const std::vector<std::string> kPositive = {"amazing", "great", "wonderful", "excellent"};
const std::vector<std::string> kNegative = {"terrible", "awful", "horrible", "bad"};
const std::vector<std::string> kNeutral = {"okay", "average", "fine", "acceptable"};

EntityTask entity_task(std::initializer_list<const char*> labels) {
  EntityTask task;
  for (const char* l : labels) task.entities.push_back({l, std::nullopt});
  return task;
}

ClassificationSpec sentiment_task() {
  return {"sentiment", {{"positive", {}}, {"negative", {}}, {"neutral", {}}}, false, 0.5};
}

ClassificationSpec topics_task() {
  return {"topics", {{"technology", {}}, {"travel", {}}, {"business", {}}}, true, 0.5};
}

StructureSpec product_structure() {
  return {"product", {parse_field_dsl("name::str"), parse_field_dsl("price::str")}};
}

/// Appends text and remembers where each piece landed.
class TextBuilder {
 public:
  CharSpan add(std::string_view s) {
    const std::size_t start = text_.size();
    text_ += s;
    return {start, text_.size()};
  }
  TextBuilder& lit(std::string_view s) {
    text_ += s;
    return *this;
  }
  std::string take() { return std::move(text_); }

 private:
  std::string text_;
};

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed) {}

  const std::string& pick(const std::vector<std::string>& pool) {
    return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng_)];
  }

  /// Two distinct entries.
  std::pair<std::string, std::string> pick_two(const std::vector<std::string>& pool) {
    const std::string a = pick(pool);
    std::string b = pick(pool);
    while (b == a) b = pick(pool);
    return {a, b};
  }

  std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

  Example ner() {
    Example ex;
    TextBuilder tb;
    auto ent = [&](const char* label, std::string_view s) { ex.entities.push_back({label, tb.add(s)}); };
    switch (below(6)) {
      case 0:
        ex.schema.entity_task = entity_task({"person", "location"});
        ent("person", pick(kPersons));
        tb.lit(" works in ");
        ent("location", pick(kLocations));
        break;
      case 1:
        ex.schema.entity_task = entity_task({"person", "location"});
        ent("person", pick(kPersons));
        tb.lit(" lives in ");
        ent("location", pick(kLocations));
        tb.lit(".");
        break;
      case 2: {
        ex.schema.entity_task = entity_task({"person", "location"});
        const auto [from, to] = pick_two(kLocations);
        ent("person", pick(kPersons));
        tb.lit(" moved from ");
        ent("location", from);
        tb.lit(" to ");
        ent("location", to);
        tb.lit(".");
        break;
      }
      case 3: {
        ex.schema.entity_task = entity_task({"person", "location"});
        const auto [a, b] = pick_two(kPersons);
        ent("person", a);
        tb.lit(" met ");
        ent("person", b);
        tb.lit(" in ");
        ent("location", pick(kLocations));
        tb.lit(".");
        break;
      }
      case 4:
        ex.schema.entity_task = entity_task({"person", "product"});
        ent("person", pick(kPersons));
        tb.lit(" bought the ");
        ent("product", pick(kProducts));
        break;
      default:
        ex.schema.entity_task = entity_task({"person", "location", "product"});
        ent("person", pick(kPersons));
        tb.lit(" bought a ");
        ent("product", pick(kProducts));
        tb.lit(" in ");
        ent("location", pick(kLocations));
        tb.lit(".");
        break;
    }
    ex.text = tb.take();
    return ex;
  }

  Example structure(std::size_t count) {
    static const std::vector<std::string> kVerbs = {" costs ", " is ", " sells for ", " is priced at "};
    static const std::vector<std::string> kEmpty = {"No prices were announced today.",
                                                    "The store opens at nine.",
                                                    "Nothing was on sale this week."};
    Example ex;
    ex.schema.structure_tasks.push_back(product_structure());
    GoldStructure gold{"product", {}};
    if (count == 0) {
      ex.text = pick(kEmpty);
      ex.structures.push_back(std::move(gold));
      return ex;
    }
    std::vector<std::string> names = kProducts;
    std::shuffle(names.begin(), names.end(), rng_);
    std::vector<std::string> prices = kPrices;
    std::shuffle(prices.begin(), prices.end(), rng_);
    TextBuilder tb;
    for (std::size_t i = 0; i < count; ++i) {
      if (i > 0) tb.lit(" ");
      GoldInstance inst;
      inst.fields.push_back({"name", {tb.add(names[i])}});
      tb.lit(pick(kVerbs));
      inst.fields.push_back({"price", {tb.add(prices[i])}});
      tb.lit(".");
      gold.instances.push_back(std::move(inst));
    }
    ex.text = tb.take();
    ex.structures.push_back(std::move(gold));
    return ex;
  }

  Example sentiment() {
    Example ex;
    ex.schema.classification_tasks.push_back(sentiment_task());
    const std::size_t polarity = below(3);
    const auto& adjectives = polarity == 0 ? kPositive : (polarity == 1 ? kNegative : kNeutral);
    ex.text = pick(kSubjects) + (below(2) == 0 ? " is " : " was ") + pick(adjectives) +
              (polarity == 2 ? "." : "!");
    ex.classifications.push_back({"sentiment", {sentiment_task().labels[polarity].label}});
    return ex;
  }

  Example topics() {
    Example ex;
    ex.schema.classification_tasks.push_back(topics_task());
    switch (below(4)) {
      case 0:
        ex.text = "The " + pick(kProducts) + " launch boosted quarterly sales.";
        ex.classifications.push_back({"topics", {"technology", "business"}});
        break;
      case 1:
        ex.text = pick(kPersons) + " flew to " + pick(kLocations) + " for a sales meeting.";
        ex.classifications.push_back({"topics", {"travel", "business"}});
        break;
      case 2:
        ex.text = "The new " + pick(kProducts) + " has a faster chip.";
        ex.classifications.push_back({"topics", {"technology"}});
        break;
      default:
        ex.text = pick(kPersons) + " toured " + pick(kLocations) + " last summer.";
        ex.classifications.push_back({"topics", {"travel"}});
        break;
    }
    return ex;
  }

  Example composed() {
    static const std::vector<std::pair<std::string, std::size_t>> kVerbs = {
        {" loved the ", 0}, {" hated the ", 1}, {" used the ", 2}};
    Example ex;
    ex.schema.entity_task = entity_task({"person", "product"});
    ex.schema.classification_tasks.push_back(sentiment_task());
    const auto& [verb, polarity] = kVerbs[below(kVerbs.size())];
    TextBuilder tb;
    ex.entities.push_back({"person", tb.add(pick(kPersons))});
    tb.lit(verb);
    ex.entities.push_back({"product", tb.add(pick(kProducts))});
    ex.text = tb.take();
    ex.classifications.push_back({"sentiment", {sentiment_task().labels[polarity].label}});
    return ex;
  }

 private:
  std::mt19937_64 rng_;
};

std::vector<Example> canonical_examples() {
  std::vector<Example> out;
  {
    Example ex;
    ex.text = "John works in Paris";
    ex.schema.entity_task = entity_task({"person", "location"});
    ex.entities = {{"person", {0, 4}}, {"location", {14, 19}}};
    out.push_back(std::move(ex));
  }
  {
    Example ex;
    ex.text = "iPhone costs $999. Galaxy is $899.";
    ex.schema.structure_tasks.push_back(product_structure());
    ex.structures.push_back(
        {"product",
         {GoldInstance{{{"name", {{0, 6}}}, {"price", {{13, 17}}}}},
          GoldInstance{{{"name", {{19, 25}}}, {"price", {{29, 33}}}}}}});
    out.push_back(std::move(ex));
  }
  {
    Example ex;
    ex.text = "This movie is amazing!";
    ex.schema.classification_tasks.push_back(sentiment_task());
    ex.classifications.push_back({"sentiment", {"positive"}});
    out.push_back(std::move(ex));
  }
  {
    Example ex;
    ex.text = "Steve Jobs loved the iPhone";
    ex.schema.entity_task = entity_task({"person", "product"});
    ex.schema.classification_tasks.push_back(sentiment_task());
    ex.entities = {{"person", {0, 10}}, {"product", {21, 27}}};
    ex.classifications.push_back({"sentiment", {"positive"}});
    out.push_back(std::move(ex));
  }
  return out;
}

ordered_json spans_json(const std::vector<CharSpan>& spans) {
  ordered_json out = ordered_json::array();
  for (const auto& s : spans) out.push_back({s.start, s.end});
  return out;
}

CharSpan span_from_json(const ordered_json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("span must be [start, end]");
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

}  // namespace

const std::vector<std::string>& prompt_sugar_tokens() {
  static const std::vector<std::string> tokens = {"entities", "(", ")", "[", "|", "]", ":"};
  return tokens;
}

std::vector<Example> generate_synthetic(std::uint64_t seed, std::size_t n) {
  if (n == 0) throw std::invalid_argument("generate_synthetic needs n >= 1");
  std::vector<Example> out = canonical_examples();
  out.resize(std::min(out.size(), n));
  Generator gen(seed);
  std::size_t structure_round = 0;
  while (out.size() < n) {
    const std::size_t roll = gen.below(20);
    if (roll < 4) {
      out.push_back(gen.ner());
    } else if (roll < 12) {
      // Every count 0..3 appears; multi-instance texts are the hard case.
      static constexpr std::size_t kCounts[] = {0, 1, 2, 3, 3, 2, 3};
      out.push_back(gen.structure(kCounts[structure_round++ % std::size(kCounts)]));
    } else if (roll < 15) {
      out.push_back(gen.sentiment());
    } else if (roll < 17) {
      out.push_back(gen.topics());
    } else {
      out.push_back(gen.composed());
    }
  }
  return out;
}

std::vector<std::string> corpus_strings(const std::vector<Example>& corpus) {
  std::vector<std::string> out;
  for (const auto& ex : corpus) {
    out.push_back(ex.text);
    const Schema& s = ex.schema;
    if (s.entity_task) {
      out.push_back(s.entity_task->task_label);
      for (const auto& e : s.entity_task->entities) {
        out.push_back(e.label);
        if (e.description) out.push_back(*e.description);
      }
    }
    for (const auto& c : s.classification_tasks) {
      out.push_back(c.task_name);
      for (const auto& l : c.labels) {
        out.push_back(l.label);
        if (l.description) out.push_back(*l.description);
      }
    }
    for (const auto& st : s.structure_tasks) {
      out.push_back(st.parent_name);
      for (const auto& f : st.fields) {
        out.push_back(f.name);
        if (f.description) out.push_back(*f.description);
        if (f.choices) out.insert(out.end(), f.choices->begin(), f.choices->end());
      }
    }
  }
  return out;
}

std::vector<std::string> validate_example(const Example& ex, std::size_t max_span_width) {
  std::vector<std::string> out;
  for (const auto& v : validate_schema(ex.schema)) out.push_back("schema " + v.path + ": " + v.message);

  const auto pieces = split_pieces(ex.text);
  auto check_span = [&](const CharSpan& s, const std::string& what) {
    std::size_t first = pieces.size();
    std::size_t last = pieces.size();
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (pieces[i].start == s.start) first = i;
      if (pieces[i].end == s.end) last = i;
    }
    if (first == pieces.size() || last == pieces.size() || last < first) {
      out.push_back(what + ": span [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                    ") is not token aligned");
    } else if (last - first + 1 > max_span_width) {
      out.push_back(what + ": span wider than " + std::to_string(max_span_width) + " tokens");
    }
  };

  for (const auto& e : ex.entities) {
    const bool declared =
        ex.schema.entity_task &&
        std::any_of(ex.schema.entity_task->entities.begin(), ex.schema.entity_task->entities.end(),
                    [&](const EntitySpec& s) { return s.label == e.label; });
    if (!declared) out.push_back("entity label '" + e.label + "' not in schema");
    check_span(e.chars, "entity " + e.label);
  }

  for (const auto& c : ex.classifications) {
    auto it = std::find_if(ex.schema.classification_tasks.begin(), ex.schema.classification_tasks.end(),
                           [&](const ClassificationSpec& s) { return s.task_name == c.task; });
    if (it == ex.schema.classification_tasks.end()) {
      out.push_back("classification task '" + c.task + "' not in schema");
      continue;
    }
    if (!it->multi_label && c.labels.size() != 1) {
      out.push_back("single-label task '" + c.task + "' needs exactly one gold label");
    }
    for (const auto& l : c.labels) {
      if (std::none_of(it->labels.begin(), it->labels.end(),
                       [&](const ClassLabel& cl) { return cl.label == l; })) {
        out.push_back("label '" + l + "' not declared for task '" + c.task + "'");
      }
    }
  }

  for (const auto& s : ex.structures) {
    auto it = std::find_if(ex.schema.structure_tasks.begin(), ex.schema.structure_tasks.end(),
                           [&](const StructureSpec& spec) { return spec.parent_name == s.parent; });
    if (it == ex.schema.structure_tasks.end()) {
      out.push_back("structure '" + s.parent + "' not in schema");
      continue;
    }
    if (s.instances.size() > kMaxInstances) {
      out.push_back("structure '" + s.parent + "' has more than 19 instances");
    }
    for (const auto& inst : s.instances) {
      for (const auto& [field, spans] : inst.fields) {
        auto f = std::find_if(it->fields.begin(), it->fields.end(),
                              [&](const FieldSpec& fs) { return fs.name == field; });
        if (f == it->fields.end()) {
          out.push_back("field '" + field + "' not in structure '" + s.parent + "'");
          continue;
        }
        if (f->kind == FieldKind::Str && spans.size() != 1) {
          out.push_back("str field '" + field + "' needs exactly one span");
        }
        for (const auto& sp : spans) check_span(sp, s.parent + "." + field);
      }
    }
  }
  return out;
}

std::string example_to_json(const Example& ex) {
  ordered_json doc;
  doc["text"] = ex.text;
  doc["schema"] = ordered_json::parse(schema_to_json(ex.schema));
  ordered_json entities = ordered_json::array();
  for (const auto& e : ex.entities) {
    entities.push_back({{"label", e.label}, {"start", e.chars.start}, {"end", e.chars.end}});
  }
  doc["entities"] = std::move(entities);
  ordered_json structures = ordered_json::array();
  for (const auto& s : ex.structures) {
    ordered_json instances = ordered_json::array();
    for (const auto& inst : s.instances) {
      ordered_json obj = ordered_json::object();
      for (const auto& [field, spans] : inst.fields) obj[field] = spans_json(spans);
      instances.push_back(std::move(obj));
    }
    structures.push_back({{"name", s.parent}, {"instances", std::move(instances)}});
  }
  doc["structures"] = std::move(structures);
  ordered_json classifications = ordered_json::array();
  for (const auto& c : ex.classifications) {
    classifications.push_back({{"task", c.task}, {"labels", c.labels}});
  }
  doc["classifications"] = std::move(classifications);
  return doc.dump();
}

Example example_from_json(const std::string& line) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed example: ") + e.what(), 1, e.byte);
  }
  Example ex;
  try {
    ex.text = doc.at("text").get<std::string>();
    ex.schema = json_to_schema(doc.at("schema").dump());
    for (const auto& e : doc.value("entities", ordered_json::array())) {
      ex.entities.push_back({e.at("label").get<std::string>(),
                             {e.at("start").get<std::size_t>(), e.at("end").get<std::size_t>()}});
    }
    for (const auto& s : doc.value("structures", ordered_json::array())) {
      GoldStructure gs{s.at("name").get<std::string>(), {}};
      for (const auto& inst : s.at("instances")) {
        GoldInstance gi;
        for (const auto& [field, spans] : inst.items()) {
          std::vector<CharSpan> values;
          for (const auto& sp : spans) values.push_back(span_from_json(sp));
          gi.fields.emplace_back(field, std::move(values));
        }
        gs.instances.push_back(std::move(gi));
      }
      ex.structures.push_back(std::move(gs));
    }
    for (const auto& c : doc.value("classifications", ordered_json::array())) {
      ex.classifications.push_back(
          {c.at("task").get<std::string>(), c.at("labels").get<std::vector<std::string>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed example: ") + e.what(), 0, 0);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("malformed example: ") + e.what(), 0, 0);
  }
  return ex;
}

std::vector<Example> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("FileError", "cannot open " + path.string());
  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(example_from_json(line));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what(), line_no,
                       e.column());
    }
  }
  return out;
}

void write_jsonl(const std::vector<Example>& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("FileError", "cannot write " + path.string());
  for (const auto& ex : corpus) out << example_to_json(ex) << '\n';
  if (!out) throw Error("FileError", "short write to " + path.string());
}

}  // namespace schemex
