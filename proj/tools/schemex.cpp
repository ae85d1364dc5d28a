// Command-line front end: gen-data, train, extract, eval, bench, serve.
//
// Failures print one JSON line {"error": kind, "message": ...} to stderr and
// exit with 2 (usage), 3 (file), 4 (schema), 5 (context overflow) or 1.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "schemex/decode.hpp"
#include "schemex/evalbench.hpp"
#include "schemex/model_io.hpp"
#include "schemex/service.hpp"
#include "schemex/training.hpp"

namespace {

using namespace schemex;

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kFile = 3, kSchema = 4, kOverflow = 5 };

int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
  return code;
}

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("FileError", "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Inline JSON when the argument starts with '{', otherwise a file path.
std::string schema_source(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && arg[first] == '{') return arg;
  return read_text_file(arg);
}

Model load_or_fail(const std::string& path) {
  if (path.empty()) throw Error("UsageError", "no model given (--model or SCHEMEX_MODEL)");
  return load_model(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"schemex: schema-driven single-pass information extraction"};
  app.require_subcommand(1);

  // gen-data
  std::uint64_t gen_seed = 1;
  std::size_t gen_count = 200;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic JSONL corpus");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--count", gen_count, "Number of examples")->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "Output JSONL path")->required();

  // train
  std::string train_data, train_out;
  TrainConfig tcfg;
  std::uint64_t model_seed = 7;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a JSONL corpus");
  train_cmd->add_option("--data", train_data, "Training JSONL")->required();
  train_cmd->add_option("--out", train_out, "Output model file")->required();
  train_cmd->add_option("--epochs", tcfg.epochs, "Epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tcfg.seed, "Shuffling seed");
  train_cmd->add_option("--model-seed", model_seed, "Initialization seed");
  train_cmd->add_option("--lr-backbone", tcfg.lr_backbone, "Encoder learning rate");
  train_cmd->add_option("--lr-heads", tcfg.lr_heads, "Head learning rate");
  train_cmd->add_option("--warmup", tcfg.warmup_steps, "Warmup steps");
  train_cmd->add_option("--batch-size", tcfg.batch_size, "Examples per step");
  train_cmd->add_option("--weight-decay", tcfg.weight_decay, "Decoupled weight decay");
  train_cmd->add_option("--grad-clip", tcfg.grad_clip, "Global gradient-norm clip");
  train_cmd->add_option("--beta2", tcfg.beta2, "Adam second-moment decay");

  // extract
  std::string model_path = env_or("SCHEMEX_MODEL", "");
  std::string schema_arg, text_arg;
  double threshold = kDefaultThreshold;
  std::size_t max_len = kDefaultMaxLen;
  bool dump_plan = false;
  auto* extract = app.add_subcommand("extract", "Run a schema over one text");
  extract->add_option("--model", model_path, "Model file (default $SCHEMEX_MODEL)");
  extract->add_option("--schema", schema_arg, "Schema JSON file, or inline JSON")->required();
  extract->add_option("--text", text_arg, "Input text, or - for standard input")->required();
  extract->add_option("--threshold", threshold, "Span threshold")->check(CLI::Range(0.0, 1.0));
  extract->add_option("--max-len", max_len, "Prompt length limit")->check(CLI::PositiveNumber);
  extract->add_flag("--dump-plan", dump_plan, "Print the compiled prompt plan instead");

  // eval
  std::string eval_data;
  auto* eval = app.add_subcommand("eval", "Score a model on a JSONL corpus");
  eval->add_option("--model", model_path, "Model file (default $SCHEMEX_MODEL)");
  eval->add_option("--data", eval_data, "Evaluation JSONL")->required();

  // bench
  std::vector<std::size_t> bench_counts = {5, 10, 20, 50};
  BenchConfig bcfg;
  auto* bench = app.add_subcommand("bench", "Composed vs per-label latency scaling");
  bench->add_option("--model", model_path, "Model file (default $SCHEMEX_MODEL)");
  bench->add_option("--labels", bench_counts, "Label counts")->delimiter(',');
  bench->add_option("--repeats", bcfg.repeats, "Timed repeats (>= 10)")->check(CLI::Range(10, 100000));

  // serve
  int port = std::atoi(env_or("SCHEMEX_PORT", "8080").c_str());
  std::string host = "127.0.0.1";
  auto* serve = app.add_subcommand("serve", "Serve POST /extract and GET /health");
  serve->add_option("--model", model_path, "Model file (default $SCHEMEX_MODEL)");
  serve->add_option("--port", port, "Port (default $SCHEMEX_PORT or 8080)");
  serve->add_option("--host", host, "Bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kUsage, "UsageError", e.what());
  }

  try {
    if (*gen) {
      const auto corpus = generate_synthetic(gen_seed, gen_count);
      write_jsonl(corpus, gen_out);
      std::cout << nlohmann::json{{"examples", corpus.size()}, {"out", gen_out}}.dump() << '\n';
      return kOk;
    }

    if (*train_cmd) {
      const auto corpus = read_jsonl(train_data);
      if (corpus.empty()) return fail(kUsage, "UsageError", "training corpus is empty");
      Model model = make_desk_model(corpus, model_seed);
      const TrainReport report = train(model, corpus, tcfg, [](std::size_t epoch, double loss) {
        std::cerr << "epoch " << epoch + 1 << " loss " << loss << '\n';
      });
      save_model(model, train_out);
      std::cout << nlohmann::json{{"out", train_out},
                                  {"model_id", model_file_id(train_out)},
                                  {"steps", report.steps},
                                  {"skipped", report.skipped},
                                  {"epoch_loss", report.epoch_loss}}
                       .dump()
                << '\n';
      return kOk;
    }

    if (*extract) {
      const Model model = load_or_fail(model_path);
      const Schema schema = json_to_schema(schema_source(schema_arg));
      std::string text = text_arg;
      if (text_arg == "-") {
        text.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
      }
      if (dump_plan) {
        std::cout << plan_to_json(compose_tasks(schema, text, model.vocab, max_len), model.vocab) << '\n';
        return kOk;
      }
      RunOptions options;
      options.threshold = threshold;
      options.max_len = max_len;
      std::cout << result_to_json(run_schema(model, schema, text, options), 2) << '\n';
      return kOk;
    }

    if (*eval) {
      const Model model = load_or_fail(model_path);
      std::cout << eval_to_json(evaluate(model, read_jsonl(eval_data))) << '\n';
      return kOk;
    }

    if (*bench) {
      const Model model = load_or_fail(model_path);
      bcfg.label_counts = bench_counts;
      const BenchReport report = latency_bench(model, bcfg);
      std::cout << bench_to_json(report) << '\n';
      std::cerr << bench_to_table(report);
      return kOk;
    }

    if (*serve) {
      const std::string id = model_file_id(model_path.empty() ? "" : model_path);
      ExtractionService service(load_or_fail(model_path), id);
      std::cerr << "serving on " << host << ":" << port << '\n';
      if (!service.listen(host, port)) {
        return fail(kFailure, "BindError", "cannot listen on " + host + ":" + std::to_string(port));
      }
      return kOk;
    }
  } catch (const SchemaInvalid& e) {
    return fail(kSchema, e.kind(), e.what());
  } catch (const DslError& e) {
    return fail(kSchema, e.kind(), e.what());
  } catch (const ParseError& e) {
    return fail(kSchema, e.kind(), e.what());
  } catch (const ContextOverflow& e) {
    return fail(kOverflow, e.kind(), e.what());
  } catch (const ModelFileError& e) {
    return fail(kFile, e.kind(), e.what());
  } catch (const Error& e) {
    if (e.kind() == "FileError") return fail(kFile, e.kind(), e.what());
    if (e.kind() == "UsageError") return fail(kUsage, e.kind(), e.what());
    return fail(kFailure, e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail(kFailure, "InternalError", e.what());
  }
  return kUsage;
}
