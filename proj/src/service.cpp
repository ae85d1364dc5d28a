#include "schemex/service.hpp"

#include "httplib.h"
#include "json.hpp"
#include "schemex/decode.hpp"

namespace schemex {

namespace {

using json = nlohmann::ordered_json;

ServiceResponse error_response(int status, const std::string& kind, const std::string& message,
                               json extra = json::object()) {
  json body = {{"error", kind}, {"message", message}};
  for (auto& [k, v] : extra.items()) body[k] = v;
  return {status, body.dump()};
}

std::pair<std::size_t, std::size_t> line_column(std::string_view doc, std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i + 1 < byte && i < doc.size(); ++i) {
    if (doc[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

}  // namespace

ExtractionService::ExtractionService(Model model, std::string model_id, ServiceConfig config)
    : model_(std::move(model)), model_id_(std::move(model_id)), config_(config) {}

ServiceResponse ExtractionService::extract(std::string_view request_body) const {
  json request;
  try {
    request = json::parse(request_body.begin(), request_body.end());
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, column] = line_column(request_body, e.byte);
    return error_response(400, "ParseError", "malformed request JSON",
                          {{"line", line}, {"column", column}});
  }

  try {
    if (!request.is_object()) return error_response(400, "ParseError", "request must be an object");
    auto text_it = request.find("text");
    if (text_it == request.end() || !text_it->is_string()) {
      return error_response(400, "ParseError", "\"text\" must be a string");
    }
    const std::string text = text_it->get<std::string>();
    if (text.size() > config_.max_text_bytes) {
      return error_response(413, "TextTooLarge",
                            "text is " + std::to_string(text.size()) + " bytes; limit is " +
                                std::to_string(config_.max_text_bytes));
    }

    auto schema_it = request.find("schema");
    if (schema_it == request.end()) return error_response(400, "ParseError", "missing \"schema\"");
    const std::string schema_doc =
        schema_it->is_string() ? schema_it->get<std::string>() : schema_it->dump();
    const Schema schema = json_to_schema(schema_doc);

    RunOptions options;
    options.max_len = config_.max_len;
    if (auto opt = request.find("options"); opt != request.end() && !opt->is_null()) {
      if (!opt->is_object()) return error_response(400, "ParseError", "\"options\" must be an object");
      if (auto th = opt->find("threshold"); th != opt->end()) {
        if (!th->is_number() || th->get<double>() < 0.0 || th->get<double>() > 1.0) {
          return error_response(400, "InvalidOption", "threshold must be a number in [0, 1]");
        }
        options.threshold = th->get<double>();
      }
      if (auto ml = opt->find("max_len"); ml != opt->end()) {
        if (!ml->is_number_unsigned() || ml->get<std::size_t>() == 0 ||
            ml->get<std::size_t>() > model_.config.max_positions) {
          return error_response(400, "InvalidOption",
                                "max_len must be an integer in [1, " +
                                    std::to_string(model_.config.max_positions) + "]");
        }
        options.max_len = ml->get<std::size_t>();
      }
    }
    return {200, result_to_json(run_schema(model_, schema, text, options))};
  } catch (const ParseError& e) {
    json extra = json::object();
    if (e.line() > 0) extra = {{"line", e.line()}, {"column", e.column()}};
    return error_response(400, "ParseError", e.what(), extra);
  } catch (const SchemaInvalid& e) {
    json violations = json::array();
    for (const auto& v : e.violations()) violations.push_back({{"path", v.path}, {"message", v.message}});
    return error_response(400, "SchemaInvalid", e.what(), {{"violations", violations}});
  } catch (const ContextOverflow& e) {
    return error_response(422, "ContextOverflow", e.what(),
                          {{"needed", e.needed()}, {"max_len", e.max_len()}});
  } catch (const std::exception& e) {
    return error_response(500, "InternalError", e.what());
  }
}

ServiceResponse ExtractionService::health() const {
  const ModelConfig& c = model_.config;
  json body = {{"status", "ok"},
               {"model_id", model_id_},
               {"format_version", kResultFormatVersion},
               {"config",
                {{"vocab_size", c.vocab_size},
                 {"hidden_dim", c.hidden_dim},
                 {"layers", c.layers},
                 {"heads", c.heads},
                 {"ffn_dim", c.ffn_dim},
                 {"max_positions", c.max_positions},
                 {"max_span_width", c.max_span_width},
                 {"max_len", config_.max_len},
                 {"max_text_bytes", config_.max_text_bytes}}}};
  return {200, body.dump()};
}

void ExtractionService::mount(httplib::Server& server) const {
  auto reply = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body, "application/json");
  };
  server.Post("/extract", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, extract(req.body));
  });
  server.Get("/health", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, health());
  });
  server.Options(R"(/(extract|health))", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
}

bool ExtractionService::listen(const std::string& host, int port) const {
  httplib::Server server;
  mount(server);
  return server.listen(host, port);
}

}  // namespace schemex
