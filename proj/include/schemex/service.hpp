#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "schemex/model.hpp"

namespace httplib {
class Server;
}

namespace schemex {

struct ServiceConfig {
  std::size_t max_text_bytes = 64 * 1024;
  std::size_t max_len = 512;
};

struct ServiceResponse {
  int status = 200;
  std::string body;
};

/// Request handlers over one immutable model. Handlers are const and keep
/// no per-request state, so any number may run concurrently.
///
///   POST /extract  {"schema": <schema object or JSON string>, "text": str,
///                   "options": {"threshold": num, "max_len": int}}
///   GET  /health
///
/// Errors carry {"error": kind, "message": str} plus "line"/"column" for
/// parse errors and "violations" for invalid schemas.
class ExtractionService {
 public:
  ExtractionService(Model model, std::string model_id, ServiceConfig config = {});

  ServiceResponse extract(std::string_view request_body) const;
  ServiceResponse health() const;

  /// Registers the routes on `server`.
  void mount(httplib::Server& server) const;

  /// Blocks serving on host:port. Returns false if the socket cannot bind.
  bool listen(const std::string& host, int port) const;

  const Model& model() const { return model_; }

 private:
  Model model_;
  std::string model_id_;
  ServiceConfig config_;
};

}  // namespace schemex
