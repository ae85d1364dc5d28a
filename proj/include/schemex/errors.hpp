#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace schemex {

/// Base class for every error raised by the library. `kind()` is a stable,
/// machine-readable tag (e.g. "MalformedChoices") used by the CLI and the
/// HTTP service when reporting failures.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Field DSL errors: EmptyName, InvalidName, UnknownTypeToken, MalformedChoices.
class DslError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column)
      : Error("ParseError", message), line_(line), column_(column) {}

  /// 1-based; 0 when the error is structural rather than syntactic.
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

struct Violation {
  std::string path;
  std::string message;

  bool operator==(const Violation&) const = default;
};

class SchemaInvalid : public Error {
 public:
  explicit SchemaInvalid(std::vector<Violation> violations);

  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

class ContextOverflow : public Error {
 public:
  ContextOverflow(std::size_t needed, std::size_t max_len)
      : Error("ContextOverflow", "prompt needs " + std::to_string(needed) +
                                     " tokens but max_len is " + std::to_string(max_len)),
        needed_(needed),
        max_len_(max_len) {}

  std::size_t needed() const noexcept { return needed_; }
  std::size_t max_len() const noexcept { return max_len_; }

 private:
  std::size_t needed_;
  std::size_t max_len_;
};

/// Model file errors: BadMagic, VersionMismatch, ShapeMismatch, TruncatedFile,
/// plus FileError for I/O failures.
class ModelFileError : public Error {
 public:
  using Error::Error;
};

inline SchemaInvalid::SchemaInvalid(std::vector<Violation> violations)
    : Error("SchemaInvalid",
            violations.empty() ? std::string("schema invalid")
                               : "schema invalid at '" + violations.front().path +
                                     "': " + violations.front().message),
      violations_(std::move(violations)) {}

}  // namespace schemex
