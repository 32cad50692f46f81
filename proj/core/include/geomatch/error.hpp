#pragma once

#include <stdexcept>
#include <string>

namespace geomatch {

/// Base class for every error raised by the library. `kind()` is a short,
/// machine-parseable tag used by the CLI when it reports failures.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// A column, feature or level does not match the declared schema.
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& message) : Error("schema", message) {}
};

/// A token in an input file could not be parsed.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message) : Error("parse", message) {}
};

/// Invalid settings (counts below their minimum, empty grids, ...).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

/// An artifact on disk is missing or does not match its recorded hash.
class ArtifactError : public Error {
 public:
  explicit ArtifactError(const std::string& message) : Error("artifact", message) {}
};

}  // namespace geomatch
