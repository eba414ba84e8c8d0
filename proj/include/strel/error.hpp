#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace strel {

// Base of every error the toolkit raises on purpose. kind() is a short,
// stable category used by the CLI's machine-readable error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("parse", "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error("validation", message) {}
};

class ImportError : public Error {
 public:
  explicit ImportError(const std::string& message) : Error("import", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

class CheckpointError : public Error {
 public:
  explicit CheckpointError(const std::string& message)
      : Error("checkpoint", message) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& message)
      : Error("training", message) {}
};

class MetricError : public Error {
 public:
  explicit MetricError(const std::string& message) : Error("metric", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

}  // namespace strel
