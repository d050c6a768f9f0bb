#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace episir {

// Malformed input text; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Iterative method hit its cap; the last iterate is kept for diagnosis.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> last_iterate, double last_estimate)
      : std::runtime_error(what), last_iterate_(std::move(last_iterate)), last_estimate_(last_estimate) {}
  const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }
  double last_estimate() const noexcept { return last_estimate_; }

 private:
  std::vector<double> last_iterate_;
  double last_estimate_;
};

class SizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The optimization model cannot be built or solved as posed (e.g. budget too small).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleError : public ModelError {
 public:
  using ModelError::ModelError;
};

// Bad experiment configuration or unreadable/unwritable file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace episir
