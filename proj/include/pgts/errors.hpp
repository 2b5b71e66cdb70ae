#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pgts {

// Bad argument to a public operation (precondition violated).
class InvalidArgument : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Cholesky failed even after the jitter ladder.
class FactorizationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// An iterative solver hit its iteration cap.
class NumericalFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// The Polya-Gamma accept-reject loop exceeded its proposal cap.
class SamplerFault : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
  public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class LoadError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class TransformError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class AggregationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace pgts
