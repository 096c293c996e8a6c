#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tcnn {

// Caller broke a documented precondition (shape, range, divisibility).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
 public:
  enum class Kind { kMalformedHeader, kDimensionMismatch, kUnknownVersion, kInvariantViolation };

  ParseError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

class DegenerateFilterError : public std::runtime_error {
 public:
  explicit DegenerateFilterError(std::size_t filter)
      : std::runtime_error("filter " + std::to_string(filter) + " has zero variance"),
        filter_(filter) {}
  std::size_t filter() const noexcept { return filter_; }

 private:
  std::size_t filter_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

#define TCNN_REQUIRE(cond, msg)                                   \
  do {                                                            \
    if (!(cond)) throw ::tcnn::ContractViolation(std::string(msg)); \
  } while (0)

}  // namespace tcnn
