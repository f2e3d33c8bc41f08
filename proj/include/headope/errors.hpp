#pragma once

#include <stdexcept>
#include <string>

namespace headope {

// Input could not be decoded at all (bad JSON, wrong types).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input decoded but violates a domain invariant (bad rating, inconsistent
// tool/outcome, mismatched user within a session).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// A function precondition was violated by the caller.
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// An estimate is undefined on the given data (e.g. all importance
// weights zero). Reported, never silently imputed.
class EstimationError : public std::runtime_error {
 public:
  explicit EstimationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad command-line or config-file input.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace headope
