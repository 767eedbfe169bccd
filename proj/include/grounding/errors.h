#ifndef GROUNDING_ERRORS_H_
#define GROUNDING_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace grounding {

// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed text input. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string &what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Well-formed rows that do not form a valid dependency tree.
class StructureError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// Caller violated an operation's precondition (e.g. non-scalar loss).
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class CorruptionError : public Error {
 public:
  using Error::Error;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

// No description singles out the requested proposal.
class AmbiguityError : public Error {
 public:
  using Error::Error;
};

// Non-finite values during optimisation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace grounding

#endif  // GROUNDING_ERRORS_H_
