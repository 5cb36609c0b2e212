#pragma once

#include <stdexcept>
#include <string>

namespace letf {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  ok = 0,
  validation = 1,
  numeric_precondition = 2,
  divergence = 3,
};

class Error : public std::runtime_error {
 public:
  Error(const std::string& what, ExitCode code)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Bad configuration, malformed input files, misaligned series.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(what, ExitCode::validation) {}
};

class ParseError : public ConfigError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class AlignmentError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Arguments outside the domain of a numeric routine.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what)
      : Error(what, ExitCode::numeric_precondition) {}
};

class MomentDivergenceError : public DomainError {
 public:
  using DomainError::DomainError;
};

class DegenerateModelError : public DomainError {
 public:
  using DomainError::DomainError;
};

class UndefinedStatisticError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what)
      : Error(what, ExitCode::divergence) {}
};

}  // namespace letf
