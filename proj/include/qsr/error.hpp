#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qsr {

enum class ErrorKind
{
  precondition,
  invalid_coordinate,
  degenerate_pair,
  degenerate_data,
  insufficient_data,
  singular_covariance,
  invalid_model,
  infinite_log_likelihood,
  collapsed_component,
  infeasible_fusion,
  parse,
  unsupported_version,
  io
};

//! Stable machine-readable name, used as the CLI error prefix.
std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(what)
    , kind_(kind)
  {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

//! Thrown by read_observations and friends; carries the 1-based line.
class ParseError : public Error
{
public:
  ParseError(std::size_t line, const std::string& what)
    : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + what)
    , line_(line)
  {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

[[noreturn]] inline void
fail(ErrorKind kind, const std::string& what)
{
  throw Error(kind, what);
}

inline void
require(bool condition, const std::string& what)
{
  if (!condition)
    fail(ErrorKind::precondition, what);
}

} // namespace qsr
