#pragma once

#include <stdexcept>
#include <string>

namespace stochreg {

enum class ErrorKind {
  input,
  degenerate_input,
  numerical,
  divergence,
  range_violation,
  domain,
  assumption_violation,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define STOCHREG_ERROR(Name, Kind)                                   \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(Kind, what) {}    \
  };

STOCHREG_ERROR(InputError, ErrorKind::input)
STOCHREG_ERROR(DegenerateInputError, ErrorKind::degenerate_input)
STOCHREG_ERROR(NumericalError, ErrorKind::numerical)
STOCHREG_ERROR(DivergenceError, ErrorKind::divergence)
STOCHREG_ERROR(RangeViolationError, ErrorKind::range_violation)
STOCHREG_ERROR(DomainError, ErrorKind::domain)
STOCHREG_ERROR(AssumptionViolationError, ErrorKind::assumption_violation)
STOCHREG_ERROR(IoError, ErrorKind::io)

#undef STOCHREG_ERROR

// Process exit code used by the CLI for each error kind.
int exit_code(ErrorKind kind) noexcept;

}  // namespace stochreg
