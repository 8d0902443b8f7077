#pragma once

#include <stdexcept>
#include <string>

namespace spinorbit {

//! Caller supplied something that violates a precondition (bad dimensions,
//! non-physical matrix, malformed file). Maps to CLI exit code 2.
class InvalidArgument : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

//! A numerical procedure failed on valid input (singular system, no
//! convergence). Maps to CLI exit code 1.
class NumericalError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

//! Input file could not be parsed. Carries the 1-based line number.
class ParseError : public InvalidArgument
{
  public:
    ParseError(std::string const& what, int line)
        : InvalidArgument(what), line_(line)
    {
    }

    int line() const noexcept { return line_; }

  private:
    int line_;
};

}  // namespace spinorbit
