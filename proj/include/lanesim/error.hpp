#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lanesim {

/// Bad input: malformed files, inconsistent ids, infeasible parameters.
/// The CLI maps it to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : ValidationError(file + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A runtime invariant of the simulation broke (double occupancy, lost
/// vehicle, diverged ghost range). The CLI maps it to exit code 2.
class InvariantViolation : public std::logic_error {
 public:
  InvariantViolation(std::int64_t step, const std::string& what)
      : std::logic_error("step " + std::to_string(step) + ": " + what),
        step_(step) {}

  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

}  // namespace lanesim
