#pragma once

#include <stdexcept>
#include <string>

namespace xflex {

/// Bad input: malformed files, invalid parameters, missing covariates.
/// Maps to CLI exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An optimizer hit its iteration cap or stalled above tolerance.
/// Maps to CLI exit code 3.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double gradient_norm)
      : std::runtime_error(what + " (final gradient norm " +
                           std::to_string(gradient_norm) + ")"),
        gradient_norm_(gradient_norm) {}

  double gradient_norm() const noexcept { return gradient_norm_; }

 private:
  double gradient_norm_;
};

}  // namespace xflex
