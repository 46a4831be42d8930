#pragma once

#include <stdexcept>
#include <string>

namespace fosr {

/// Bad user input: malformed files, invalid parameters, violated preconditions.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of a function (K_nu(0), t < 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or incompatible persisted model file.
class FormatError : public InputError {
 public:
  using InputError::InputError;
};

/// Factorization failure, non-PSD Gram matrix, degenerate GCV denominator.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fosr
