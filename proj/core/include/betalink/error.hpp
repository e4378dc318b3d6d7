#pragma once

#include <stdexcept>
#include <string>

namespace betalink {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A linear predictor left the range on which an inverse link is defined.
class LinkDomainError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Malformed user input: dimensions, files, configuration.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be inverted is singular.
class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

/// Likelihood maximization did not reach the gradient criterion.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace betalink
