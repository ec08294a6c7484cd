#pragma once

#include <stdexcept>
#include <string>

namespace dyndet {

// Base of every error the library throws. The CLI maps the two families onto exit
// codes: argument/dimension/config problems are usage errors, the rest numeric.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

class ConfigError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// A mathematical precondition (Schur-ness, rank) does not hold.
class DomainError : public NumericError {
 public:
  using NumericError::NumericError;
};

class SynthesisError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace dyndet
