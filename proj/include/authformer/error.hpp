#pragma once

#include <stdexcept>
#include <string>

namespace authformer {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied something that violates a documented precondition.
/// Subclasses are all "validation" failures for exit-code purposes.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Misuse of the autodiff machinery (e.g. backward on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or stream failure; message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A file was read but its bytes do not form a valid artifact.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

class UnsupportedVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace authformer
