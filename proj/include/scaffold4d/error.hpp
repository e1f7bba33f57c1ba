#pragma once

#include <stdexcept>
#include <string>

namespace scaffold4d {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value or input violates a documented precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed bytes inside an input file (bad magic, truncation, ...).
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Every frame of a sequence failed to produce a usable alignment.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

}  // namespace scaffold4d
