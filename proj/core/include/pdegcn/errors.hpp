#pragma once

#include <stdexcept>
#include <string>

namespace pdegcn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed, inconsistent or unreadable input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared during a forward or backward pass.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint file is corrupt or does not match the expected architecture.
class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace pdegcn
