#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pinit {

// Base class for all recoverable library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/layer dimensions do not agree.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid parameter, grid, range, or configuration value.
struct ConfigError : Error {
  using Error::Error;
};

// Coordinate outside the evaluable domain.
struct DomainError : Error {
  using Error::Error;
};

// Non-finite value produced where finite math is required.
struct NumericError : Error {
  using Error::Error;
};

// Malformed serialized data. Carries the byte offset of the problem.
struct FormatError : Error {
  size_t offset;
  FormatError(const std::string& msg, size_t byte_offset)
      : Error(msg + " (at byte " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
};

// File declares a format version this build does not understand.
struct VersionError : FormatError {
  using FormatError::FormatError;
};

// Checkpoint/feature transfer failed (shape or compatibility).
struct TransferError : Error {
  using Error::Error;
};

// API misuse: caller broke a documented protocol (programming error).
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace pinit
