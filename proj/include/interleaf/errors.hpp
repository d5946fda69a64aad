#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace interleaf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented invariant (bad manifest, bad config, arity).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A pose/action vector did not have exactly seven entries.
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Manifest parse/validation failure, carrying the 1-based line number
/// (0 when the failure is not tied to a line).
class ManifestError : public ValidationError {
 public:
  ManifestError(std::size_t line, const std::string& what)
      : ValidationError(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Filesystem write/read failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A model backend could not be reached after retries. Aborts a run.
class StageUnavailable : public Error {
 public:
  using Error::Error;
};

/// Malformed wire-protocol request or response.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// No detection at or above threshold in any candidate frame.
class NotFound : public Error {
 public:
  using Error::Error;
};

/// The segmentation backend returned an empty mask.
class SegmentEmpty : public Error {
 public:
  using Error::Error;
};

/// No image source could fill an instruction slot.
class AugmentUnavailable : public Error {
 public:
  using Error::Error;
};

/// The rule parser declines the instruction (e.g. too long); use the service.
class NeedsService : public Error {
 public:
  using Error::Error;
};

/// A parsing service returned a result that does not reconstruct the input.
class ParseRejected : public Error {
 public:
  using Error::Error;
};

}  // namespace interleaf
