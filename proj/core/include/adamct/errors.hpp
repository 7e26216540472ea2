#pragma once

#include <stdexcept>
#include <string>

namespace adamct {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// stable exit codes: ConfigError -> 2, DataError -> 3, everything else -> 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor dimensions disagree with an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value or combination (rejected up front, not mid-run).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Problem with input data: malformed rows, out-of-range item IDs, empty or
// fully masked sequences, infeasible negative sampling.
class DataError : public Error {
 public:
  using Error::Error;
};

// Failure during optimization, e.g. a non-finite gradient.
class TrainError : public Error {
 public:
  using Error::Error;
};

// Failure during metric computation, e.g. a non-finite score.
class EvalError : public Error {
 public:
  using Error::Error;
};

// Checkpoint load failures keep a machine-readable kind so callers can tell
// a stale format from a corrupt payload.
class CheckpointError : public Error {
 public:
  enum class Kind {
    kVersionMismatch,
    kBadHeader,
    kTruncatedPayload,
    kSizeMismatch,
    kIo,
  };

  CheckpointError(Kind kind, const std::string& message)
      : Error(message), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace adamct
