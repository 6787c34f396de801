#pragma once

#include <stdexcept>
#include <string>

namespace ssrp {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kInvalidArgument,    // bad parameter value (W < 1, fold id out of range, ...)
  kShape,              // tensor / matrix dimension mismatch
  kContract,           // precondition of an operation violated
  kDecode,             // malformed input file
  kUnsupportedFormat,  // well-formed input we do not handle
  kSchema,             // manifest / config structure problem
  kValidation,         // manifest / config content problem
  kInsufficientData,   // too few samples or too little audio
  kDegenerate,         // numerically degenerate input (zero variance, batch of 1)
  kIo,                 // read / write failure
  kDivergence,         // NaN or inf during training
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Thrown when a training loss turns non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, const std::string& what)
      : Error(ErrorKind::kDivergence, what), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

/// Process exit code for an error: 1 usage, 2 data/schema, 3 runtime.
inline int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
      return 1;
    case ErrorKind::kDecode:
    case ErrorKind::kUnsupportedFormat:
    case ErrorKind::kSchema:
    case ErrorKind::kValidation:
    case ErrorKind::kInsufficientData:
    case ErrorKind::kIo:
      return 2;
    default:
      return 3;
  }
}

}  // namespace ssrp
