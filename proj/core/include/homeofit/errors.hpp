#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace homeofit {

/// Machine-readable failure categories. The CLI maps these to exit codes
/// and writes `reason()` into report files.
enum class ErrorCode {
  kPrecondition,
  kConstantFunction,
  kNotAlternating,
  kInternalConsistency,
  kConvergence,
  kOutOfRange,
  kRangeMismatch,
  kNotSingleExtremum,
  kSingularSystem,
  kNumeric,
  kUsage,
  kEmptyDataset,
  kParse,
  kIo,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view reason() const noexcept { return to_string(code_); }

 private:
  ErrorCode code_;
};

/// Thrown by least-squares solves that lose rank beyond tolerance.
class SingularSystemError : public Error {
 public:
  SingularSystemError(const std::string& message, long effective_rank)
      : Error(ErrorCode::kSingularSystem, message), rank_(effective_rank) {}
  long effective_rank() const noexcept { return rank_; }

 private:
  long rank_;
};

/// Thrown when an iterative solver gives up; carries the last residual.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, double residual)
      : Error(ErrorCode::kConvergence, message), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, long line)
      : Error(ErrorCode::kParse, message), line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

}  // namespace homeofit
