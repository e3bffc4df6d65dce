#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace halluscore {

enum class ErrorCode {
  // input and configuration problems
  ParseError,
  DuplicateId,
  EmptyDataset,
  EmptyReference,
  EmptyText,
  TooSmall,
  LengthMismatch,
  InvalidConfig,
  InvalidArgument,
  MissingLabels,
  SingleClass,
  EmptyFold,
  ConstantInput,
  NoScorers,
  TooManyScorers,
  NoAffordableSubset,
  DegenerateSampling,
  UnknownScorer,
  // backend and wire problems
  Transport,
  MalformedResponse,
  FixtureMiss,
  InvalidDistribution,
  DimensionMismatch,
  MissingVerdictToken,
  Abstention,
  // internal invariant violations
  Internal,
  NotFitted,
  NonFiniteValue,
  EmNonConvergence,
  FoldLeakage,
  IoError,
};

// Exit code classes used by the command line tool.
enum class ErrorClass { Validation = 1, Backend = 2, Internal = 3 };

ErrorClass error_class(ErrorCode code);
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const { return code_; }
  // The message without the code-name prefix, for rethrowing with context.
  const std::string& detail() const { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message);

}  // namespace halluscore
