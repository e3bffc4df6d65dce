#include "halluscore/error.hpp"

namespace halluscore {

ErrorClass error_class(ErrorCode code) {
  switch (code) {
    case ErrorCode::Transport:
    case ErrorCode::MalformedResponse:
    case ErrorCode::FixtureMiss:
    case ErrorCode::InvalidDistribution:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::MissingVerdictToken:
    case ErrorCode::Abstention:
      return ErrorClass::Backend;
    case ErrorCode::Internal:
    case ErrorCode::NotFitted:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::EmNonConvergence:
    case ErrorCode::FoldLeakage:
    case ErrorCode::IoError:
      return ErrorClass::Internal;
    default:
      return ErrorClass::Validation;
  }
}

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingLabels: return "MissingLabels";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::EmptyFold: return "EmptyFold";
    case ErrorCode::ConstantInput: return "ConstantInput";
    case ErrorCode::NoScorers: return "NoScorers";
    case ErrorCode::TooManyScorers: return "TooManyScorers";
    case ErrorCode::NoAffordableSubset: return "NoAffordableSubset";
    case ErrorCode::DegenerateSampling: return "DegenerateSampling";
    case ErrorCode::UnknownScorer: return "UnknownScorer";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::FixtureMiss: return "FixtureMiss";
    case ErrorCode::InvalidDistribution: return "InvalidDistribution";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MissingVerdictToken: return "MissingVerdictToken";
    case ErrorCode::Abstention: return "Abstention";
    case ErrorCode::Internal: return "Internal";
    case ErrorCode::NotFitted: return "NotFitted";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::EmNonConvergence: return "EmNonConvergence";
    case ErrorCode::FoldLeakage: return "FoldLeakage";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
      code_(code),
      detail_(message) {}

void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace halluscore
