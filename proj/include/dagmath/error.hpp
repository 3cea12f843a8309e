#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dagmath {

enum class ErrorCode {
  // trajectory text
  kMalformedStructure,
  kMissingField,
  kTypeError,
  kInvalidTrajectory,
  kNoBoxedAnswer,
  kInvalidFormat,
  // graphs
  kUnknownNode,
  // aggregation
  kEmptySampleSet,
  kKOutOfRange,
  kEmptyDataset,
  kEmptyCohort,
  // simulator
  kStuckState,
  kNonTerminatedTrajectory,
  kBudgetExceeded,
  kInvalidLength,
  kCyclicInput,
  kKindViolation,
  kMissingCorrectSink,
  // ingestion
  kInsufficientDemos,
  kInsufficientInput,
  kUnreadableCorpus,
  kAuthFailure,
  kRateLimited,
  kTransportError,
  // cli
  kMissingTruth,
  kIoError,
  kConfigError,
};

std::string_view error_code_name(ErrorCode code);

// All library failures surface as this exception; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dagmath
