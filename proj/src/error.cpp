#include "dagmath/error.hpp"

namespace dagmath {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedStructure: return "malformed-structure";
    case ErrorCode::kMissingField: return "missing-field";
    case ErrorCode::kTypeError: return "type-error";
    case ErrorCode::kInvalidTrajectory: return "invalid-trajectory";
    case ErrorCode::kNoBoxedAnswer: return "no-boxed-answer";
    case ErrorCode::kInvalidFormat: return "invalid-format";
    case ErrorCode::kUnknownNode: return "unknown-node";
    case ErrorCode::kEmptySampleSet: return "empty-sample-set";
    case ErrorCode::kKOutOfRange: return "k-out-of-range";
    case ErrorCode::kEmptyDataset: return "empty-dataset";
    case ErrorCode::kEmptyCohort: return "empty-cohort";
    case ErrorCode::kStuckState: return "stuck-state";
    case ErrorCode::kNonTerminatedTrajectory: return "non-terminated-trajectory";
    case ErrorCode::kBudgetExceeded: return "budget-exceeded";
    case ErrorCode::kInvalidLength: return "invalid-length";
    case ErrorCode::kCyclicInput: return "cyclic-input";
    case ErrorCode::kKindViolation: return "kind-violation";
    case ErrorCode::kMissingCorrectSink: return "missing-correct-sink";
    case ErrorCode::kInsufficientDemos: return "insufficient-demos";
    case ErrorCode::kInsufficientInput: return "insufficient-input";
    case ErrorCode::kUnreadableCorpus: return "unreadable-corpus";
    case ErrorCode::kAuthFailure: return "auth-failure";
    case ErrorCode::kRateLimited: return "rate-limited";
    case ErrorCode::kTransportError: return "transport-error";
    case ErrorCode::kMissingTruth: return "missing-truth";
    case ErrorCode::kIoError: return "io-error";
    case ErrorCode::kConfigError: return "config-error";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
      code_(code) {}

}  // namespace dagmath
