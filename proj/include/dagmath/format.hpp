#pragma once

// DAG-MATH trajectories: parsing, canonical serialization, rule checking and
// final-answer extraction.
//
// Wire shape of one trajectory:
//   {"steps": [{"step_id": int, "edge": str,
//               "direct_dependent_steps": [int] | null, "node": str}, ...]}

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dagmath/answer.hpp"

namespace dagmath {

using StepId = std::int64_t;

struct Step {
  StepId step_id = 0;
  std::string edge;
  // nullopt marks a source step (fact restated from the problem).
  std::optional<std::vector<StepId>> direct_dependent_steps;
  std::string node;

  bool is_source() const { return !direct_dependent_steps.has_value(); }
  bool operator==(const Step&) const = default;
};

struct TrajectoryMeta {
  std::string problem_id;
  std::string model_id;
  std::int64_t sample_index = 0;
};

struct Trajectory {
  std::string problem_id;
  std::string model_id;
  std::int64_t sample_index = 0;
  std::vector<Step> steps;
  std::optional<std::string> raw_text;

  TrajectoryMeta meta() const { return {problem_id, model_id, sample_index}; }
  bool operator==(const Trajectory&) const = default;
};

// Closed rule catalog. The numeric order is the diagnostic sort order.
enum class RuleCode {
  kDuplicateId = 1,            // F01
  kNonIncreasingId = 2,        // F02
  kFutureDependency = 3,       // F03
  kDanglingParent = 4,         // F04
  kUnsortedParents = 5,        // F05
  kMissingBoxedFinal = 6,      // F06
  kUnclosedNonfinalStep = 7,   // F07
  // Only emitted with ValidationOptions::strict_citations.
  kEdgeCitationMismatch = 101,  // S01
};

enum class Severity { kError, kWarning };

struct FormatDiagnostic {
  RuleCode rule_code{};
  std::optional<StepId> step_id;
  Severity severity = Severity::kError;
  std::string message;

  bool operator==(const FormatDiagnostic&) const = default;
};

std::string_view rule_code_id(RuleCode code);    // "F03"
std::string_view rule_code_name(RuleCode code);  // "future-dependency"
std::optional<RuleCode> rule_code_from_id(std::string_view id);
std::string_view severity_name(Severity s);

struct ValidationOptions {
  // Cross-check "Step k" citations in edge text against the parent list.
  bool strict_citations = false;
};

// Parses one trajectory object. Absent, null and empty dependency lists all
// mean "source step". Throws Error{kMalformedStructure, kMissingField,
// kTypeError}. Rule violations are NOT errors here; see validate_format.
Trajectory parse_trajectory(std::string_view text, const TrajectoryMeta& meta = {});

// Same as parse_trajectory for an object that is already parsed (corpus lines).
Trajectory parse_trajectory_json(const nlohmann::json& object, const TrajectoryMeta& meta = {});
nlohmann::json trajectory_to_json(const Trajectory& t);

// Every rule violation, sorted by (step_id, rule_code). Empty means valid.
std::vector<FormatDiagnostic> validate_format(const Trajectory& t,
                                              const ValidationOptions& options = {});

bool has_errors(const std::vector<FormatDiagnostic>& diagnostics);
// Any of F01..F05: the dependency graph itself is undefined.
bool has_structural_errors(const std::vector<FormatDiagnostic>& diagnostics);

// Canonical text: compact, keys sorted. Throws kInvalidTrajectory when the
// trajectory has error-severity diagnostics.
std::string serialize_trajectory(const Trajectory& t);

// Last \boxed{...} of the final step's node, normalized. When several boxes
// are present a warning is appended to `warnings` (if given).
// Throws kNoBoxedAnswer.
Answer extract_boxed_answer(const Trajectory& t,
                            std::vector<FormatDiagnostic>* warnings = nullptr);

}  // namespace dagmath
