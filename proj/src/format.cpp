#include "dagmath/format.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_set>

#include "dagmath/error.hpp"

namespace dagmath {
namespace {

using nlohmann::json;

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string join_ids(const std::vector<StepId>& ids) {
  std::ostringstream os;
  for (size_t i = 0; i < ids.size(); ++i) os << (i ? ", " : "") << ids[i];
  return os.str();
}

std::string step_label(size_t index, const json& step) {
  if (step.is_object() && step.contains("step_id") && step["step_id"].is_number_integer()) {
    return "step " + std::to_string(step["step_id"].get<StepId>());
  }
  return "steps[" + std::to_string(index) + "]";
}

std::string required_text(const json& step, const char* field, size_t index) {
  auto it = step.find(field);
  if (it == step.end() || it->is_null()) {
    throw Error(ErrorCode::kMissingField, step_label(index, step) + " lacks \"" + field + "\"");
  }
  if (!it->is_string()) {
    throw Error(ErrorCode::kTypeError, step_label(index, step) + ": \"" + field + "\" must be a string");
  }
  std::string text = it->get<std::string>();
  if (is_blank(text)) {
    throw Error(ErrorCode::kMissingField, step_label(index, step) + ": \"" + field + "\" is empty");
  }
  return text;
}

Step parse_step(const json& item, size_t index) {
  if (!item.is_object()) {
    throw Error(ErrorCode::kMalformedStructure, "steps[" + std::to_string(index) + "] is not an object");
  }
  Step step;
  auto id = item.find("step_id");
  if (id == item.end() || id->is_null()) {
    throw Error(ErrorCode::kMissingField, "steps[" + std::to_string(index) + "] lacks \"step_id\"");
  }
  if (!id->is_number_integer()) {
    throw Error(ErrorCode::kTypeError, "steps[" + std::to_string(index) + "]: step_id must be an integer");
  }
  step.step_id = id->get<StepId>();
  step.edge = required_text(item, "edge", index);
  step.node = required_text(item, "node", index);

  auto deps = item.find("direct_dependent_steps");
  if (deps != item.end() && !deps->is_null()) {
    if (!deps->is_array()) {
      throw Error(ErrorCode::kTypeError,
                  step_label(index, item) + ": direct_dependent_steps must be an array or null");
    }
    std::vector<StepId> parents;
    parents.reserve(deps->size());
    for (const auto& p : *deps) {
      if (!p.is_number_integer()) {
        throw Error(ErrorCode::kTypeError,
                    step_label(index, item) + ": dependency ids must be integers");
      }
      parents.push_back(p.get<StepId>());
    }
    if (!parents.empty()) step.direct_dependent_steps = std::move(parents);
  }
  return step;
}

FormatDiagnostic diag(RuleCode code, std::optional<StepId> id, Severity severity, std::string message) {
  return FormatDiagnostic{code, id, severity, std::move(message)};
}

}  // namespace

std::string_view rule_code_id(RuleCode code) {
  switch (code) {
    case RuleCode::kDuplicateId: return "F01";
    case RuleCode::kNonIncreasingId: return "F02";
    case RuleCode::kFutureDependency: return "F03";
    case RuleCode::kDanglingParent: return "F04";
    case RuleCode::kUnsortedParents: return "F05";
    case RuleCode::kMissingBoxedFinal: return "F06";
    case RuleCode::kUnclosedNonfinalStep: return "F07";
    case RuleCode::kEdgeCitationMismatch: return "S01";
  }
  return "F??";
}

std::string_view rule_code_name(RuleCode code) {
  switch (code) {
    case RuleCode::kDuplicateId: return "duplicate-id";
    case RuleCode::kNonIncreasingId: return "non-increasing-id";
    case RuleCode::kFutureDependency: return "future-dependency";
    case RuleCode::kDanglingParent: return "dangling-parent";
    case RuleCode::kUnsortedParents: return "unsorted-or-duplicate-parents";
    case RuleCode::kMissingBoxedFinal: return "missing-boxed-final";
    case RuleCode::kUnclosedNonfinalStep: return "unclosed-nonfinal-step";
    case RuleCode::kEdgeCitationMismatch: return "edge-citation-mismatch";
  }
  return "unknown";
}

std::optional<RuleCode> rule_code_from_id(std::string_view id) {
  for (RuleCode c : {RuleCode::kDuplicateId, RuleCode::kNonIncreasingId, RuleCode::kFutureDependency,
                     RuleCode::kDanglingParent, RuleCode::kUnsortedParents,
                     RuleCode::kMissingBoxedFinal, RuleCode::kUnclosedNonfinalStep,
                     RuleCode::kEdgeCitationMismatch}) {
    if (rule_code_id(c) == id) return c;
  }
  return std::nullopt;
}

std::string_view severity_name(Severity s) { return s == Severity::kError ? "error" : "warning"; }

Trajectory parse_trajectory_json(const json& object, const TrajectoryMeta& meta) {
  if (!object.is_object()) {
    throw Error(ErrorCode::kMalformedStructure, "trajectory must be an object");
  }
  auto steps = object.find("steps");
  if (steps == object.end() || steps->is_null()) {
    throw Error(ErrorCode::kMissingField, "no \"steps\" array");
  }
  if (!steps->is_array()) {
    throw Error(ErrorCode::kMalformedStructure, "\"steps\" is not an array");
  }
  if (steps->empty()) {
    throw Error(ErrorCode::kMissingField, "empty trajectory: \"steps\" has no elements");
  }
  Trajectory t;
  t.problem_id = meta.problem_id;
  t.model_id = meta.model_id;
  t.sample_index = meta.sample_index;
  t.steps.reserve(steps->size());
  for (size_t i = 0; i < steps->size(); ++i) t.steps.push_back(parse_step((*steps)[i], i));
  return t;
}

Trajectory parse_trajectory(std::string_view text, const TrajectoryMeta& meta) {
  json object;
  try {
    object = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedStructure, e.what());
  }
  return parse_trajectory_json(object, meta);
}

std::vector<FormatDiagnostic> validate_format(const Trajectory& t, const ValidationOptions& options) {
  std::vector<FormatDiagnostic> out;
  if (t.steps.empty()) {
    out.push_back(diag(RuleCode::kMissingBoxedFinal, std::nullopt, Severity::kError,
                       "trajectory has no steps"));
    return out;
  }

  std::unordered_set<StepId> all_ids;
  std::unordered_set<StepId> cited;
  for (const Step& s : t.steps) {
    all_ids.insert(s.step_id);
    if (s.direct_dependent_steps) cited.insert(s.direct_dependent_steps->begin(), s.direct_dependent_steps->end());
  }

  std::unordered_set<StepId> seen;
  std::optional<StepId> max_id;
  for (const Step& s : t.steps) {
    const StepId id = s.step_id;
    if (seen.count(id)) {
      out.push_back(diag(RuleCode::kDuplicateId, id, Severity::kError,
                         "step_id " + std::to_string(id) + " already used by an earlier step"));
    } else if (max_id && id <= *max_id) {
      out.push_back(diag(RuleCode::kNonIncreasingId, id, Severity::kError,
                         "step_id " + std::to_string(id) + " follows step_id " + std::to_string(*max_id)));
    }
    seen.insert(id);
    max_id = max_id ? std::max(*max_id, id) : id;

    if (!s.direct_dependent_steps) continue;
    const auto& parents = *s.direct_dependent_steps;
    if (!std::is_sorted(parents.begin(), parents.end()) ||
        std::adjacent_find(parents.begin(), parents.end()) != parents.end()) {
      out.push_back(diag(RuleCode::kUnsortedParents, id, Severity::kError,
                         "dependencies [" + join_ids(parents) + "] are not strictly ascending"));
    }
    std::vector<StepId> future;
    std::vector<StepId> dangling;
    for (StepId p : std::set<StepId>(parents.begin(), parents.end())) {
      if (!all_ids.count(p)) {
        dangling.push_back(p);
      } else if (p >= id) {
        future.push_back(p);
      }
    }
    if (!future.empty()) {
      out.push_back(diag(RuleCode::kFutureDependency, id, Severity::kError,
                         "depends on non-prior step(s) " + join_ids(future)));
    }
    if (!dangling.empty()) {
      out.push_back(diag(RuleCode::kDanglingParent, id, Severity::kError,
                         "depends on nonexistent step(s) " + join_ids(dangling)));
    }
  }

  const Step& last = t.steps.back();
  const auto boxes = find_boxed(last.node);
  if (boxes.empty()) {
    out.push_back(diag(RuleCode::kMissingBoxedFinal, last.step_id, Severity::kError,
                       "final step has no \\boxed{} answer"));
  } else if (boxes.size() > 1) {
    out.push_back(diag(RuleCode::kMissingBoxedFinal, last.step_id, Severity::kWarning,
                       std::to_string(boxes.size()) + " boxed answers in final step; the last is used"));
  }

  for (size_t i = 0; i + 1 < t.steps.size(); ++i) {
    const StepId id = t.steps[i].step_id;
    if (!cited.count(id)) {
      out.push_back(diag(RuleCode::kUnclosedNonfinalStep, id, Severity::kWarning,
                         "step " + std::to_string(id) + " is never used by a later step"));
    }
  }

  if (options.strict_citations) {
    static const std::regex kCitation(R"(Step\s+(\d+))");
    for (const Step& s : t.steps) {
      if (!s.direct_dependent_steps) continue;
      std::set<StepId> mentioned;
      for (std::sregex_iterator it(s.edge.begin(), s.edge.end(), kCitation), end; it != end; ++it) {
        mentioned.insert(std::stoll((*it)[1].str()));
      }
      std::vector<StepId> missing;
      for (StepId p : *s.direct_dependent_steps) {
        if (!mentioned.count(p)) missing.push_back(p);
      }
      if (!missing.empty()) {
        out.push_back(diag(RuleCode::kEdgeCitationMismatch, s.step_id, Severity::kWarning,
                           "edge text does not cite Step " + join_ids(missing)));
      }
    }
  }

  std::stable_sort(out.begin(), out.end(), [](const FormatDiagnostic& a, const FormatDiagnostic& b) {
    if (a.step_id != b.step_id) return a.step_id < b.step_id;  // nullopt first
    return static_cast<int>(a.rule_code) < static_cast<int>(b.rule_code);
  });
  return out;
}

bool has_errors(const std::vector<FormatDiagnostic>& diagnostics) {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [](const FormatDiagnostic& d) { return d.severity == Severity::kError; });
}

bool has_structural_errors(const std::vector<FormatDiagnostic>& diagnostics) {
  return std::any_of(diagnostics.begin(), diagnostics.end(), [](const FormatDiagnostic& d) {
    const int code = static_cast<int>(d.rule_code);
    return d.severity == Severity::kError && code >= 1 && code <= 5;
  });
}

json trajectory_to_json(const Trajectory& t) {
  json steps = json::array();
  for (const Step& s : t.steps) {
    json item;
    item["step_id"] = s.step_id;
    item["edge"] = s.edge;
    item["direct_dependent_steps"] = s.direct_dependent_steps ? json(*s.direct_dependent_steps) : json(nullptr);
    item["node"] = s.node;
    steps.push_back(std::move(item));
  }
  return json{{"steps", std::move(steps)}};
}

std::string serialize_trajectory(const Trajectory& t) {
  const auto diagnostics = validate_format(t);
  if (has_errors(diagnostics)) {
    const auto& first = *std::find_if(diagnostics.begin(), diagnostics.end(),
                                      [](const FormatDiagnostic& d) { return d.severity == Severity::kError; });
    throw Error(ErrorCode::kInvalidTrajectory,
                std::string(rule_code_id(first.rule_code)) + " " + first.message);
  }
  return trajectory_to_json(t).dump();
}

Answer extract_boxed_answer(const Trajectory& t, std::vector<FormatDiagnostic>* warnings) {
  if (t.steps.empty()) throw Error(ErrorCode::kInvalidTrajectory, "trajectory has no final step");
  const Step& last = t.steps.back();
  const auto boxes = find_boxed(last.node);
  if (boxes.empty()) {
    throw Error(ErrorCode::kNoBoxedAnswer, "final step " + std::to_string(last.step_id) + " has no \\boxed{}");
  }
  if (boxes.size() > 1 && warnings) {
    warnings->push_back(diag(RuleCode::kMissingBoxedFinal, last.step_id, Severity::kWarning,
                             std::to_string(boxes.size()) + " boxed answers in final step; the last is used"));
  }
  return normalize_answer(boxes.back());
}

}  // namespace dagmath
