#pragma once

// Prompt assembly, chat-completion sampling with resume, corpus ingestion and
// the three-stage gold DAG construction pipeline.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dagmath/corpus.hpp"
#include "dagmath/error.hpp"
#include "dagmath/format.hpp"
#include "dagmath/metrics.hpp"

namespace dagmath {

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds backoff_cap{16000};

  // Delay before attempt `attempt` (1-based; attempt 1 has no delay).
  std::chrono::milliseconds delay_before(int attempt) const;
};

struct EndpointConfig {
  std::string base_url;  // e.g. https://host/v1; "/chat/completions" is appended
  std::string model_name;
  std::string api_key_env = "DAGMATH_API_KEY";
  std::size_t max_concurrency = 4;
  std::chrono::milliseconds timeout{120000};
  std::optional<double> temperature;
  std::optional<double> top_p;
  std::optional<int> max_tokens;
  RetryPolicy retry;

  // Throws kConfigError.
  void validate() const;
};

// Never contains the key itself, only the variable name.
nlohmann::json endpoint_to_json(const EndpointConfig& e);
EndpointConfig endpoint_from_json(const nlohmann::json& j);  // throws kConfigError

struct Problem {
  std::string problem_id;
  std::string statement;
  std::string ground_truth;
  double difficulty = 0.0;
  std::optional<std::string> reference_solution;
};

// JSON array, or JSONL, of {problem_id, statement, ground_truth[, difficulty,
// solution]}. Throws kIoError / kConfigError.
std::vector<Problem> load_problems(const std::filesystem::path& path);

struct Demonstration {
  std::string problem_text;
  Trajectory trajectory;
};

// JSON array of {problem_text, steps}. Throws kIoError / kInsufficientDemos.
std::vector<Demonstration> load_demonstrations(const std::filesystem::path& path);

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct PromptBundle {
  std::string system_text;
  std::vector<std::string> demonstration_blocks;
  std::string problem_text;
  std::string expected_output_contract;

  // instructions, demonstrations, bad examples, problem; in that order.
  std::string render() const;
  std::vector<ChatMessage> messages() const;

  bool operator==(const PromptBundle&) const = default;
};

// Uses the first `shots` demonstrations. Throws kInsufficientDemos.
PromptBundle assemble_fewshot_prompt(const Problem& problem, std::span<const Demonstration> demos,
                                     std::size_t shots);

// Gold-DAG construction runs backwards through the step: conclusions first
// (stage 1), then parents (stage 2), then justifications (stage 3).
struct StagePrompts {
  std::string stage1;
  std::string stage2_instructions;
  std::string stage3_instructions;
};

// Throws kInsufficientInput when the reference solution is blank.
StagePrompts assemble_stage_prompts(const Problem& problem, const std::string& reference_solution);

struct DraftStep {
  StepId step_id = 0;
  std::string text;
  std::optional<std::vector<StepId>> direct_dependent_steps;
};

std::string stage2_prompt(const StagePrompts& p, const Problem& problem, std::span<const DraftStep> nodes);
std::string stage3_prompt(const StagePrompts& p, const Problem& problem, std::span<const DraftStep> annotated);

// ---- transport ------------------------------------------------------------

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  std::optional<double> temperature;
  std::optional<double> top_p;
  std::optional<int> max_tokens;
  int n = 1;

  nlohmann::json to_json() const;
};

// Endpoint failure. Codes: kAuthFailure, kRateLimited, kTransportError.
class EndpointError : public Error {
 public:
  EndpointError(ErrorCode code, bool transient, const std::string& message)
      : Error(code, message), transient_(transient) {}
  bool transient() const noexcept { return transient_; }

 private:
  bool transient_;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Returns the assistant message text. Throws EndpointError. Must be safe to
  // call from several threads at once.
  virtual std::string complete(const ChatRequest& request) = 0;
};

// POST {base_url}/chat/completions with a bearer key from api_key_env.
// 401/403 -> auth failure, 429 -> rate limited, 408/5xx and socket errors ->
// transient transport error, other statuses -> permanent transport error.
std::unique_ptr<ChatClient> make_http_client(const EndpointConfig& config);

// Pulls choices[0].message.content out of a completion response body.
std::string completion_text(std::string_view response_body);

// ---- sampling -------------------------------------------------------------

struct SamplingJob {
  std::vector<Problem> problems;
  std::size_t samples_per_problem = 1;
  EndpointConfig endpoint;
  std::filesystem::path corpus_path;
  std::vector<Demonstration> demonstrations;
  std::size_t shots = 4;
};

struct SamplingHooks {
  // Replaces std::this_thread::sleep_for; tests pass a no-op.
  std::function<void(std::chrono::milliseconds)> sleep;
  // Wall clock for record timestamps.
  std::function<std::string()> now;
};

struct SamplingSummary {
  std::size_t requested = 0;  // N * M
  std::size_t skipped = 0;    // already in the corpus
  std::size_t ok = 0;
  std::size_t failed = 0;
  std::size_t retries = 0;
};

// Issues every (problem, sample) pair missing from the corpus, appending one
// record per pair. Endpoint errors become failed records; anything else the
// client throws aborts the job after in-flight records are flushed.
SamplingSummary sample_trajectories(const SamplingJob& job, ChatClient& client,
                                    const SamplingHooks& hooks = {});

// Outermost JSON object in `text` containing `key`, tolerating prose and
// code fences around it. Returns nullopt if none parses.
std::optional<nlohmann::json> extract_json_object(std::string_view text, std::string_view key = "steps");

// ---- ingestion ------------------------------------------------------------

struct RejectEntry {
  std::string problem_id;
  std::string model_id;
  std::int64_t sample_index = 0;
  // Every rule code seen on the record, errors and warnings, ascending.
  std::vector<RuleCode> rules;
  std::vector<FormatDiagnostic> diagnostics;
  // Parse or request failure when no diagnostics could be produced.
  std::string error;
};

struct ModelRejectStats {
  std::size_t total = 0;
  std::size_t rejected = 0;
  std::map<std::string, std::size_t> by_reason;  // "F03", "request-failed", ...

  double reject_rate() const { return total ? static_cast<double>(rejected) / static_cast<double>(total) : 0.0; }
};

struct IngestResult {
  std::vector<Trajectory> valid;
  std::vector<RejectEntry> rejects;    // error diagnostics, unparseable, failed requests
  std::vector<RejectEntry> warnings;   // valid records that still carry warnings
  std::map<std::string, ModelRejectStats> per_model;
};

IngestResult ingest_completions(std::span<const CorpusRecord> corpus);
// Throws kUnreadableCorpus.
IngestResult ingest_completions(const std::filesystem::path& corpus_path);

nlohmann::json reject_report_json(const IngestResult& r);

// ---- gold verification and benchmark construction -------------------------

struct VerificationHooks {
  AnswerJudge judge;
  // Optional per-step check (symbolic engine, judge model). Returns a reason
  // when the step fails. Defaults to accepting every step.
  std::function<std::optional<std::string>(const Trajectory&, const Step&)> step_check;
};

struct GoldVerdict {
  bool gold = false;
  std::vector<std::string> reasons;  // empty iff gold
};

GoldVerdict verify_gold(const Trajectory& t, const Answer& truth, const VerificationHooks& hooks = {});

struct BenchBuildOptions {
  std::size_t stage2_attempts = 3;
  VerificationHooks hooks;
};

struct BenchOutcome {
  std::string problem_id;
  double difficulty = 0.0;
  std::optional<Trajectory> gold;
  std::size_t stage2_attempts = 0;
  std::string failure;  // empty iff gold
};

// Stage 1 (nodes), stage 2 resampled until the annotated graph is closed or
// attempts run out, stage 3 (edges), then verify_gold. Any failure,
// endpoint errors included, is reported in `failure` rather than thrown.
BenchOutcome build_gold_dag(const Problem& problem, ChatClient& client, const EndpointConfig& endpoint,
                            const BenchBuildOptions& options = {});

std::string iso8601_now();

}  // namespace dagmath
