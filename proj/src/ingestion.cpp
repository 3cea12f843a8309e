#include "dagmath/ingestion.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <ctime>
#include <deque>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "dagmath/dag.hpp"
#include "dagmath/error.hpp"

namespace dagmath {
namespace {

using nlohmann::json;

std::vector<json> json_documents(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  try {
    if (text[first] == '[') {
      json all = json::parse(text);
      return std::vector<json>(all.begin(), all.end());
    }
    std::vector<json> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      out.push_back(json::parse(line));
    }
    return out;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfigError, path.string() + ": " + e.what());
  }
}

std::string text_field(const json& j, std::initializer_list<const char*> names, bool required) {
  for (const char* n : names) {
    if (!j.contains(n) || j[n].is_null()) continue;
    const auto& v = j[n];
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    return v.dump();
  }
  if (required) throw Error(ErrorCode::kConfigError, std::string("missing field \"") + *names.begin() + "\"");
  return {};
}

// Retries transient endpoint failures. Returns the completion text and the
// number of attempts used.
std::pair<std::string, int> complete_with_retry(ChatClient& client, const ChatRequest& request,
                                                const RetryPolicy& retry,
                                                const std::function<void(std::chrono::milliseconds)>& sleep) {
  for (int attempt = 1;; ++attempt) {
    if (attempt > 1) {
      const auto d = retry.delay_before(attempt);
      if (sleep) {
        sleep(d);
      } else {
        std::this_thread::sleep_for(d);
      }
    }
    try {
      return {client.complete(request), attempt};
    } catch (const EndpointError& e) {
      if (!e.transient() || attempt >= retry.max_attempts) throw;
    }
  }
}

ChatRequest make_request(const EndpointConfig& e, std::string prompt) {
  ChatRequest r;
  r.model = e.model_name;
  r.messages.push_back({"user", std::move(prompt)});
  r.temperature = e.temperature;
  r.top_p = e.top_p;
  r.max_tokens = e.max_tokens;
  return r;
}

std::size_t matching_brace(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false, escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}' && --depth == 0) {
      return i;
    }
  }
  return std::string_view::npos;
}

std::vector<DraftStep> draft_steps(const json& obj, bool with_parents) {
  std::vector<DraftStep> out;
  for (const auto& s : obj.at("steps")) {
    DraftStep d;
    d.step_id = s.at("step_id").get<StepId>();
    d.text = s.contains("text") ? s["text"].get<std::string>() : s.at("node").get<std::string>();
    if (with_parents) {
      const auto& deps = s.contains("direct_dependent_steps") ? s["direct_dependent_steps"] : json(nullptr);
      if (!deps.is_null() && !deps.empty()) d.direct_dependent_steps = deps.get<std::vector<StepId>>();
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

}  // namespace

std::chrono::milliseconds RetryPolicy::delay_before(int attempt) const {
  if (attempt <= 1) return std::chrono::milliseconds{0};
  auto d = backoff_base;
  for (int i = 2; i < attempt && d < backoff_cap; ++i) d *= 2;
  return std::min(d, backoff_cap);
}

void EndpointConfig::validate() const {
  if (base_url.empty()) throw Error(ErrorCode::kConfigError, "endpoint base_url is empty");
  if (model_name.empty()) throw Error(ErrorCode::kConfigError, "endpoint model_name is empty");
  if (api_key_env.empty()) throw Error(ErrorCode::kConfigError, "endpoint api_key_env is empty");
  if (max_concurrency < 1) throw Error(ErrorCode::kConfigError, "max_concurrency must be >= 1");
  if (retry.max_attempts < 1) throw Error(ErrorCode::kConfigError, "retry max_attempts must be >= 1");
  if (timeout.count() <= 0) throw Error(ErrorCode::kConfigError, "timeout must be positive");
}

json endpoint_to_json(const EndpointConfig& e) {
  json j{{"base_url", e.base_url},
         {"model_name", e.model_name},
         {"api_key_env", e.api_key_env},
         {"max_concurrency", e.max_concurrency},
         {"timeout_ms", e.timeout.count()},
         {"retry", {{"max_attempts", e.retry.max_attempts},
                    {"backoff_base_ms", e.retry.backoff_base.count()},
                    {"backoff_cap_ms", e.retry.backoff_cap.count()}}}};
  if (e.temperature) j["temperature"] = *e.temperature;
  if (e.top_p) j["top_p"] = *e.top_p;
  if (e.max_tokens) j["max_tokens"] = *e.max_tokens;
  return j;
}

EndpointConfig endpoint_from_json(const json& j) {
  EndpointConfig e;
  try {
    e.base_url = j.at("base_url").get<std::string>();
    e.model_name = j.at("model_name").get<std::string>();
    e.api_key_env = j.value("api_key_env", e.api_key_env);
    e.max_concurrency = j.value("max_concurrency", e.max_concurrency);
    e.timeout = std::chrono::milliseconds(j.value("timeout_ms", e.timeout.count()));
    if (j.contains("temperature")) e.temperature = j["temperature"].get<double>();
    if (j.contains("top_p")) e.top_p = j["top_p"].get<double>();
    if (j.contains("max_tokens")) e.max_tokens = j["max_tokens"].get<int>();
    if (j.contains("retry")) {
      const auto& r = j["retry"];
      e.retry.max_attempts = r.value("max_attempts", e.retry.max_attempts);
      e.retry.backoff_base = std::chrono::milliseconds(r.value("backoff_base_ms", e.retry.backoff_base.count()));
      e.retry.backoff_cap = std::chrono::milliseconds(r.value("backoff_cap_ms", e.retry.backoff_cap.count()));
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kConfigError, std::string("endpoint config: ") + ex.what());
  }
  e.validate();
  return e;
}

std::vector<Problem> load_problems(const std::filesystem::path& path) {
  std::vector<Problem> out;
  for (const auto& j : json_documents(path)) {
    Problem p;
    p.problem_id = text_field(j, {"problem_id", "id"}, true);
    p.statement = text_field(j, {"statement", "problem", "problem_text"}, true);
    p.ground_truth = text_field(j, {"ground_truth", "answer"}, true);
    if (j.contains("difficulty") && j["difficulty"].is_number()) p.difficulty = j["difficulty"].get<double>();
    const auto sol = text_field(j, {"solution", "reference_solution"}, false);
    if (!sol.empty()) p.reference_solution = sol;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Demonstration> load_demonstrations(const std::filesystem::path& path) {
  std::vector<Demonstration> out;
  for (const auto& j : json_documents(path)) {
    try {
      out.push_back({text_field(j, {"problem_text", "statement", "problem"}, true), parse_trajectory_json(j)});
    } catch (const Error& e) {
      throw Error(ErrorCode::kInsufficientDemos, path.string() + ": " + e.what());
    }
  }
  return out;
}

std::optional<json> extract_json_object(std::string_view text, std::string_view key) {
  for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
    const std::size_t end = matching_brace(text, start);
    if (end == std::string_view::npos) continue;
    const auto candidate = text.substr(start, end - start + 1);
    if (!json::accept(candidate)) continue;
    json j = json::parse(candidate);
    if (j.is_object() && j.contains(std::string(key))) return j;
  }
  return std::nullopt;
}

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

SamplingSummary sample_trajectories(const SamplingJob& job, ChatClient& client, const SamplingHooks& hooks) {
  if (job.samples_per_problem < 1) throw Error(ErrorCode::kConfigError, "samples_per_problem must be >= 1");
  job.endpoint.validate();
  const auto now = hooks.now ? hooks.now : std::function<std::string()>(iso8601_now);

  SamplingSummary summary;
  summary.requested = job.problems.size() * job.samples_per_problem;

  std::set<std::tuple<std::string, std::string, std::int64_t>> done;
  if (std::filesystem::exists(job.corpus_path)) {
    for (const auto& r : read_corpus(job.corpus_path)) done.emplace(r.model_id, r.problem_id, r.sample_index);
  }

  struct Task {
    std::size_t problem;
    std::int64_t index;
  };
  std::vector<ChatRequest> requests;
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < job.problems.size(); ++p) {
    const auto bundle = assemble_fewshot_prompt(job.problems[p], job.demonstrations, job.shots);
    requests.push_back(make_request(job.endpoint, bundle.render()));
    for (std::size_t i = 0; i < job.samples_per_problem; ++i) {
      const auto index = static_cast<std::int64_t>(i);
      if (done.count({job.endpoint.model_name, job.problems[p].problem_id, index})) {
        ++summary.skipped;
      } else {
        tasks.push_back({p, index});
      }
    }
  }
  if (tasks.empty()) return summary;

  CorpusWriter writer(job.corpus_path);
  std::mutex mu;
  std::condition_variable cv;
  std::deque<CorpusRecord> finished;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr fatal;
  std::size_t running = std::min(job.endpoint.max_concurrency, tasks.size());

  auto worker = [&] {
    for (;;) {
      if (abort.load()) break;
      const std::size_t k = next.fetch_add(1);
      if (k >= tasks.size()) break;
      const Problem& problem = job.problems[tasks[k].problem];
      const ChatRequest& request = requests[tasks[k].problem];

      CorpusRecord rec;
      rec.problem_id = problem.problem_id;
      rec.model_id = job.endpoint.model_name;
      rec.sample_index = tasks[k].index;
      rec.ground_truth = problem.ground_truth;
      rec.difficulty = problem.difficulty;
      rec.fingerprint = sha256_hex(request.to_json().dump() + "\n" + problem.problem_id + "\n" +
                                   std::to_string(rec.sample_index));
      rec.requested_at = now();
      try {
        auto [text, attempts] = complete_with_retry(client, request, job.endpoint.retry, hooks.sleep);
        rec.attempts = attempts;
        rec.payload = std::move(text);
        rec.completed_at = now();
        CorpusRecord parsed = record_from_json(record_to_json(rec));
        rec.diagnostics = std::move(parsed.diagnostics);
      } catch (const EndpointError& e) {
        rec.status = RecordStatus::kFailed;
        rec.error = e.what();
        rec.attempts = e.transient() ? job.endpoint.retry.max_attempts : 1;
        rec.completed_at = now();
      } catch (...) {
        std::lock_guard lock(mu);
        if (!fatal) fatal = std::current_exception();
        abort = true;
        break;
      }
      std::lock_guard lock(mu);
      finished.push_back(std::move(rec));
      cv.notify_one();
    }
    std::lock_guard lock(mu);
    --running;
    cv.notify_one();
  };

  std::vector<std::thread> pool;
  const std::size_t n_threads = running;
  for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);

  // Single writer: drain the queue on this thread until every worker exits.
  std::exception_ptr write_error;
  for (;;) {
    std::unique_lock lock(mu);
    cv.wait(lock, [&] { return !finished.empty() || running == 0; });
    if (finished.empty() && running == 0) break;
    CorpusRecord rec = std::move(finished.front());
    finished.pop_front();
    lock.unlock();
    if (write_error) continue;
    try {
      writer.append(rec);
    } catch (...) {
      write_error = std::current_exception();
      abort = true;
      continue;
    }
    if (rec.status == RecordStatus::kOk) {
      ++summary.ok;
    } else {
      ++summary.failed;
    }
    summary.retries += static_cast<std::size_t>(std::max(0, rec.attempts - 1));
  }
  for (auto& t : pool) t.join();
  if (write_error) std::rethrow_exception(write_error);
  if (fatal) std::rethrow_exception(fatal);
  return summary;
}

IngestResult ingest_completions(std::span<const CorpusRecord> corpus) {
  IngestResult out;
  for (const auto& r : corpus) {
    auto& stats = out.per_model[r.model_id];
    ++stats.total;
    RejectEntry entry{r.problem_id, r.model_id, r.sample_index, {}, r.diagnostics, {}};
    std::set<RuleCode> rules;
    for (const auto& d : r.diagnostics) rules.insert(d.rule_code);
    entry.rules.assign(rules.begin(), rules.end());

    if (r.status == RecordStatus::kFailed) {
      entry.error = r.error.empty() ? "request failed" : r.error;
      ++stats.rejected;
      ++stats.by_reason["request-failed"];
      out.rejects.push_back(std::move(entry));
    } else if (!r.parsed) {
      entry.error = r.parse_error;
      ++stats.rejected;
      ++stats.by_reason["unparseable"];
      out.rejects.push_back(std::move(entry));
    } else if (has_errors(r.diagnostics)) {
      ++stats.rejected;
      std::set<RuleCode> error_rules;
      for (const auto& d : r.diagnostics) {
        if (d.severity == Severity::kError) error_rules.insert(d.rule_code);
      }
      for (RuleCode c : error_rules) ++stats.by_reason[std::string(rule_code_id(c))];
      out.rejects.push_back(std::move(entry));
    } else {
      if (!r.diagnostics.empty()) out.warnings.push_back(std::move(entry));
      out.valid.push_back(*r.parsed);
    }
  }
  return out;
}

IngestResult ingest_completions(const std::filesystem::path& corpus_path) {
  const auto records = read_corpus(corpus_path);
  return ingest_completions(records);
}

json reject_report_json(const IngestResult& r) {
  auto entry_json = [](const RejectEntry& e) {
    json rules = json::array();
    for (RuleCode c : e.rules) rules.push_back(std::string(rule_code_id(c)));
    json diags = json::array();
    for (const auto& d : e.diagnostics) diags.push_back(diagnostic_to_json(d));
    json j{{"problem_id", e.problem_id}, {"model_id", e.model_id}, {"sample_index", e.sample_index},
           {"rules", rules}, {"diagnostics", diags}};
    if (!e.error.empty()) j["error"] = e.error;
    return j;
  };
  json rejects = json::array(), warnings = json::array();
  for (const auto& e : r.rejects) rejects.push_back(entry_json(e));
  for (const auto& e : r.warnings) warnings.push_back(entry_json(e));
  json models = json::object();
  for (const auto& [model, s] : r.per_model) {
    models[model] = {{"total", s.total}, {"rejected", s.rejected}, {"reject_rate", s.reject_rate()},
                     {"by_reason", s.by_reason}};
  }
  return json{{"n_valid", r.valid.size()}, {"n_rejected", r.rejects.size()},
              {"per_model", models}, {"rejects", rejects}, {"warnings", warnings}};
}

GoldVerdict verify_gold(const Trajectory& t, const Answer& truth, const VerificationHooks& hooks) {
  GoldVerdict v;
  const auto diagnostics = validate_format(t);
  for (const auto& d : diagnostics) {
    if (d.severity == Severity::kError) {
      v.reasons.push_back("format: " + std::string(rule_code_id(d.rule_code)) + " " + d.message);
    }
  }
  if (!t.steps.empty() && !has_structural_errors(diagnostics)) {
    const auto open = unclosed_nodes(build_dag(t));
    if (!open.empty()) {
      std::string ids;
      for (StepId id : open) ids += (ids.empty() ? "" : ",") + std::to_string(id);
      v.reasons.push_back("closure: " + std::to_string(open.size()) + " unclosed (" + ids + ")");
    }
  }
  try {
    const Answer got = extract_boxed_answer(t);
    if (!judge_final(got, truth, hooks.judge)) {
      v.reasons.push_back("final-answer: got " + got.canonical + ", expected " + truth.canonical);
    }
  } catch (const Error& e) {
    v.reasons.push_back(std::string("final-answer: ") + e.what());
  }
  if (hooks.step_check) {
    for (const auto& s : t.steps) {
      if (auto why = hooks.step_check(t, s)) {
        v.reasons.push_back("step " + std::to_string(s.step_id) + ": " + *why);
      }
    }
  }
  v.gold = v.reasons.empty();
  return v;
}

BenchOutcome build_gold_dag(const Problem& problem, ChatClient& client, const EndpointConfig& endpoint,
                            const BenchBuildOptions& options) {
  BenchOutcome out;
  out.problem_id = problem.problem_id;
  out.difficulty = problem.difficulty;
  const auto sleep = std::function<void(std::chrono::milliseconds)>{};
  const char* stage = "stage 1";
  try {
    const auto prompts = assemble_stage_prompts(problem, problem.reference_solution.value_or(""));

    auto obj = extract_json_object(complete_with_retry(client, make_request(endpoint, prompts.stage1),
                                                       endpoint.retry, sleep).first);
    if (!obj) {
      out.failure = "stage 1: no step list in the response";
      return out;
    }
    const auto nodes = draft_steps(*obj, false);
    if (nodes.empty()) {
      out.failure = "stage 1: empty step list";
      return out;
    }

    stage = "stage 2";
    std::vector<DraftStep> annotated;
    std::string last_problem;
    for (std::size_t attempt = 1; attempt <= std::max<std::size_t>(1, options.stage2_attempts); ++attempt) {
      out.stage2_attempts = attempt;
      auto reply = extract_json_object(
          complete_with_retry(client, make_request(endpoint, stage2_prompt(prompts, problem, nodes)),
                              endpoint.retry, sleep).first);
      if (!reply) {
        last_problem = "no step list in the response";
        continue;
      }
      auto candidate = draft_steps(*reply, true);
      if (candidate.size() != nodes.size()) {
        last_problem = "step count changed from " + std::to_string(nodes.size()) + " to " +
                       std::to_string(candidate.size());
        continue;
      }
      Trajectory probe;
      for (std::size_t i = 0; i < candidate.size(); ++i) {
        probe.steps.push_back({nodes[i].step_id, "-", candidate[i].direct_dependent_steps, nodes[i].text});
      }
      const auto diags = validate_format(probe);
      auto bad = std::find_if(diags.begin(), diags.end(), [](const FormatDiagnostic& d) {
        return d.severity == Severity::kError || d.rule_code == RuleCode::kUnclosedNonfinalStep;
      });
      if (bad != diags.end()) {
        last_problem = std::string(rule_code_id(bad->rule_code)) + " " + bad->message;
        continue;
      }
      annotated = std::move(candidate);
      break;
    }
    if (annotated.empty()) {
      out.failure = "stage 2: gave up after " + std::to_string(out.stage2_attempts) + " attempt(s): " + last_problem;
      return out;
    }
    for (std::size_t i = 0; i < annotated.size(); ++i) annotated[i].text = nodes[i].text;

    stage = "stage 3";
    auto edges = extract_json_object(
        complete_with_retry(client, make_request(endpoint, stage3_prompt(prompts, problem, annotated)),
                            endpoint.retry, sleep).first,
        "edges");
    if (!edges) {
      out.failure = "stage 3: no edge list in the response";
      return out;
    }
    std::map<StepId, std::string> edge_of;
    for (const auto& e : (*edges)["edges"]) edge_of[e.at("step_id").get<StepId>()] = e.at("edge").get<std::string>();

    Trajectory t;
    t.problem_id = problem.problem_id;
    t.model_id = endpoint.model_name;
    for (const auto& d : annotated) {
      auto it = edge_of.find(d.step_id);
      if (it == edge_of.end() || it->second.find_first_not_of(" \t\r\n") == std::string::npos) {
        out.failure = "stage 3: no edge for step " + std::to_string(d.step_id);
        return out;
      }
      t.steps.push_back({d.step_id, it->second, d.direct_dependent_steps, d.text});
    }
    const auto verdict = verify_gold(t, normalize_answer(problem.ground_truth), options.hooks);
    if (!verdict.gold) {
      out.failure = "verification: " + join(verdict.reasons, "; ");
      return out;
    }
    out.gold = std::move(t);
  } catch (const Error& e) {
    out.failure = std::string(stage) + ": " + e.what();
  } catch (const json::exception& e) {
    out.failure = std::string(stage) + ": malformed response: " + e.what();
  }
  return out;
}

}  // namespace dagmath
