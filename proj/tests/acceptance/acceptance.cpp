// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <fcntl.h>
#include <numeric>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "dagmath/dag.hpp"
#include "dagmath/error.hpp"
#include "dagmath/ingestion.hpp"
#include "dagmath/kernels.hpp"
#include "dagmath/metrics.hpp"
#include "dagmath/simulator.hpp"
#include "fixtures.hpp"
#include "generators.hpp"
#include "stub_server.hpp"

extern char** environ;

using namespace dagmath;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int number, double budget_s, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  char timing[64];
  std::snprintf(timing, sizeof timing, " (%.3fs, budget %.0fs)", secs, budget_s);
  o.require(secs < budget_s, "runtime over budget");
  if (!o.pass) ++failures;
  std::cout << "criterion " << number << ": " << (o.pass ? "PASS" : "FAIL") << " " << o.detail.str() << timing
            << std::endl;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

SimTrajectory sim_path(const TaskDag& g, std::vector<NodeId> v) {
  SimTrajectory t;
  t.visited = std::move(v);
  t.terminal = t.visited.back();
  t.classification = classify_sim_trajectory(g, t);
  return t;
}

// ---- 1 ---------------------------------------------------------------------
void heptagon(Outcome& o) {
  const auto t = testgen::heptagon_trajectory();
  const auto g = build_dag(t);
  const auto unclosed = unclosed_nodes(g);
  const auto v = judge_trajectory(t, normalize_answer("588"));
  o.require(g.node_count() == 33, "33 nodes");
  o.require(unclosed == std::set<StepId>{1, 6, 8, 13, 16, 18, 26, 30}, "unclosed set");
  o.require(v.delta_close == 0, "delta_close = 0");
  o.require(v.delta_final == 1, "delta_final = 1");
  o.require(v.closeness.closed * 4 == v.closeness.total * 3 && v.closeness_rate() == 0.75, "closeness 0.75");
  o.require(v.cohort == CohortClass::kCorrect, "class Correct");
  o.detail << "unclosed {";
  for (StepId id : unclosed) o.detail << (id == *unclosed.begin() ? "" : ",") << id;
  o.detail << "}, closeness " << v.closeness.closed << "/" << v.closeness.total << ", class "
           << cohort_class_name(v.cohort);
}

// ---- 2 ---------------------------------------------------------------------
void lcp(Outcome& o) {
  const auto v = judge_trajectory(testgen::lcp_trajectory(), normalize_answer("300"));
  o.require(v.delta_close == 1 && v.delta_final == 1, "deltas = 1");
  o.require(v.cohort == CohortClass::kPerfect, "class Perfect");
  const auto g = testgen::lcp_task_dag();
  const auto a = sim_path(g, {1, 2, 3, 4, 5, 6, 7, 8, 10}).classification;
  const auto b = sim_path(g, {1, 2, 3, 4, 5, 6, 7, 9, 8, 10}).classification;
  const auto c = sim_path(g, {1, 2, 3, 6, 7, 9, 11}).classification;
  o.require(a == TrajectoryClass::kPerfect, "variant 1 perfect");
  o.require(b == TrajectoryClass::kImperfect, "variant 2 imperfect");
  o.require(c == TrajectoryClass::kWrong, "variant 3 wrong");
  o.detail << "trajectory " << cohort_class_name(v.cohort) << "; variants " << trajectory_class_name(a) << "/"
           << trajectory_class_name(b) << "/" << trajectory_class_name(c);
}

// ---- 3 ---------------------------------------------------------------------
void two_chain(Outcome& o) {
  constexpr std::size_t n = 200000;
  std::vector<double> xs, ys;
  double worst_z = 0.0;
  std::ostringstream table;
  for (int L = 1; L <= 8; ++L) {
    const auto g = make_two_chain(L);
    const auto exact = exhaustive_prr(g, TransitionPolicy::uniform());
    const auto mc = monte_carlo_prr(g, TransitionPolicy::uniform(), n, 1000 + static_cast<std::uint64_t>(L));
    const double se = std::sqrt(exact.value * (1 - exact.value) / static_cast<double>(n));
    const double z = std::abs(mc.value - exact.value) / se;
    worst_z = std::max(worst_z, z);
    o.require(z <= 4.0, "L=" + std::to_string(L) + " within 4 SE");
    o.require(exact.value == std::ldexp(1.0, -L), "L=" + std::to_string(L) + " exhaustive = 2^-L");
    xs.push_back(L);
    ys.push_back(std::log(mc.value));
    table << " L" << L << ":mc=" << fmt("%.5f", mc.value) << ",exact=" << fmt("%.5f", exact.value)
          << ",(1/2)^(L-1)=" << fmt("%.5f", std::ldexp(1.0, 1 - L));
  }
  // Least-squares slope of log PRR against L.
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double rate = std::exp(sxy / sxx);
  o.require(std::abs(rate - 0.5) <= 0.02, "decay rate 0.5 +/- 0.02");
  o.detail << "decay rate " << fmt("%.4f", rate) << ", worst |z| " << fmt("%.2f", worst_z)
           << "; enumerator gives (1/2)^L, (1/2)^(L-1) listed for comparison;" << table.str();
}

// ---- 4 ---------------------------------------------------------------------
TrajectoryVerdict synthetic(std::string pid, std::int64_t idx, std::int64_t closed, std::int64_t total, int ok) {
  TrajectoryVerdict v;
  v.problem_id = std::move(pid);
  v.sample_index = idx;
  v.closeness = {closed, total};
  v.delta_close = closed == total;
  v.delta_final = ok;
  return v;
}

bool auc_checks(const std::vector<TrajectoryVerdict>& vs, Outcome& o, const std::string& label) {
  const auto probs = group_by_problem(vs);
  const auto d = dataset_ability(probs);
  const auto& acc = d.auc.accuracy_at;
  bool ok = true;
  for (std::size_t i = 1; i < acc.size(); ++i) ok &= acc[i] <= acc[i - 1];
  o.require(ok, label + ": monotone");
  o.require(acc.front() == d.pass1, label + ": accuracy_at(0) = PASS@1");
  o.require(acc.back() == d.r_hat, label + ": accuracy_at(1) = R-hat");
  bool per = true;
  for (const auto& p : probs) per &= p.prr_hat <= p.pass1;
  o.require(per, label + ": prr <= pass1");
  return ok && per && acc.front() == d.pass1 && acc.back() == d.r_hat;
}

void auc(Outcome& o) {
  const auto records = read_corpus(testgen::fixture_path("corpus.jsonl"));
  std::vector<EvalSample> samples;
  for (const auto& r : records) samples.push_back({r.meta(), r.parsed, normalize_answer(*r.ground_truth)});
  auc_checks(kernels::evaluate_samples_omp(samples), o, "fixtures");

  std::mt19937_64 rng(4242);
  std::vector<TrajectoryVerdict> vs;
  for (int i = 0; i < 1000; ++i) {
    const int total = std::uniform_int_distribution<int>(1, 40)(rng);
    const int closed = std::uniform_int_distribution<int>(0, 3)(rng) == 0 ? total
                                                                          : std::uniform_int_distribution<int>(0, total)(rng);
    vs.push_back(synthetic("p" + std::to_string(rng() % 37), i, closed, total, static_cast<int>(rng() % 3 != 0)));
  }
  auc_checks(vs, o, "synthetic");
  o.detail << "fixture corpus and 1000 synthetic verdicts over 37 problems";
}

// ---- 5 ---------------------------------------------------------------------
struct Cell {
  const char* model;
  const char* dataset;
  double pass1, r_hat, delta;
};

void table1(Outcome& o) {
  const Cell cells[] = {
      {"Gemini-2.5-F", "AIME", 52.4, 17.0, 35.4},   {"Gemini-2.5-F", "BRUMO", 63.4, 20.7, 42.7},
      {"Gemini-2.5-F", "HMMT", 38.5, 5.7, 32.8},    {"Gemini-2.5-F-L", "AIME", 37.4, 15.9, 21.5},
      {"Gemini-2.5-F-L", "BRUMO", 43.2, 17.8, 25.4}, {"Gemini-2.5-F-L", "HMMT", 28.8, 7.5, 21.3},
      {"GPT-4.1", "AIME", 26.5, 16.8, 9.7},          {"GPT-4.1", "BRUMO", 33.3, 22.8, 10.5},
      {"GPT-4.1", "HMMT", 11.8, 6.5, 5.3},           {"GPT-4.1-M", "AIME", 30.5, 20.9, 9.6},
      {"GPT-4.1-M", "BRUMO", 34.4, 24.6, 9.8},       {"GPT-4.1-M", "HMMT", 14.3, 7.4, 6.9},
      {"Qwen3-30B", "AIME", 43.1, 15.8, 27.3},       {"Qwen3-30B", "BRUMO", 46.8, 21.8, 25.0},
      {"Qwen3-30B", "HMMT", 27.3, 5.6, 21.7},
  };
  // 40 problems x 25 samples: one trajectory is 0.1 percentage points.
  constexpr int kProblems = 40, kSamples = 25, kTotal = kProblems * kSamples;
  const auto perfect = testgen::lcp_trajectory();
  const auto imperfect = testgen::heptagon_trajectory();
  int matched = 0;
  for (const auto& c : cells) {
    const int n_correct = static_cast<int>(std::lround(c.pass1 * 10));
    const int n_perfect = static_cast<int>(std::lround(c.r_hat * 10));
    std::vector<EvalSample> samples;
    for (int k = 0; k < kTotal; ++k) {
      const std::string pid = "q" + std::to_string(k % kProblems);
      const std::int64_t idx = k / kProblems;
      if (k < n_perfect) {
        samples.push_back({{pid, c.model, idx}, perfect, normalize_answer("300")});
      } else if (k < n_correct) {
        samples.push_back({{pid, c.model, idx}, imperfect, normalize_answer("588")});
      } else {
        samples.push_back({{pid, c.model, idx}, perfect, normalize_answer("301")});
      }
    }
    const auto d = dataset_ability(group_by_problem(kernels::evaluate_samples_omp(samples)));
    const double got = std::round(d.delta_gap * 1000.0) / 10.0;
    const bool ok = std::abs(got - c.delta) < 1e-9;
    matched += ok;
    o.require(ok, std::string(c.model) + "/" + c.dataset + " delta " + fmt("%.1f", got) + " vs " + fmt("%.1f", c.delta));
  }
  o.detail << matched << "/15 cells reproduce delta (e.g. 52.4 - 17.0 -> 35.4)";
}

// ---- 6 ---------------------------------------------------------------------
void mutations(Outcome& o) {
  testgen::Rng rng(6);
  const RuleCode rules[] = {RuleCode::kDuplicateId,    RuleCode::kNonIncreasingId, RuleCode::kFutureDependency,
                            RuleCode::kDanglingParent, RuleCode::kUnsortedParents, RuleCode::kMissingBoxedFinal,
                            RuleCode::kUnclosedNonfinalStep};
  for (RuleCode rule : rules) {
    int exact = 0, made = 0;
    while (made < 100) {
      const auto m = testgen::mutate(testgen::random_trajectory(rng), rule, rng);
      if (!m) continue;
      ++made;
      std::set<RuleCode> seen;
      for (const auto& d : validate_format(*m)) seen.insert(d.rule_code);
      exact += seen == std::set<RuleCode>{rule};
    }
    o.require(exact == 100, std::string(rule_code_id(rule)) + " " + std::to_string(exact) + "/100");
    o.detail << rule_code_id(rule) << " " << exact << "/100 ";
  }
}

// ---- 7 ---------------------------------------------------------------------
void hoeffding(Outcome& o) {
  constexpr double eps = 0.05;
  const auto M = static_cast<std::size_t>(std::ceil(2.0 / (eps * eps) * std::log(40.0)));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < M; ++i) ids.push_back("h" + std::to_string(i));
  std::mt19937_64 rng(7);
  for (double r : {0.1, 0.5, 0.9}) {
    std::bernoulli_distribution coin(r);
    int within = 0;
    for (int rep = 0; rep < 1000; ++rep) {
      std::vector<ProblemEval> problems;
      problems.reserve(M);
      for (std::size_t i = 0; i < M; ++i) {
        const int ok = coin(rng);
        problems.push_back(evaluate_problem(ids[i], {synthetic(ids[i], 0, ok ? 1 : 0, 1, ok)}));
      }
      const auto d = dataset_ability(problems, 1);
      within += std::abs(d.r_hat - r) <= eps;
    }
    o.require(within >= 950, "r=" + fmt("%.1f", r) + " coverage");
    o.detail << "r=" << fmt("%.1f", r) << ": " << within << "/1000 ";
  }
  o.detail << "within eps with M=" << M;
}

// ---- 8 ---------------------------------------------------------------------
void equivalence(Outcome& o) {
  testgen::Rng rng(8);
  std::size_t checked = 0, mismatches = 0, perfect = 0;
  for (int i = 0; i < 200; ++i) {
    const auto g = testgen::random_task_dag(rng, {.max_nodes = 12});
    const auto truth = normalize_answer(std::to_string(g.correct_sink()));
    for (int s = 0; s < 25; ++s) {
      const auto sim = sample_trajectory(g, TransitionPolicy::uniform(), rng());
      const auto v = judge_trajectory(induced_trajectory(g, sim, {"g" + std::to_string(i), "sim", s}), truth);
      const bool sim_perfect = sim.classification == TrajectoryClass::kPerfect;
      mismatches += sim_perfect != (v.delta_close * v.delta_final == 1);
      perfect += sim_perfect;
      ++checked;
    }
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " mismatches");
  o.detail << checked << " trajectories over 200 DAGs, " << perfect << " perfect, " << mismatches << " mismatches";
}

// ---- 9 ---------------------------------------------------------------------
std::size_t complete_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty() && line.back() == '}';
  return n;
}

pid_t spawn_cli(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  argv.push_back(const_cast<char*>(DAGMATH_CLI_PATH));
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_addopen(&fa, STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, DAGMATH_CLI_PATH, &fa, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  if (rc != 0) throw std::runtime_error("cannot start " + std::string(DAGMATH_CLI_PATH));
  return pid;
}

int wait_exit(pid_t pid) {
  int status = 0;
  waitpid(pid, &status, 0);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void resilience(Outcome& o) {
  ::setenv("DAGMATH_ACCEPTANCE_KEY", "sk-acceptance", 1);
  std::mutex mu;
  std::mt19937_64 rng(99);
  std::size_t injected = 0;
  const auto lcp = testgen::lcp_trajectory();
  auto broken = lcp;
  broken.steps[3].direct_dependent_steps = std::vector<StepId>{1, 6};  // F03
  testgen::StubServer server([&](const httplib::Request& req, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(15));
    {
      std::lock_guard lock(mu);
      if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.2) {
        ++injected;
        res.status = injected % 2 ? 503 : 429;
        res.set_content("{\"error\": \"injected\"}", "application/json");
        return;
      }
    }
    const bool bad = testgen::prompt_of(req).find("Problem four") != std::string::npos;
    res.set_content(testgen::completion_body(trajectory_to_json(bad ? broken : lcp).dump()), "application/json");
  });

  testgen::TempDir dir;
  const char* names[] = {"one", "two", "three", "four", "five"};
  std::string problems;
  for (int i = 0; i < 5; ++i) {
    problems += json{{"problem_id", std::string("p") + std::to_string(i + 1)},
                     {"statement", std::string("Problem ") + names[i] + "."},
                     {"ground_truth", "300"}}
                    .dump() +
                "\n";
  }
  write_file(dir / "problems.jsonl", problems);
  write_file(dir / "endpoint.json",
             json{{"base_url", server.base_url()},
                  {"model_name", "stub"},
                  {"api_key_env", "DAGMATH_ACCEPTANCE_KEY"},
                  {"max_concurrency", 2},
                  {"retry", {{"max_attempts", 6}, {"backoff_base_ms", 2}, {"backoff_cap_ms", 10}}}}
                 .dump());
  const auto corpus = dir / "corpus.jsonl";
  const std::vector<std::string> args{"sample",    "--problems", (dir / "problems.jsonl").string(),
                                      "--endpoint", (dir / "endpoint.json").string(),
                                      "--shots",    "0",
                                      "--samples",  "8",
                                      "--corpus",   corpus.string(),
                                      "--out",      dir.path().string()};

  const pid_t first = spawn_cli(args);
  const auto deadline = Clock::now() + std::chrono::seconds(20);
  while (complete_lines(corpus) < 12 && Clock::now() < deadline) std::this_thread::sleep_for(std::chrono::milliseconds(2));
  ::kill(first, SIGKILL);
  wait_exit(first);
  const std::size_t before = complete_lines(corpus);
  o.require(before >= 12 && before < 40, "kill landed mid-job (" + std::to_string(before) + " lines)");

  const int rc = wait_exit(spawn_cli(args));
  o.require(rc == 0, "resume exit code " + std::to_string(rc));

  CorpusReadStats stats;
  const auto records = read_corpus(corpus, &stats);
  std::set<std::pair<std::string, std::int64_t>> keys;
  std::size_t failed = 0;
  for (const auto& r : records) {
    keys.emplace(r.problem_id, r.sample_index);
    failed += r.status == RecordStatus::kFailed;
  }
  o.require(records.size() == 40, std::to_string(records.size()) + " records");
  o.require(keys.size() == 40, std::to_string(keys.size()) + " unique keys");

  const auto ing = ingest_completions(records);
  const auto report = reject_report_json(ing);
  const auto& per = report.at("per_model").at("stub");
  std::size_t bad_expected = 0;
  for (const auto& r : records) bad_expected += r.problem_id == "p4" && r.status == RecordStatus::kOk;
  o.require(per.at("total") == 40, "report total");
  o.require(per.at("by_reason").value("F03", 0) == bad_expected, "F03 rejects");
  o.require(per.at("by_reason").value("request-failed", 0) == failed, "failed rejects");
  o.require(report.at("n_rejected") == bad_expected + failed, "reject count");
  o.require(report.at("n_valid") == 40 - bad_expected - failed, "valid count");
  bool only_p4 = true;
  for (const auto& e : ing.rejects) {
    if (e.error.empty()) only_p4 &= e.problem_id == "p4" && e.rules == std::vector<RuleCode>{RuleCode::kFutureDependency};
  }
  o.require(only_p4, "F03 rejects are exactly problem four");
  o.require(read_file(corpus).find("sk-acceptance") == std::string::npos, "no key in corpus");
  o.detail << "killed at " << before << " lines, resumed to " << records.size() << " records (" << keys.size()
           << " unique, " << stats.torn << " torn line skipped), " << injected << " injected failures over "
           << server.hits() << " requests, rejects " << report.at("n_rejected") << " (F03 " << bad_expected
           << ", failed " << failed << ")";
}

}  // namespace

int main() {
  criterion(1, 1, heptagon);
  criterion(2, 1, lcp);
  criterion(3, 30, two_chain);
  criterion(4, 5, auc);
  criterion(5, 1, table1);
  criterion(6, 10, mutations);
  criterion(7, 20, hoeffding);
  criterion(8, 60, equivalence);
  criterion(9, 30, resilience);
  std::cout << (failures ? "FAILED " : "all criteria passed") << (failures ? std::to_string(failures) : "") << std::endl;
  return failures ? 1 : 0;
}
