#include "dagmath/cli.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "dagmath/corpus.hpp"
#include "dagmath/dag.hpp"
#include "dagmath/ingestion.hpp"
#include "dagmath/kernels.hpp"
#include "dagmath/metrics.hpp"
#include "dagmath/simulator.hpp"

#ifndef DAGMATH_VERSION
#define DAGMATH_VERSION "dev"
#endif

namespace dagmath {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Globals {
  std::uint64_t seed = 0;
  int jobs = 0;
  std::string format = "json";
  std::string out = "out";
};

struct CorpusArgs {
  std::vector<std::string> corpora;
  std::string truths;
  std::size_t grid = 100;
  bool strict = false;
};

struct SimulateArgs {
  std::string dag;
  int two_chain = 0;
  std::string policy = "uniform";
  std::vector<std::string> weights;
  std::size_t n = 100000;
  std::size_t budget = 2'000'000;
};

struct SampleArgs {
  std::string problems;
  std::string endpoint;
  std::string demos;
  std::string corpus;
  std::size_t samples = 32;
  std::size_t shots = 4;
  std::size_t stage2_attempts = 3;
};

struct Context {
  Globals g;
  std::vector<fs::path> inputs;
  std::ostream& out;
  std::ostream& err;

  fs::path out_path(const std::string& name) const { return fs::path(g.out) / name; }
  bool csv() const { return g.format == "csv"; }
};

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

void write_manifest(const Context& ctx, const std::string& subcommand, const std::string& config,
                    const std::vector<std::string>& argv) {
  json inputs = json::array();
  for (const auto& p : ctx.inputs) {
    if (!fs::is_regular_file(p)) continue;
    inputs.push_back({{"path", p.string()}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p)}});
  }
  json m{{"tool", "dagmath"},
         {"version", DAGMATH_VERSION},
         {"subcommand", subcommand},
         {"argv", argv},
         {"config", config},
         {"seed", ctx.g.seed},
         {"jobs", ctx.g.jobs},
         {"format", ctx.g.format},
         {"inputs", inputs},
         {"started_at", iso8601_now()}};
  write_file(ctx.out_path("manifest.json"), m.dump(2) + "\n");
}

std::vector<CorpusRecord> load_all(const std::vector<std::string>& paths) {
  std::vector<CorpusRecord> all;
  for (const auto& p : paths) {
    auto part = read_corpus(p);
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return all;
}

// {"pid": "answer"} or a problem list.
std::map<std::string, std::string> load_truths(const std::string& path) {
  std::map<std::string, std::string> out;
  const std::string text = read_file(path);
  json j;
  if (json::accept(text)) j = json::parse(text);
  if (j.is_object() && !j.contains("problem_id")) {
    for (const auto& [k, v] : j.items()) out[k] = v.is_string() ? v.get<std::string>() : v.dump();
    return out;
  }
  for (const auto& p : load_problems(path)) out[p.problem_id] = p.ground_truth;
  return out;
}

std::vector<EvalSample> eval_samples(const std::vector<CorpusRecord>& records, const std::string& truths_path) {
  std::map<std::string, std::string> truths;
  if (!truths_path.empty()) truths = load_truths(truths_path);
  std::vector<EvalSample> samples;
  std::set<std::string> missing;
  for (const auto& r : records) {
    std::string truth;
    if (auto it = truths.find(r.problem_id); it != truths.end()) {
      truth = it->second;
    } else if (r.ground_truth) {
      truth = *r.ground_truth;
    } else {
      missing.insert(r.problem_id);
      continue;
    }
    samples.push_back({r.meta(), r.parsed, normalize_answer(truth)});
  }
  if (!missing.empty()) {
    std::string ids;
    for (const auto& id : missing) ids += (ids.empty() ? "" : ", ") + id;
    throw Error(ErrorCode::kMissingTruth, "no ground truth for problem(s): " + ids);
  }
  if (samples.empty()) throw Error(ErrorCode::kEmptyDataset, "corpus has no records");
  return samples;
}

DatasetEval evaluate_corpus(Context& ctx, const CorpusArgs& a, std::vector<ProblemEval>* problems_out) {
  for (const auto& c : a.corpora) ctx.inputs.emplace_back(c);
  if (!a.truths.empty()) ctx.inputs.emplace_back(a.truths);
  const auto records = load_all(a.corpora);
  const auto samples = eval_samples(records, a.truths);
  auto verdicts = kernels::evaluate_samples_omp(samples, {}, ctx.g.jobs);
  auto problems = group_by_problem(std::move(verdicts));
  auto eval = dataset_ability(problems, a.grid);
  if (problems_out) *problems_out = std::move(problems);
  return eval;
}

void check_monotone(const AucCurve& c) {
  for (std::size_t i = 1; i < c.accuracy_at.size(); ++i) {
    if (c.accuracy_at[i] > c.accuracy_at[i - 1]) {
      throw Error(ErrorCode::kInvalidFormat, "AUC curve increases at threshold " + std::to_string(c.thresholds[i]));
    }
  }
}

int cmd_validate(Context& ctx, const CorpusArgs& a) {
  for (const auto& c : a.corpora) ctx.inputs.emplace_back(c);
  auto records = load_all(a.corpora);
  if (a.strict) {
    for (auto& r : records) {
      if (r.parsed) r.diagnostics = validate_format(*r.parsed, {.strict_citations = true});
    }
  }
  const auto result = ingest_completions(records);
  if (ctx.csv()) {
    std::ostringstream os;
    os << "problem_id,model_id,sample_index,rule,severity,step_id,message\n";
    auto emit = [&](const RejectEntry& e) {
      if (e.diagnostics.empty()) {
        os << e.problem_id << ',' << e.model_id << ',' << e.sample_index << ",,error,,\"" << e.error << "\"\n";
      }
      for (const auto& d : e.diagnostics) {
        std::string msg = d.message;
        for (std::size_t p = msg.find('"'); p != std::string::npos; p = msg.find('"', p + 2)) msg.insert(p, "\"");
        os << e.problem_id << ',' << e.model_id << ',' << e.sample_index << ',' << rule_code_id(d.rule_code) << ','
           << severity_name(d.severity) << ',' << (d.step_id ? std::to_string(*d.step_id) : "") << ",\"" << msg
           << "\"\n";
      }
    };
    for (const auto& e : result.rejects) emit(e);
    for (const auto& e : result.warnings) emit(e);
    write_file(ctx.out_path("validate.csv"), os.str());
  } else {
    json report = reject_report_json(result);
    report["n_records"] = records.size();
    write_file(ctx.out_path("validate.json"), report.dump(2) + "\n");
  }
  ctx.out << "records " << records.size() << ", valid " << result.valid.size() << ", rejected "
          << result.rejects.size() << ", with warnings " << result.warnings.size() << "\n";
  for (const auto& e : result.rejects) {
    ctx.out << "  reject " << e.problem_id << "#" << e.sample_index << ":";
    for (RuleCode c : e.rules) ctx.out << ' ' << rule_code_id(c);
    if (!e.error.empty()) ctx.out << ' ' << e.error;
    ctx.out << "\n";
  }
  return result.rejects.empty() ? kExitOk : kExitValidation;
}

void print_summary(const Context& ctx, const DatasetEval& e) {
  ctx.out << "problems " << e.M << ", trajectories " << e.n_trajectories << "\n"
          << "PASS@1 " << percent(e.pass1) << "  R-hat " << percent(e.r_hat) << "  Delta " << percent(e.delta_gap)
          << "  AUC " << e.auc.auc_score << "\n";
}

int cmd_eval(Context& ctx, const CorpusArgs& a) {
  std::vector<ProblemEval> problems;
  const auto eval = evaluate_corpus(ctx, a, &problems);
  check_monotone(eval.auc);
  if (ctx.csv()) {
    std::ostringstream summary;
    summary << "metric,value\n"
            << "M," << eval.M << "\nn_trajectories," << eval.n_trajectories << "\npass1," << eval.pass1
            << "\nr_hat," << eval.r_hat << "\ndelta," << eval.delta_gap << "\nauc," << eval.auc.auc_score << "\n";
    write_file(ctx.out_path("eval.csv"), summary.str());
    std::ostringstream per;
    per << "problem_id,n_samples,pass1,prr_hat\n";
    for (const auto& p : problems) per << p.problem_id << ',' << p.n_samples << ',' << p.pass1 << ',' << p.prr_hat << "\n";
    write_file(ctx.out_path("problems.csv"), per.str());
    write_file(ctx.out_path("cohorts.csv"), cohort_table_csv(eval));
  } else {
    json report = dataset_to_json(eval);
    json per = json::array();
    for (const auto& p : problems) per.push_back(problem_to_json(p));
    report["problems"] = std::move(per);
    write_file(ctx.out_path("eval.json"), report.dump(2) + "\n");
  }
  print_summary(ctx, eval);
  return kExitOk;
}

int cmd_auc(Context& ctx, const CorpusArgs& a) {
  const auto eval = evaluate_corpus(ctx, a, nullptr);
  check_monotone(eval.auc);
  write_file(ctx.out_path("auc.csv"), auc_to_csv(eval.auc));
  if (!ctx.csv()) {
    json j{{"auc", eval.auc.auc_score}, {"pass1", eval.pass1}, {"r_hat", eval.r_hat},
           {"thresholds", eval.auc.thresholds}, {"accuracy", eval.auc.accuracy_at}};
    write_file(ctx.out_path("auc.json"), j.dump(2) + "\n");
  }
  ctx.out << "AUC " << eval.auc.auc_score << " over " << eval.auc.thresholds.size() << " thresholds\n";
  return kExitOk;
}

int cmd_cohorts(Context& ctx, const CorpusArgs& a) {
  const auto eval = evaluate_corpus(ctx, a, nullptr);
  const std::string table = cohort_table_csv(eval);
  if (ctx.csv()) {
    write_file(ctx.out_path("cohorts.csv"), table);
  } else {
    const json d = dataset_to_json(eval);
    json j{{"cohorts", d.at("cohorts")}};
    write_file(ctx.out_path("cohorts.json"), j.dump(2) + "\n");
  }
  ctx.out << table;
  return kExitOk;
}

json estimate_json(const PrrEstimate& e) {
  json j{{"method", e.method == PrrEstimate::Method::kExhaustive ? "exhaustive" : "monte_carlo"},
         {"value", e.value},
         {"std_error", e.std_error},
         {"breakdown", {{"perfect", e.breakdown.perfect}, {"imperfect", e.breakdown.imperfect},
                        {"wrong", e.breakdown.wrong}}}};
  if (e.method == PrrEstimate::Method::kExhaustive) {
    j["states_explored"] = e.states_explored;
  } else {
    j["n_samples"] = e.n_samples;
  }
  return j;
}

int cmd_simulate(Context& ctx, const SimulateArgs& a) {
  if (a.dag.empty() == (a.two_chain == 0)) {
    throw Error(ErrorCode::kConfigError, "give exactly one of --dag or --two-chain");
  }
  if (a.n == 0) throw Error(ErrorCode::kConfigError, "--n must be >= 1");
  json report;
  std::optional<TaskDag> g;
  if (!a.dag.empty()) {
    ctx.inputs.emplace_back(a.dag);
    g = load_task_dag(read_file(a.dag));
    report["source"] = a.dag;
  } else {
    g = make_two_chain(a.two_chain);
    report["source"] = "two-chain";
    report["chain_length"] = a.two_chain;
  }

  TransitionPolicy policy;
  if (a.policy == "weighted") {
    policy = TransitionPolicy::from_node_weights(*g);
    for (const auto& spec : a.weights) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::kConfigError, "--weight expects id=value, got " + spec);
      try {
        policy.weights[std::stoll(spec.substr(0, eq))] = std::stod(spec.substr(eq + 1));
      } catch (const std::exception&) {
        throw Error(ErrorCode::kConfigError, "--weight expects id=value, got " + spec);
      }
    }
    policy = TransitionPolicy::weighted(policy.weights);
  } else if (a.policy != "uniform") {
    throw Error(ErrorCode::kConfigError, "--policy must be uniform or weighted");
  }

  report["nodes"] = g->size();
  report["edges"] = g->edges().size();
  report["policy"] = a.policy;
  report["seed"] = ctx.g.seed;
  const auto mc = monte_carlo_prr(*g, policy, a.n, ctx.g.seed);
  report["monte_carlo"] = estimate_json(mc);
  std::optional<PrrEstimate> exact;
  try {
    exact = exhaustive_prr(*g, policy, a.budget);
    report["exhaustive"] = estimate_json(*exact);
    const double gap = std::abs(mc.value - exact->value);
    report["mc_gap_in_std_errors"] = mc.std_error > 0 ? json(gap / mc.std_error) : json(nullptr);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kBudgetExceeded) throw;
    report["exhaustive"] = nullptr;
    report["notice"] = std::string("exhaustive enumeration skipped: ") + e.what();
    ctx.err << "notice: " << e.what() << "; reporting Monte Carlo only\n";
  }
  if (a.two_chain > 0) {
    report["closed_forms"] = {{"half_pow_L", std::pow(0.5, a.two_chain)},
                              {"half_pow_L_minus_1", std::pow(0.5, a.two_chain - 1)}};
  }

  if (ctx.csv()) {
    std::ostringstream os;
    os << "method,value,std_error,n,perfect,imperfect,wrong\n";
    auto row = [&](const PrrEstimate& e, const char* name) {
      os << name << ',' << e.value << ',' << e.std_error << ',' << e.n_samples << ',' << e.breakdown.perfect << ','
         << e.breakdown.imperfect << ',' << e.breakdown.wrong << "\n";
    };
    row(mc, "monte_carlo");
    if (exact) row(*exact, "exhaustive");
    write_file(ctx.out_path("simulate.csv"), os.str());
  } else {
    write_file(ctx.out_path("simulate.json"), report.dump(2) + "\n");
  }
  ctx.out << "monte carlo PRR " << mc.value << " +/- " << mc.std_error << " (n=" << mc.n_samples
          << "; perfect " << mc.breakdown.perfect << ", imperfect " << mc.breakdown.imperfect << ", wrong "
          << mc.breakdown.wrong << ")\n";
  if (exact) {
    ctx.out << "exhaustive PRR " << exact->value << " (perfect " << exact->breakdown.perfect << ", imperfect "
            << exact->breakdown.imperfect << ", wrong " << exact->breakdown.wrong << "; "
            << exact->states_explored << " states)\n";
  }
  return kExitOk;
}

EndpointConfig load_endpoint(Context& ctx, const std::string& path) {
  if (path.empty()) throw Error(ErrorCode::kConfigError, "--endpoint is required");
  ctx.inputs.emplace_back(path);
  const std::string text = read_file(path);
  if (!json::accept(text)) throw Error(ErrorCode::kConfigError, path + " is not valid JSON");
  auto e = endpoint_from_json(json::parse(text));
  if (ctx.g.jobs > 0) e.max_concurrency = static_cast<std::size_t>(ctx.g.jobs);
  return e;
}

int cmd_sample(Context& ctx, const SampleArgs& a) {
  if (a.problems.empty()) throw Error(ErrorCode::kConfigError, "--problems is required");
  SamplingJob job;
  job.endpoint = load_endpoint(ctx, a.endpoint);
  ctx.inputs.emplace_back(a.problems);
  job.problems = load_problems(a.problems);
  if (!a.demos.empty()) {
    ctx.inputs.emplace_back(a.demos);
    job.demonstrations = load_demonstrations(a.demos);
  }
  job.shots = a.shots;
  job.samples_per_problem = a.samples;
  job.corpus_path = a.corpus.empty() ? ctx.out_path("corpus.jsonl") : fs::path(a.corpus);
  auto client = make_http_client(job.endpoint);
  const auto s = sample_trajectories(job, *client);
  ctx.out << "requested " << s.requested << ", skipped " << s.skipped << ", ok " << s.ok << ", failed " << s.failed
          << ", retries " << s.retries << " -> " << job.corpus_path.string() << "\n";
  return kExitOk;
}

int cmd_build_bench(Context& ctx, const SampleArgs& a) {
  if (a.problems.empty()) throw Error(ErrorCode::kConfigError, "--problems is required");
  const auto endpoint = load_endpoint(ctx, a.endpoint);
  ctx.inputs.emplace_back(a.problems);
  const auto problems = load_problems(a.problems);
  auto client = make_http_client(endpoint);

  BenchBuildOptions options;
  options.stage2_attempts = a.stage2_attempts;
  std::vector<BenchRecord> records;
  json failures = json::array();
  const fs::path gold_path = ctx.out_path("gold.jsonl");
  std::error_code ec;
  fs::remove(gold_path, ec);
  CorpusWriter gold(gold_path);
  for (const auto& p : problems) {
    const auto outcome = build_gold_dag(p, *client, endpoint, options);
    if (!outcome.gold) {
      failures.push_back({{"problem_id", p.problem_id}, {"failure", outcome.failure},
                          {"stage2_attempts", outcome.stage2_attempts}});
      continue;
    }
    json line = trajectory_to_json(*outcome.gold);
    line["problem_id"] = p.problem_id;
    line["model_id"] = endpoint.model_name;
    line["ground_truth"] = p.ground_truth;
    line["difficulty"] = p.difficulty;
    gold.append_json(line);
    records.push_back({p.problem_id, p.difficulty, graph_stats(build_dag(*outcome.gold))});
  }
  write_file(ctx.out_path("bench_failures.json"), failures.dump(2) + "\n");
  write_file(ctx.out_path("histograms.csv"), histograms_to_csv(difficulty_histograms(records)));
  ctx.out << "gold " << records.size() << " of " << problems.size() << " -> " << gold_path.string() << "\n";
  return kExitOk;
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoError:
    case ErrorCode::kUnreadableCorpus:
      return kExitIo;
    case ErrorCode::kAuthFailure:
    case ErrorCode::kRateLimited:
    case ErrorCode::kTransportError:
      return kExitEndpoint;
    case ErrorCode::kConfigError:
    case ErrorCode::kInvalidLength:
    case ErrorCode::kInsufficientDemos:
      return kExitConfig;
    default:
      return kExitValidation;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Parse, validate and evaluate DAG-MATH reasoning trajectories"};
  app.set_version_flag("--version", DAGMATH_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");

  Globals g;
  app.add_option("--seed", g.seed, "Root random seed")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads (0 = all cores)")->capture_default_str();
  app.add_option("--format", g.format, "Report format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  CorpusArgs ca;
  auto add_corpus = [&](CLI::App* sub, bool truths) {
    sub->add_option("corpus", ca.corpora, "Corpus files (JSONL, JSON array or one trajectory)")->required();
    if (truths) {
      sub->add_option("--truths", ca.truths, "Ground truths: {id: answer} or a problem list");
      sub->add_option("--grid", ca.grid, "Closeness threshold steps")->capture_default_str()->check(CLI::PositiveNumber);
    }
  };
  auto* validate = app.add_subcommand("validate", "Check trajectories against the format rules");
  add_corpus(validate, false);
  validate->add_flag("--strict", ca.strict, "Also cross-check Step citations in edge text");
  auto* eval = app.add_subcommand("eval", "PASS@1, R-hat, gap, AUC and cohort statistics");
  add_corpus(eval, true);
  auto* auc = app.add_subcommand("auc", "Accuracy versus required closeness rate");
  add_corpus(auc, true);
  auto* cohorts = app.add_subcommand("cohorts", "Averaged graph statistics per cohort");
  add_corpus(cohorts, true);

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "PRR of the frontier process on a task DAG");
  simulate->add_option("--dag", sa.dag, "Task DAG file");
  simulate->add_option("--two-chain", sa.two_chain, "Use the two-chain toy with this chain length");
  simulate->add_option("--policy", sa.policy, "uniform or weighted")->capture_default_str();
  simulate->add_option("--weight", sa.weights, "Override a node weight, id=value (weighted policy)");
  simulate->add_option("--n", sa.n, "Monte Carlo samples")->capture_default_str();
  simulate->add_option("--budget", sa.budget, "State budget for exhaustive enumeration")->capture_default_str();

  SampleArgs sm;
  auto* sample = app.add_subcommand("sample", "Sample DAG-MATH trajectories from a chat endpoint");
  sample->add_option("--problems", sm.problems, "Problem list (JSON array or JSONL)")->required();
  sample->add_option("--endpoint", sm.endpoint, "Endpoint config (JSON)")->required();
  sample->add_option("--demos", sm.demos, "Gold demonstrations (JSON array)");
  sample->add_option("--corpus", sm.corpus, "Corpus to append to (default <out>/corpus.jsonl)");
  sample->add_option("--samples", sm.samples, "Samples per problem")->capture_default_str()->check(CLI::PositiveNumber);
  sample->add_option("--shots", sm.shots, "Demonstrations per prompt")->capture_default_str();
  auto* bench = app.add_subcommand("build-bench", "Three-stage gold DAG construction");
  bench->add_option("--problems", sm.problems, "Problems with reference solutions")->required();
  bench->add_option("--endpoint", sm.endpoint, "Endpoint config (JSON)")->required();
  bench->add_option("--stage2-attempts", sm.stage2_attempts, "Dependency annotation attempts")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  Context ctx{g, {}, out, err};
  std::vector<std::string> args(argv, argv + argc);
  try {
    if (g.jobs > 0) omp_set_num_threads(g.jobs);
    fs::create_directories(g.out);
    int rc = kExitOk;
    std::string name;
    if (validate->parsed()) {
      name = "validate", rc = cmd_validate(ctx, ca);
    } else if (eval->parsed()) {
      name = "eval", rc = cmd_eval(ctx, ca);
    } else if (auc->parsed()) {
      name = "auc", rc = cmd_auc(ctx, ca);
    } else if (cohorts->parsed()) {
      name = "cohorts", rc = cmd_cohorts(ctx, ca);
    } else if (simulate->parsed()) {
      name = "simulate", rc = cmd_simulate(ctx, sa);
    } else if (sample->parsed()) {
      name = "sample", rc = cmd_sample(ctx, sm);
    } else if (bench->parsed()) {
      name = "build-bench", rc = cmd_build_bench(ctx, sm);
    }
    write_manifest(ctx, name, app.config_to_str(true, false), args);
    return rc;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace dagmath
