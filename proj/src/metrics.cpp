#include "dagmath/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dagmath/error.hpp"

namespace dagmath {
namespace {

using nlohmann::json;

CohortClass class_of(int delta_close, int delta_final) {
  if (delta_final == 0) return CohortClass::kIncorrect;
  return delta_close ? CohortClass::kPerfect : CohortClass::kCorrect;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

std::string_view cohort_class_name(CohortClass c) {
  switch (c) {
    case CohortClass::kIncorrect: return "Incorrect";
    case CohortClass::kCorrect: return "Correct";
    case CohortClass::kPerfect: return "Perfect";
  }
  return "?";
}

std::string_view cohort_name(Cohort c) {
  switch (c) {
    case Cohort::kAll: return "All";
    case Cohort::kIncorrect: return "Incorrect";
    case Cohort::kCorrect: return "Correct";
    case Cohort::kPerfect: return "Perfect";
  }
  return "?";
}

int judge_final(const Answer& candidate, const Answer& truth, const AnswerJudge& judge) {
  if (judge) {
    if (auto verdict = judge(candidate, truth)) return *verdict ? 1 : 0;
  }
  if (candidate.numeric_value && truth.numeric_value) {
    return *candidate.numeric_value == *truth.numeric_value ? 1 : 0;
  }
  return candidate.canonical == truth.canonical ? 1 : 0;
}

TrajectoryVerdict judge_trajectory(const Trajectory& t, const Answer& truth, const AnswerJudge& judge) {
  const auto diagnostics = validate_format(t);
  for (const auto& d : diagnostics) {
    if (d.severity == Severity::kError) {
      throw Error(ErrorCode::kInvalidFormat,
                  std::string(rule_code_id(d.rule_code)) + " " + d.message);
    }
  }
  const TrajectoryDag g = build_dag(t);
  TrajectoryVerdict v;
  v.problem_id = t.problem_id;
  v.model_id = t.model_id;
  v.sample_index = t.sample_index;
  v.n_unclosed = unclosed_nodes(g).size();
  v.delta_close = v.n_unclosed == 0 ? 1 : 0;
  v.closeness = closeness(g);
  v.delta_final = judge_final(extract_boxed_answer(t), truth, judge);
  v.cohort = class_of(v.delta_close, v.delta_final);
  v.stats = graph_stats(g);
  return v;
}

TrajectoryVerdict evaluate_sample(const EvalSample& sample, const AnswerJudge& judge) {
  TrajectoryVerdict v;
  v.problem_id = sample.meta.problem_id;
  v.model_id = sample.meta.model_id;
  v.sample_index = sample.meta.sample_index;
  v.format_valid = false;
  if (!sample.trajectory) return v;

  const Trajectory& t = *sample.trajectory;
  const auto diagnostics = validate_format(t);
  if (!has_errors(diagnostics)) {
    TrajectoryVerdict judged = judge_trajectory(t, sample.truth, judge);
    judged.problem_id = v.problem_id;
    judged.model_id = v.model_id;
    judged.sample_index = v.sample_index;
    return judged;
  }
  try {
    v.delta_final = judge_final(extract_boxed_answer(t), sample.truth, judge);
  } catch (const Error&) {
    v.delta_final = 0;
  }
  if (!has_structural_errors(diagnostics)) {
    // Only the boxed-answer rule failed: the graph is still well defined.
    const TrajectoryDag g = build_dag(t);
    v.n_unclosed = unclosed_nodes(g).size();
    v.delta_close = v.n_unclosed == 0 ? 1 : 0;
    v.closeness = closeness(g);
    v.stats = graph_stats(g);
  }
  v.cohort = class_of(v.delta_close, v.delta_final);
  return v;
}

double prr_hat(std::span<const TrajectoryVerdict> verdicts) {
  if (verdicts.empty()) throw Error(ErrorCode::kEmptySampleSet, "no verdicts for PRR estimate");
  std::size_t perfect = 0;
  for (const auto& v : verdicts) perfect += static_cast<std::size_t>(v.delta_close * v.delta_final);
  return static_cast<double>(perfect) / static_cast<double>(verdicts.size());
}

double pass_at_k(std::size_t n, std::size_t c, std::size_t k) {
  if (k < 1 || k > n) {
    throw Error(ErrorCode::kKOutOfRange, "k=" + std::to_string(k) + " with N=" + std::to_string(n));
  }
  if (c > n) throw Error(ErrorCode::kKOutOfRange, "more correct samples than samples");
  if (k == 1) return static_cast<double>(c) / static_cast<double>(n);
  if (n - c < k) return 1.0;
  // C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k/i)
  double miss = 1.0;
  for (std::size_t i = n - c + 1; i <= n; ++i) {
    miss *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
  }
  return 1.0 - miss;
}

double pass_at_k(std::span<const TrajectoryVerdict> verdicts, std::size_t k) {
  std::size_t c = 0;
  for (const auto& v : verdicts) c += static_cast<std::size_t>(v.delta_final);
  return pass_at_k(verdicts.size(), c, k);
}

ProblemEval evaluate_problem(std::string problem_id, std::vector<TrajectoryVerdict> verdicts) {
  ProblemEval p;
  p.problem_id = std::move(problem_id);
  p.n_samples = verdicts.size();
  p.prr_hat = prr_hat(verdicts);
  p.pass1 = pass_at_k(verdicts, 1);
  p.verdicts = std::move(verdicts);
  return p;
}

std::vector<ProblemEval> group_by_problem(std::vector<TrajectoryVerdict> verdicts) {
  std::stable_sort(verdicts.begin(), verdicts.end(), [](const auto& a, const auto& b) {
    if (a.problem_id != b.problem_id) return a.problem_id < b.problem_id;
    return a.sample_index < b.sample_index;
  });
  std::vector<ProblemEval> out;
  auto begin = verdicts.begin();
  while (begin != verdicts.end()) {
    auto end = std::find_if(begin, verdicts.end(),
                            [&](const auto& v) { return v.problem_id != begin->problem_id; });
    std::vector<TrajectoryVerdict> group(std::make_move_iterator(begin), std::make_move_iterator(end));
    std::string id = group.front().problem_id;
    out.push_back(evaluate_problem(std::move(id), std::move(group)));
    begin = end;
  }
  return out;
}

AucCurve auc_curve(std::span<const TrajectoryVerdict> verdicts, std::size_t grid_steps) {
  if (grid_steps == 0) grid_steps = 100;
  AucCurve curve;
  curve.thresholds.resize(grid_steps + 1);
  curve.accuracy_at.assign(grid_steps + 1, 0.0);
  for (std::size_t k = 0; k <= grid_steps; ++k) {
    curve.thresholds[k] = static_cast<double>(k) / static_cast<double>(grid_steps);
  }
  if (verdicts.empty()) return curve;

  // Per problem: counts[k] = #samples with closeness >= k/grid and delta_final.
  std::map<std::string, std::pair<std::size_t, std::vector<std::size_t>>> per_problem;
  const auto grid = static_cast<std::int64_t>(grid_steps);
  for (const auto& v : verdicts) {
    auto& [n, counts] = per_problem[v.problem_id];
    if (counts.empty()) counts.assign(grid_steps + 1, 0);
    ++n;
    if (!v.delta_final) continue;
    for (std::int64_t k = 0; k <= grid; ++k) {
      if (v.closeness.closed * grid < k * v.closeness.total) break;
      ++counts[static_cast<std::size_t>(k)];
    }
  }
  const double m = static_cast<double>(per_problem.size());
  for (std::size_t k = 0; k <= grid_steps; ++k) {
    double sum = 0.0;
    for (const auto& [id, entry] : per_problem) {
      sum += static_cast<double>(entry.second[k]) / static_cast<double>(entry.first);
    }
    curve.accuracy_at[k] = sum / m;
  }
  double total = 0.0;
  for (double a : curve.accuracy_at) total += a;
  curve.auc_score = total / static_cast<double>(curve.accuracy_at.size());
  return curve;
}

const std::vector<TrajectoryVerdict>& CohortPartition::get(Cohort c) const {
  switch (c) {
    case Cohort::kAll: return all;
    case Cohort::kIncorrect: return incorrect;
    case Cohort::kCorrect: return correct;
    case Cohort::kPerfect: return perfect;
  }
  return all;
}

CohortPartition partition_cohorts(std::span<const TrajectoryVerdict> verdicts) {
  CohortPartition p;
  for (const auto& v : verdicts) {
    p.all.push_back(v);
    if (v.delta_final) {
      p.correct.push_back(v);
      if (v.delta_close) p.perfect.push_back(v);
    } else {
      p.incorrect.push_back(v);
    }
  }
  return p;
}

AveragedGraphStats cohort_graph_stats(std::span<const TrajectoryVerdict> cohort) {
  AveragedGraphStats a;
  for (const auto& v : cohort) {
    if (!v.stats) continue;
    const GraphStats& s = *v.stats;
    ++a.count;
    a.n_nodes += static_cast<double>(s.n_nodes);
    a.n_edges += static_cast<double>(s.n_edges);
    a.density += s.density;
    a.max_in_degree += static_cast<double>(s.max_in_degree);
    a.max_out_degree += static_cast<double>(s.max_out_degree);
    a.avg_in_degree += s.avg_in_degree;
    a.avg_out_degree += s.avg_out_degree;
  }
  if (a.count == 0) throw Error(ErrorCode::kEmptyCohort, "cohort has no graphs to average");
  const double n = static_cast<double>(a.count);
  a.n_nodes /= n;
  a.n_edges /= n;
  a.density /= n;
  a.max_in_degree /= n;
  a.max_out_degree /= n;
  a.avg_in_degree /= n;
  a.avg_out_degree /= n;
  return a;
}

DatasetEval dataset_ability(const std::vector<ProblemEval>& problems, std::size_t grid_steps) {
  if (problems.empty()) throw Error(ErrorCode::kEmptyDataset, "no problems to aggregate");
  DatasetEval d;
  d.M = problems.size();
  std::vector<TrajectoryVerdict> all;
  // Same operation order as auc_curve so the curve endpoints match exactly.
  std::map<std::string, const ProblemEval*> ordered;
  for (const auto& p : problems) ordered[p.problem_id] = &p;
  double pass_sum = 0.0;
  double prr_sum = 0.0;
  for (const auto& [id, p] : ordered) {
    std::size_t correct = 0;
    std::size_t perfect = 0;
    for (const auto& v : p->verdicts) {
      correct += static_cast<std::size_t>(v.delta_final);
      perfect += static_cast<std::size_t>(v.delta_final * v.delta_close);
    }
    pass_sum += static_cast<double>(correct) / static_cast<double>(p->verdicts.size());
    prr_sum += static_cast<double>(perfect) / static_cast<double>(p->verdicts.size());
    all.insert(all.end(), p->verdicts.begin(), p->verdicts.end());
  }
  d.n_trajectories = all.size();
  d.pass1 = pass_sum / static_cast<double>(ordered.size());
  d.r_hat = prr_sum / static_cast<double>(ordered.size());
  d.delta_gap = d.pass1 - d.r_hat;
  d.auc = auc_curve(all, grid_steps);

  const CohortPartition parts = partition_cohorts(all);
  for (Cohort c : {Cohort::kAll, Cohort::kIncorrect, Cohort::kCorrect, Cohort::kPerfect}) {
    const auto& members = parts.get(c);
    d.cohort_sizes[c] = members.size();
    try {
      d.cohort_stats[c] = cohort_graph_stats(members);
    } catch (const Error&) {
      d.cohort_stats[c] = std::nullopt;
    }
  }
  return d;
}

int difficulty_group(double difficulty) { return static_cast<int>(std::ceil(difficulty)); }

DifficultyHistograms difficulty_histograms(std::span<const BenchRecord> records) {
  DifficultyHistograms out;
  for (const auto& r : records) {
    GroupHistograms& g = out[difficulty_group(r.difficulty)];
    ++g.n_records;
    ++g.bins["nodes"][static_cast<double>(r.stats.n_nodes)];
    ++g.bins["edges"][static_cast<double>(r.stats.n_edges)];
    ++g.bins["max_in_degree"][static_cast<double>(r.stats.max_in_degree)];
    ++g.bins["max_out_degree"][static_cast<double>(r.stats.max_out_degree)];
    // Divide by the bin count rather than multiply by the width so that edges
    // like 0.6 land on (and are keyed by) the nearest double.
    const int per_unit = static_cast<int>(std::lround(1.0 / kDensityBinWidth));
    const int bin = std::min(per_unit - 1, static_cast<int>(std::floor(r.stats.density * per_unit + 1e-9)));
    ++g.bins["density"][static_cast<double>(bin) / per_unit];
  }
  return out;
}

std::string auc_to_csv(const AucCurve& curve) {
  std::ostringstream os;
  os << "threshold,accuracy\n";
  for (std::size_t k = 0; k < curve.thresholds.size(); ++k) {
    char line[64];
    std::snprintf(line, sizeof line, "%.2f,%.6f\n", curve.thresholds[k], curve.accuracy_at[k]);
    os << line;
  }
  return os.str();
}

std::string histograms_to_csv(const DifficultyHistograms& h) {
  std::ostringstream os;
  os << "group,statistic,bin,count\n";
  for (const auto& [group, hist] : h) {
    for (const auto& [stat, bins] : hist.bins) {
      for (const auto& [bin, count] : bins) {
        os << group << ',' << stat << ',' << fmt_double(bin) << ',' << count << '\n';
      }
    }
  }
  return os.str();
}

std::string cohort_table_csv(const DatasetEval& eval) {
  std::ostringstream os;
  os << "class,count,#nodes,#edges,density,d_in_max,d_out_max\n";
  for (Cohort c : {Cohort::kAll, Cohort::kIncorrect, Cohort::kCorrect, Cohort::kPerfect}) {
    os << cohort_name(c) << ',' << eval.cohort_sizes.at(c);
    const auto& s = eval.cohort_stats.at(c);
    if (s) {
      char line[160];
      std::snprintf(line, sizeof line, ",%.1f,%.1f,%.1f%%,%.1f,%.1f", s->n_nodes, s->n_edges,
                    100.0 * s->density, s->max_in_degree, s->max_out_degree);
      os << line;
    } else {
      os << ",,,,,";
    }
    os << '\n';
  }
  return os.str();
}

json verdict_to_json(const TrajectoryVerdict& v) {
  json j{{"problem_id", v.problem_id},
         {"model_id", v.model_id},
         {"sample_index", v.sample_index},
         {"delta_close", v.delta_close},
         {"delta_final", v.delta_final},
         {"closeness_rate", v.closeness_rate()},
         {"n_unclosed", v.n_unclosed},
         {"class", std::string(cohort_class_name(v.cohort))},
         {"format_valid", v.format_valid}};
  if (v.stats) {
    j["stats"] = json{{"n_nodes", v.stats->n_nodes},
                      {"n_edges", v.stats->n_edges},
                      {"density", v.stats->density},
                      {"max_in_degree", v.stats->max_in_degree},
                      {"max_out_degree", v.stats->max_out_degree}};
  }
  return j;
}

json problem_to_json(const ProblemEval& p) {
  return json{{"problem_id", p.problem_id},
              {"n_samples", p.n_samples},
              {"prr_hat", p.prr_hat},
              {"pass1", p.pass1}};
}

json dataset_to_json(const DatasetEval& d) {
  json cohorts = json::object();
  for (const auto& [c, size] : d.cohort_sizes) {
    json entry{{"size", size}};
    const auto& s = d.cohort_stats.at(c);
    if (s) {
      entry["n_nodes"] = s->n_nodes;
      entry["n_edges"] = s->n_edges;
      entry["density"] = s->density;
      entry["max_in_degree"] = s->max_in_degree;
      entry["max_out_degree"] = s->max_out_degree;
      entry["avg_degree"] = s->avg_in_degree;
    }
    cohorts[std::string(cohort_name(c))] = entry;
  }
  return json{{"M", d.M},
              {"n_trajectories", d.n_trajectories},
              {"pass1", d.pass1},
              {"r_hat", d.r_hat},
              {"delta", d.delta_gap},
              {"auc_score", d.auc.auc_score},
              {"cohorts", cohorts}};
}

}  // namespace dagmath
