#pragma once

// Per-trajectory verdicts and their aggregates: PRR-hat, PASS@k, the dataset
// reasoning ability R-hat, the closeness-threshold AUC curve, cohorts and
// graph-statistic summaries.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dagmath/answer.hpp"
#include "dagmath/dag.hpp"
#include "dagmath/format.hpp"

namespace dagmath {

enum class CohortClass { kIncorrect, kCorrect, kPerfect };
enum class Cohort { kAll, kIncorrect, kCorrect, kPerfect };

std::string_view cohort_class_name(CohortClass c);
std::string_view cohort_name(Cohort c);

struct TrajectoryVerdict {
  std::string problem_id;
  std::string model_id;
  std::int64_t sample_index = 0;
  int delta_close = 0;
  int delta_final = 0;
  Closeness closeness{0, 1};
  std::size_t n_unclosed = 0;
  CohortClass cohort = CohortClass::kIncorrect;
  // Absent when the dependency graph could not be built (F01..F05 or no
  // parseable trajectory at all).
  std::optional<GraphStats> stats;
  bool format_valid = true;

  double closeness_rate() const { return closeness.rate(); }
};

struct ProblemEval {
  std::string problem_id;
  std::size_t n_samples = 0;
  double prr_hat = 0.0;
  double pass1 = 0.0;
  std::vector<TrajectoryVerdict> verdicts;
};

struct AucCurve {
  std::vector<double> thresholds;
  std::vector<double> accuracy_at;
  double auc_score = 0.0;
};

// Field-wise means; every field is a double.
struct AveragedGraphStats {
  std::size_t count = 0;
  double n_nodes = 0.0;
  double n_edges = 0.0;
  double density = 0.0;
  double max_in_degree = 0.0;
  double max_out_degree = 0.0;
  double avg_in_degree = 0.0;
  double avg_out_degree = 0.0;
};

struct DatasetEval {
  std::size_t M = 0;
  std::size_t n_trajectories = 0;
  double r_hat = 0.0;
  double pass1 = 0.0;
  double delta_gap = 0.0;
  AucCurve auc;
  std::map<Cohort, std::size_t> cohort_sizes;
  // nullopt for an empty cohort.
  std::map<Cohort, std::optional<AveragedGraphStats>> cohort_stats;
};

// Optional override for final-answer equivalence (symbolic engines, LLM
// judges). Returning nullopt falls back to the exact comparator. Must be safe
// to call concurrently.
using AnswerJudge = std::function<std::optional<bool>(const Answer& candidate, const Answer& truth)>;

// 1 iff the exact rationals agree, or (both non-numeric) canonical texts agree.
int judge_final(const Answer& candidate, const Answer& truth, const AnswerJudge& judge = {});

// Throws kInvalidFormat on any error-severity diagnostic.
TrajectoryVerdict judge_trajectory(const Trajectory& t, const Answer& truth,
                                   const AnswerJudge& judge = {});

// One evaluation input. `trajectory` is absent when the completion could not
// be parsed at all.
struct EvalSample {
  TrajectoryMeta meta;
  std::optional<Trajectory> trajectory;
  Answer truth;
};

// Never throws on bad trajectories: format-invalid samples get delta_close = 0
// and, when a boxed answer is still extractable, a judged delta_final.
TrajectoryVerdict evaluate_sample(const EvalSample& sample, const AnswerJudge& judge = {});

// Mean of delta_close * delta_final. Throws kEmptySampleSet.
double prr_hat(std::span<const TrajectoryVerdict> verdicts);

// Unbiased pass@k: 1 - C(N-c, k) / C(N, k). Throws kKOutOfRange.
double pass_at_k(std::size_t n, std::size_t c, std::size_t k);
double pass_at_k(std::span<const TrajectoryVerdict> verdicts, std::size_t k);

ProblemEval evaluate_problem(std::string problem_id, std::vector<TrajectoryVerdict> verdicts);

// Groups by problem_id (sorted), samples sorted by sample_index.
std::vector<ProblemEval> group_by_problem(std::vector<TrajectoryVerdict> verdicts);

// Macro-averages over problems. Throws kEmptyDataset.
DatasetEval dataset_ability(const std::vector<ProblemEval>& problems, std::size_t grid_steps = 100);

// accuracy_at(tau) = mean over problems of the per-problem fraction of samples
// with closeness >= tau and delta_final = 1, for tau = k / grid_steps.
// Comparisons are exact (integer cross-multiplication).
AucCurve auc_curve(std::span<const TrajectoryVerdict> verdicts, std::size_t grid_steps = 100);

struct CohortPartition {
  std::vector<TrajectoryVerdict> all;
  std::vector<TrajectoryVerdict> incorrect;
  std::vector<TrajectoryVerdict> correct;  // includes perfect
  std::vector<TrajectoryVerdict> perfect;

  const std::vector<TrajectoryVerdict>& get(Cohort c) const;
};

CohortPartition partition_cohorts(std::span<const TrajectoryVerdict> verdicts);

// Per-graph statistics averaged (density is averaged, not recomputed).
// Verdicts without stats are skipped. Throws kEmptyCohort.
AveragedGraphStats cohort_graph_stats(std::span<const TrajectoryVerdict> cohort);

// Difficulty group k holds difficulties in (k-1, k].
int difficulty_group(double difficulty);

struct BenchRecord {
  std::string problem_id;
  double difficulty = 0.0;
  GraphStats stats;
};

struct GroupHistograms {
  std::size_t n_records = 0;
  // statistic -> bin lower edge -> count. Integer statistics use unit bins;
  // density uses bins of width kDensityBinWidth.
  std::map<std::string, std::map<double, std::size_t>> bins;
};

inline constexpr double kDensityBinWidth = 0.05;

using DifficultyHistograms = std::map<int, GroupHistograms>;

DifficultyHistograms difficulty_histograms(std::span<const BenchRecord> records);

// CSV emitters for external plotting.
std::string auc_to_csv(const AucCurve& curve);                 // threshold,accuracy
std::string histograms_to_csv(const DifficultyHistograms& h);  // group,statistic,bin,count
std::string cohort_table_csv(const DatasetEval& eval);         // class,#nodes,#edges,density,d_in_max,d_out_max

nlohmann::json verdict_to_json(const TrajectoryVerdict& v);
nlohmann::json problem_to_json(const ProblemEval& p);
nlohmann::json dataset_to_json(const DatasetEval& d);

}  // namespace dagmath
