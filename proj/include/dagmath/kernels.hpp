#pragma once

// Data-parallel hot loops. Each OpenMP kernel has a serial twin used as the
// reference in tests and benchmarks; both must produce identical results.

#include <cstdint>
#include <span>
#include <vector>

#include "dagmath/metrics.hpp"
#include "dagmath/simulator.hpp"

namespace dagmath {

struct SimCounts {
  std::size_t n = 0;
  std::size_t perfect = 0;
  std::size_t imperfect = 0;
  std::size_t wrong = 0;

  bool operator==(const SimCounts&) const = default;
};

namespace kernels {

// Outcome counts over trajectories 0..n-1 seeded by detail::stream_seed.
SimCounts monte_carlo_counts_serial(const TaskDag& g, const TransitionPolicy& policy, std::size_t n,
                                    std::uint64_t seed);
SimCounts monte_carlo_counts_omp(const TaskDag& g, const TransitionPolicy& policy, std::size_t n,
                                 std::uint64_t seed);

PrrEstimate estimate_from_counts(const SimCounts& counts);

// evaluate_sample over a batch, output in input order. `threads` <= 0 means
// the OpenMP default.
std::vector<TrajectoryVerdict> evaluate_samples_serial(std::span<const EvalSample> samples,
                                                       const AnswerJudge& judge = {});
std::vector<TrajectoryVerdict> evaluate_samples_omp(std::span<const EvalSample> samples,
                                                    const AnswerJudge& judge = {}, int threads = 0);

}  // namespace kernels
}  // namespace dagmath
