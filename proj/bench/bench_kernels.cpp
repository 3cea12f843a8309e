// Serial reference kernels against their OpenMP versions.

#include <benchmark/benchmark.h>

#include <random>

#include "dagmath/kernels.hpp"

namespace {

using namespace dagmath;

void BM_MonteCarloSerial(benchmark::State& state) {
  const auto g = make_two_chain(static_cast<int>(state.range(0)));
  const auto policy = TransitionPolicy::uniform();
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::monte_carlo_counts_serial(g, policy, 100000, 7));
  }
  state.SetItemsProcessed(state.iterations() * 100000);
}

void BM_MonteCarloOmp(benchmark::State& state) {
  const auto g = make_two_chain(static_cast<int>(state.range(0)));
  const auto policy = TransitionPolicy::uniform();
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::monte_carlo_counts_omp(g, policy, 100000, 7));
  }
  state.SetItemsProcessed(state.iterations() * 100000);
}

// A corpus of layered trajectories, 30 steps each, every step citing the one
// before it and a random earlier one.
std::vector<EvalSample> synthetic_samples(std::size_t count) {
  std::mt19937_64 rng(11);
  std::vector<EvalSample> out;
  for (std::size_t i = 0; i < count; ++i) {
    Trajectory t;
    t.problem_id = "p" + std::to_string(i % 50);
    t.sample_index = static_cast<std::int64_t>(i / 50);
    for (StepId s = 1; s <= 30; ++s) {
      Step step{s, "Step " + std::to_string(s - 1), std::nullopt, "x = " + std::to_string(s)};
      if (s > 1) {
        std::vector<StepId> parents{s - 1};
        if (s > 2) {
          const StepId extra = 1 + static_cast<StepId>(rng() % static_cast<std::uint64_t>(s - 2));
          if (extra != s - 1) parents.insert(parents.begin(), extra);
        }
        step.direct_dependent_steps = parents;
      }
      t.steps.push_back(std::move(step));
    }
    t.steps.back().node = "The final answer is $\\boxed{" + std::to_string(rng() % 3) + "}$.";
    out.push_back({t.meta(), t, normalize_answer("1")});
  }
  return out;
}

void BM_EvaluateSerial(benchmark::State& state) {
  const auto samples = synthetic_samples(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::evaluate_samples_serial(samples));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EvaluateOmp(benchmark::State& state) {
  const auto samples = synthetic_samples(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::evaluate_samples_omp(samples));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_MonteCarloSerial)->Arg(4)->Arg(8);
BENCHMARK(BM_MonteCarloOmp)->Arg(4)->Arg(8);
BENCHMARK(BM_EvaluateSerial)->Arg(2000);
BENCHMARK(BM_EvaluateOmp)->Arg(2000);

BENCHMARK_MAIN();
