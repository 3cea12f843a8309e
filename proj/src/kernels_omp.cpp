#include <omp.h>

#include <exception>
#include <mutex>

#include "dagmath/kernels.hpp"

namespace dagmath::kernels {
namespace {

// Exceptions must not escape an OpenMP region; keep the first and rethrow.
class FirstError {
 public:
  void capture() {
    std::lock_guard lock(mu_);
    if (!error_) error_ = std::current_exception();
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr error_;
};

}  // namespace

SimCounts monte_carlo_counts_omp(const TaskDag& g, const TransitionPolicy& policy, std::size_t n,
                                 std::uint64_t seed) {
  const auto weights = detail::resolve_weights(g, policy);
  const auto total = static_cast<std::int64_t>(n);
  std::size_t perfect = 0, imperfect = 0, wrong = 0;
  FirstError failure;
#pragma omp parallel reduction(+ : perfect, imperfect, wrong)
  {
    detail::SamplerScratch scratch;
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < total; ++i) {
      try {
        const auto cls = detail::sample_indices(g, weights, detail::stream_seed(seed, static_cast<std::uint64_t>(i)),
                                                scratch, nullptr);
        if (cls == TrajectoryClass::kPerfect) {
          ++perfect;
        } else if (cls == TrajectoryClass::kImperfect) {
          ++imperfect;
        } else {
          ++wrong;
        }
      } catch (...) {
        failure.capture();
      }
    }
  }
  failure.rethrow();
  return SimCounts{n, perfect, imperfect, wrong};
}

std::vector<TrajectoryVerdict> evaluate_samples_omp(std::span<const EvalSample> samples,
                                                    const AnswerJudge& judge, int threads) {
  std::vector<TrajectoryVerdict> out(samples.size());
  const auto total = static_cast<std::int64_t>(samples.size());
  const int team = threads > 0 ? threads : omp_get_max_threads();
  FirstError failure;
#pragma omp parallel for schedule(dynamic, 16) num_threads(team)
  for (std::int64_t i = 0; i < total; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = evaluate_sample(samples[static_cast<std::size_t>(i)], judge);
    } catch (...) {
      failure.capture();
    }
  }
  failure.rethrow();
  return out;
}

}  // namespace dagmath::kernels
