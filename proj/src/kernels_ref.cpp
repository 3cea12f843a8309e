#include <cmath>

#include "dagmath/error.hpp"
#include "dagmath/kernels.hpp"

namespace dagmath::kernels {

SimCounts monte_carlo_counts_serial(const TaskDag& g, const TransitionPolicy& policy, std::size_t n,
                                    std::uint64_t seed) {
  const auto weights = detail::resolve_weights(g, policy);
  detail::SamplerScratch scratch;
  SimCounts counts;
  counts.n = n;
  for (std::size_t i = 0; i < n; ++i) {
    switch (detail::sample_indices(g, weights, detail::stream_seed(seed, i), scratch, nullptr)) {
      case TrajectoryClass::kPerfect: ++counts.perfect; break;
      case TrajectoryClass::kImperfect: ++counts.imperfect; break;
      case TrajectoryClass::kWrong: ++counts.wrong; break;
    }
  }
  return counts;
}

PrrEstimate estimate_from_counts(const SimCounts& counts) {
  if (counts.n == 0) throw Error(ErrorCode::kInvalidLength, "no samples");
  PrrEstimate est;
  est.method = PrrEstimate::Method::kMonteCarlo;
  est.n_samples = counts.n;
  const double n = static_cast<double>(counts.n);
  est.breakdown.perfect = static_cast<double>(counts.perfect) / n;
  est.breakdown.imperfect = static_cast<double>(counts.imperfect) / n;
  est.breakdown.wrong = static_cast<double>(counts.wrong) / n;
  est.value = est.breakdown.perfect;
  est.std_error = std::sqrt(est.value * (1.0 - est.value) / n);
  return est;
}

std::vector<TrajectoryVerdict> evaluate_samples_serial(std::span<const EvalSample> samples,
                                                       const AnswerJudge& judge) {
  std::vector<TrajectoryVerdict> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(evaluate_sample(s, judge));
  return out;
}

}  // namespace dagmath::kernels
