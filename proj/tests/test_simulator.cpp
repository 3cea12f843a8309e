#include <doctest.h>

#include <cmath>
#include <functional>

#include "dagmath/error.hpp"
#include "dagmath/metrics.hpp"
#include "dagmath/simulator.hpp"
#include "fixtures.hpp"
#include "generators.hpp"

using namespace dagmath;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error");
  return ErrorCode::kIoError;
}

SimTrajectory path(const TaskDag& g, std::vector<NodeId> visited) {
  SimTrajectory t;
  t.visited = std::move(visited);
  t.terminal = t.visited.back();
  t.classification = classify_sim_trajectory(g, t);
  return t;
}

// Perfect probability by plain recursion over every complete trajectory.
double perfect_mass_oracle(const TaskDag& g, const TransitionPolicy& policy, std::vector<NodeId>& visited) {
  const NodeId last = visited.empty() ? -1 : visited.back();
  if (!visited.empty() && g.is_sink(g.index_of(last))) {
    SimTrajectory t{visited, last, TrajectoryClass::kWrong};
    return classify_sim_trajectory(g, t) == TrajectoryClass::kPerfect ? 1.0 : 0.0;
  }
  const auto front = frontier(g, visited);
  double wsum = 0.0;
  for (NodeId v : front) wsum += policy.weight(v);
  double mass = 0.0;
  for (NodeId v : front) {
    visited.push_back(v);
    mass += policy.weight(v) / wsum * perfect_mass_oracle(g, policy, visited);
    visited.pop_back();
  }
  return mass;
}

TaskDag single_chain() {
  return TaskDag::create({{1, NodeKind::kSource, "s"}, {2, NodeKind::kIntermediate, "a"}, {3, NodeKind::kSink, "t"}},
                         {{1, 2}, {2, 3}}, 3);
}

}  // namespace

TEST_CASE("LCP task DAG loads") {
  const auto g = testgen::lcp_task_dag();
  CHECK(g.size() == 11);
  CHECK(g.sinks() == std::vector<NodeId>{10, 11});
  CHECK(g.sources() == std::vector<NodeId>{1, 2, 3});
  CHECK(g.correct_sink() == 10);
  CHECK(load_task_dag(save_task_dag(g)) == g);
}

TEST_CASE("frontier") {
  const auto g = testgen::lcp_task_dag();
  CHECK(frontier(g, std::vector<NodeId>{}) == std::vector<NodeId>{1, 2, 3});
  CHECK(frontier(g, std::vector<NodeId>{1, 2, 3, 4, 5}) == std::vector<NodeId>{6});
  CHECK(frontier(g, std::vector<NodeId>{1, 2, 3, 4, 5, 6, 7}) == std::vector<NodeId>{8, 9});
  CHECK(code_of([&] { frontier(g, std::vector<NodeId>{99}); }) == ErrorCode::kUnknownNode);
  const auto dist = transition_distribution(g, TransitionPolicy::weighted({{1, 2.0}}), std::vector<NodeId>{});
  REQUIRE(dist.size() == 3);
  CHECK(dist[0].second == doctest::Approx(0.5));
  CHECK(dist[1].second == doctest::Approx(0.25));
}

TEST_CASE("task DAG validation") {
  auto j = task_dag_to_json(testgen::lcp_task_dag());
  auto back_edge = j;
  back_edge["edges"].push_back({10, 4});  // closes 4 -> 8 -> 10 -> 4
  CHECK(code_of([&] { load_task_dag(back_edge.dump()); }) == ErrorCode::kCyclicInput);
  auto sink_child = j;
  sink_child["edges"].push_back({10, 9});
  CHECK(code_of([&] { load_task_dag(sink_child.dump()); }) == ErrorCode::kKindViolation);
  auto missing = j;
  missing["correct_sink"] = 9;
  CHECK(code_of([&] { load_task_dag(missing.dump()); }) == ErrorCode::kMissingCorrectSink);
  CHECK(code_of([] {
          TaskDag::create({{1, NodeKind::kSource, ""}, {2, NodeKind::kIntermediate, ""}, {3, NodeKind::kIntermediate, ""},
                           {4, NodeKind::kSink, ""}},
                          {{1, 2}, {2, 3}, {3, 2}, {3, 4}}, 4);
        }) == ErrorCode::kCyclicInput);
  CHECK(code_of([] { TaskDag::create({{1, NodeKind::kSource, ""}, {2, NodeKind::kIntermediate, ""}}, {{1, 2}}, 2); }) ==
        ErrorCode::kKindViolation);
  CHECK(code_of([] { TransitionPolicy::weighted({{1, 0.0}}); }) == ErrorCode::kConfigError);
}

TEST_CASE("LCP trajectory variants classify") {
  const auto g = testgen::lcp_task_dag();
  CHECK(path(g, {1, 2, 3, 4, 5, 6, 7, 8, 10}).classification == TrajectoryClass::kPerfect);
  CHECK(path(g, {1, 2, 3, 4, 5, 6, 7, 9, 8, 10}).classification == TrajectoryClass::kImperfect);
  CHECK(path(g, {1, 2, 3, 6, 7, 9, 11}).classification == TrajectoryClass::kWrong);
  SimTrajectory open{{1, 2}, std::nullopt, TrajectoryClass::kWrong};
  CHECK(code_of([&] { classify_sim_trajectory(g, open); }) == ErrorCode::kNonTerminatedTrajectory);
}

TEST_CASE("near-zero weights force the perfect path") {
  const auto g = testgen::lcp_task_dag();
  const auto policy = TransitionPolicy::weighted({{9, 1e-12}, {11, 1e-12}});
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto t = sample_trajectory(g, policy, seed);
    CHECK(t.classification == TrajectoryClass::kPerfect);
    CHECK(t.terminal == 10);
  }
  CHECK(exhaustive_prr(g, policy).value == doctest::Approx(1.0));
}

TEST_CASE("sampling is deterministic in the seed") {
  const auto g = testgen::lcp_task_dag();
  const auto a = sample_trajectory(g, TransitionPolicy::uniform(), 42);
  const auto b = sample_trajectory(g, TransitionPolicy::uniform(), 42);
  CHECK(a.visited == b.visited);
  CHECK(a.classification == b.classification);
  const auto m1 = monte_carlo_prr(g, TransitionPolicy::uniform(), 5000, 9);
  const auto m2 = monte_carlo_prr(g, TransitionPolicy::uniform(), 5000, 9);
  CHECK(m1.value == m2.value);
  CHECK(code_of([&] { monte_carlo_prr(g, TransitionPolicy::uniform(), 0, 1); }) == ErrorCode::kInvalidLength);
}

TEST_CASE("two-chain toy") {
  const auto g3 = make_two_chain(3);
  CHECK(g3.size() == 7);
  CHECK(g3.edges().size() == 6);
  CHECK(g3.correct_sink() == 3);
  CHECK(exhaustive_prr(make_two_chain(1), TransitionPolicy::uniform()).value == 0.5);
  for (int L = 1; L <= 8; ++L) {
    const auto e = exhaustive_prr(make_two_chain(L), TransitionPolicy::uniform());
    CHECK(e.value == doctest::Approx(std::pow(0.5, L)).epsilon(1e-12));
    CHECK(e.breakdown.perfect + e.breakdown.imperfect + e.breakdown.wrong == doctest::Approx(1.0));
  }
  CHECK(code_of([] { make_two_chain(0); }) == ErrorCode::kInvalidLength);
  CHECK(exhaustive_prr(single_chain(), TransitionPolicy::uniform()).value == 1.0);
}

TEST_CASE("exhaustive matches recursive oracle on random DAGs") {
  testgen::Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const auto g = testgen::random_task_dag(rng, {.max_nodes = 9});
    std::map<NodeId, double> w;
    for (const auto& n : g.nodes()) w[n.id] = 0.5 + static_cast<double>(rng() % 100) / 25.0;
    for (const auto& policy : {TransitionPolicy::uniform(), TransitionPolicy::weighted(w)}) {
      std::vector<NodeId> visited;
      const double oracle = perfect_mass_oracle(g, policy, visited);
      CHECK(exhaustive_prr(g, policy).value == doctest::Approx(oracle).epsilon(1e-9));
    }
  }
}

TEST_CASE("visited sets stay downward closed") {
  testgen::Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    const auto g = testgen::random_task_dag(rng);
    const auto t = sample_trajectory(g, TransitionPolicy::uniform(), rng());
    std::vector<char> seen(g.size(), 0);
    for (NodeId v : t.visited) {
      const auto idx = g.index_of(v);
      for (auto p : g.parents(idx)) CHECK(seen[p]);
      CHECK_FALSE(seen[idx]);
      seen[idx] = 1;
    }
    REQUIRE(t.terminal);
    CHECK(g.is_sink(g.index_of(*t.terminal)));
    // Exactly one sink reached, and it is the last node.
    for (std::size_t k = 0; k + 1 < t.visited.size(); ++k) CHECK_FALSE(g.is_sink(g.index_of(t.visited[k])));
  }
}

TEST_CASE("state budget") {
  CHECK(code_of([] { exhaustive_prr(make_two_chain(8), TransitionPolicy::uniform(), 10); }) == ErrorCode::kBudgetExceeded);
  CHECK(code_of([] { exhaustive_prr(make_two_chain(40), TransitionPolicy::uniform()); }) == ErrorCode::kBudgetExceeded);
}

TEST_CASE("induced trajectory agrees with the metrics pipeline") {
  testgen::Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto g = testgen::random_task_dag(rng);
    const auto sim = sample_trajectory(g, TransitionPolicy::uniform(), rng());
    const auto t = induced_trajectory(g, sim, {"p", "sim", i});
    CHECK(validate_format(t, {.strict_citations = true}).size() ==
          validate_format(t).size());
    const auto v = judge_trajectory(t, normalize_answer(std::to_string(g.correct_sink())));
    CHECK((v.delta_close * v.delta_final == 1) == (sim.classification == TrajectoryClass::kPerfect));
  }
}
