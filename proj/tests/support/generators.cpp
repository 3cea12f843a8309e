#include "generators.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace testgen {

using dagmath::NodeKind;
using dagmath::RuleCode;
using dagmath::Step;
using dagmath::StepId;
using dagmath::Trajectory;

namespace {

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::vector<int> pick_distinct(Rng& rng, int k, int below) {
  std::vector<int> all(static_cast<std::size_t>(below));
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(k));
  return all;
}

void set_parents(Step& s, std::vector<StepId> parents) {
  if (parents.empty()) {
    s.direct_dependent_steps.reset();
  } else {
    s.direct_dependent_steps = std::move(parents);
  }
  s.edge = edge_text(s.direct_dependent_steps.value_or(std::vector<StepId>{}));
}

}  // namespace

std::string edge_text(const std::vector<StepId>& parents) {
  if (parents.empty()) return "Given in the problem statement.";
  std::string out = "Combine";
  for (std::size_t i = 0; i < parents.size(); ++i) out += (i ? ", Step " : " Step ") + std::to_string(parents[i]);
  return out + ".";
}

Trajectory random_trajectory(Rng& rng, const TrajectoryShape& shape, const std::string& answer) {
  const int n = uniform(rng, std::max(2, shape.min_steps), std::max(2, shape.max_steps));
  std::vector<StepId> ids;
  StepId id = 1;
  for (int i = 0; i < n; ++i) {
    id += uniform(rng, 1, 3);
    ids.push_back(id);
  }
  const int n_sources = uniform(rng, 1, std::min(3, n - 1));
  std::vector<std::set<StepId>> parents(static_cast<std::size_t>(n));
  for (int i = n_sources; i < n; ++i) {
    const int k = uniform(rng, 1, std::min(shape.max_parents, i));
    for (int p : pick_distinct(rng, k, i)) parents[static_cast<std::size_t>(i)].insert(ids[static_cast<std::size_t>(p)]);
  }
  if (shape.closed) {
    std::set<StepId> cited;
    for (const auto& ps : parents) cited.insert(ps.begin(), ps.end());
    for (int i = 0; i + 1 < n; ++i) {
      if (cited.count(ids[static_cast<std::size_t>(i)])) continue;
      const int j = uniform(rng, std::max(i + 1, n_sources), n - 1);
      parents[static_cast<std::size_t>(j)].insert(ids[static_cast<std::size_t>(i)]);
    }
  }
  Trajectory t;
  t.problem_id = "gen";
  for (int i = 0; i < n; ++i) {
    Step s;
    s.step_id = ids[static_cast<std::size_t>(i)];
    set_parents(s, {parents[static_cast<std::size_t>(i)].begin(), parents[static_cast<std::size_t>(i)].end()});
    s.node = "Quantity $q_{" + std::to_string(s.step_id) + "}$ is determined.";
    t.steps.push_back(std::move(s));
  }
  t.steps.back().node = "The final answer is $\\boxed{" + answer + "}$.";
  return t;
}

std::optional<Trajectory> mutate(const Trajectory& t, RuleCode rule, Rng& rng) {
  Trajectory m = t;
  auto& steps = m.steps;
  const int n = static_cast<int>(steps.size());
  std::set<StepId> ids;
  for (const auto& s : steps) ids.insert(s.step_id);

  switch (rule) {
    case RuleCode::kDuplicateId: {
      if (n < 2) return std::nullopt;
      const int i = uniform(rng, 0, n - 2);
      steps.insert(steps.begin() + i + 1, steps[static_cast<std::size_t>(i)]);
      return m;
    }
    case RuleCode::kNonIncreasingId: {
      if (n < 3) return std::nullopt;
      const int i = uniform(rng, 0, n - 3);
      std::swap(steps[static_cast<std::size_t>(i)], steps[static_cast<std::size_t>(i + 1)]);
      return m;
    }
    case RuleCode::kFutureDependency: {
      if (n < 2) return std::nullopt;
      const int i = uniform(rng, 0, n - 2);
      const int j = uniform(rng, i + 1, n - 1);
      auto ps = steps[static_cast<std::size_t>(i)].direct_dependent_steps.value_or(std::vector<StepId>{});
      ps.push_back(steps[static_cast<std::size_t>(j)].step_id);
      set_parents(steps[static_cast<std::size_t>(i)], ps);
      return m;
    }
    case RuleCode::kDanglingParent: {
      std::vector<std::pair<int, StepId>> sites;
      for (int i = 0; i < n; ++i) {
        for (StepId g = 1; g < steps[static_cast<std::size_t>(i)].step_id; ++g) {
          if (!ids.count(g)) sites.emplace_back(i, g);
        }
      }
      if (sites.empty()) return std::nullopt;
      const auto [i, g] = sites[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(sites.size()) - 1))];
      auto ps = steps[static_cast<std::size_t>(i)].direct_dependent_steps.value_or(std::vector<StepId>{});
      ps.insert(std::lower_bound(ps.begin(), ps.end(), g), g);
      set_parents(steps[static_cast<std::size_t>(i)], ps);
      return m;
    }
    case RuleCode::kUnsortedParents: {
      std::vector<int> sites;
      for (int i = 0; i < n; ++i) {
        if (steps[static_cast<std::size_t>(i)].direct_dependent_steps) sites.push_back(i);
      }
      if (sites.empty()) return std::nullopt;
      auto& s = steps[static_cast<std::size_t>(sites[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(sites.size()) - 1))])];
      auto ps = *s.direct_dependent_steps;
      if (ps.size() >= 2) {
        const int k = uniform(rng, 0, static_cast<int>(ps.size()) - 2);
        std::swap(ps[static_cast<std::size_t>(k)], ps[static_cast<std::size_t>(k + 1)]);
      } else {
        ps.push_back(ps.front());
      }
      s.direct_dependent_steps = ps;
      return m;
    }
    case RuleCode::kMissingBoxedFinal:
      steps.back().node = "The final answer is 42.";
      return m;
    case RuleCode::kUnclosedNonfinalStep: {
      std::map<StepId, std::vector<int>> citers;
      for (int i = 0; i < n; ++i) {
        for (StepId p : steps[static_cast<std::size_t>(i)].direct_dependent_steps.value_or(std::vector<StepId>{})) {
          citers[p].push_back(i);
        }
      }
      std::vector<std::pair<StepId, int>> sites;
      for (int i = 0; i + 1 < n; ++i) {
        const StepId id = steps[static_cast<std::size_t>(i)].step_id;
        if (citers[id].size() == 1) sites.emplace_back(id, citers[id].front());
      }
      if (sites.empty()) return std::nullopt;
      const auto [id, citer] = sites[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(sites.size()) - 1))];
      auto ps = *steps[static_cast<std::size_t>(citer)].direct_dependent_steps;
      ps.erase(std::find(ps.begin(), ps.end(), id));
      set_parents(steps[static_cast<std::size_t>(citer)], ps);
      return m;
    }
    default:
      return std::nullopt;
  }
}

dagmath::TaskDag random_task_dag(Rng& rng, const TaskDagShape& shape) {
  const int n = uniform(rng, 3, std::max(3, shape.max_nodes));
  const int n_src = uniform(rng, 1, std::min(3, n - 2));
  const int n_sink = uniform(rng, 1, std::min(3, n - n_src));
  const int n_inner = n - n_src - n_sink;
  const int n_feed = n_src + n_inner;  // nodes that may feed a sink

  std::set<std::pair<int, int>> edges;
  for (int i = n_src; i < n_feed; ++i) {
    for (int p : pick_distinct(rng, uniform(rng, 1, std::min(3, i)), i)) edges.emplace(p, i);
  }
  for (int i = n_feed; i < n; ++i) {
    for (int p : pick_distinct(rng, uniform(rng, 1, std::min(3, n_feed)), n_feed)) edges.emplace(p, i);
  }
  std::vector<int> out_deg(static_cast<std::size_t>(n), 0);
  for (const auto& [p, c] : edges) ++out_deg[static_cast<std::size_t>(p)];
  for (int i = 0; i < n_feed; ++i) {
    if (out_deg[static_cast<std::size_t>(i)] == 0) edges.emplace(i, uniform(rng, n_feed, n - 1));
  }

  std::vector<dagmath::NodeId> id_of(1000);
  std::iota(id_of.begin(), id_of.end(), 1);
  std::shuffle(id_of.begin(), id_of.end(), rng);
  id_of.resize(static_cast<std::size_t>(n));

  std::vector<dagmath::TaskNode> nodes;
  for (int i = 0; i < n; ++i) {
    const NodeKind kind = i < n_src ? NodeKind::kSource : i < n_feed ? NodeKind::kIntermediate : NodeKind::kSink;
    nodes.push_back({id_of[static_cast<std::size_t>(i)], kind, "n" + std::to_string(i), 1.0});
  }
  std::vector<dagmath::TaskDag::Edge> id_edges;
  for (const auto& [p, c] : edges) id_edges.emplace_back(id_of[static_cast<std::size_t>(p)], id_of[static_cast<std::size_t>(c)]);
  const int correct = uniform(rng, n_feed, n - 1);
  return dagmath::TaskDag::create(std::move(nodes), std::move(id_edges), id_of[static_cast<std::size_t>(correct)]);
}

}  // namespace testgen
