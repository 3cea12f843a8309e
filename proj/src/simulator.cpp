#include "dagmath/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <set>
#include <unordered_map>

#include "dagmath/dag.hpp"
#include "dagmath/error.hpp"
#include "dagmath/kernels.hpp"

namespace dagmath {
namespace {

using nlohmann::json;

NodeKind parse_kind(const std::string& s) {
  if (s == "source") return NodeKind::kSource;
  if (s == "intermediate") return NodeKind::kIntermediate;
  if (s == "sink") return NodeKind::kSink;
  throw Error(ErrorCode::kKindViolation, "unknown node kind \"" + s + "\"");
}

double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::string_view node_kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::kSource: return "source";
    case NodeKind::kIntermediate: return "intermediate";
    case NodeKind::kSink: return "sink";
  }
  return "?";
}

std::string_view trajectory_class_name(TrajectoryClass c) {
  switch (c) {
    case TrajectoryClass::kPerfect: return "perfect";
    case TrajectoryClass::kImperfect: return "imperfect";
    case TrajectoryClass::kWrong: return "wrong";
  }
  return "?";
}

TaskDag TaskDag::create(std::vector<TaskNode> nodes, std::vector<Edge> edges, NodeId correct_sink) {
  TaskDag g;
  std::sort(nodes.begin(), nodes.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!g.index_.emplace(nodes[i].id, i).second) {
      throw Error(ErrorCode::kKindViolation, "duplicate node id " + std::to_string(nodes[i].id));
    }
    if (!(nodes[i].weight > 0.0) || !std::isfinite(nodes[i].weight)) {
      throw Error(ErrorCode::kKindViolation, "node " + std::to_string(nodes[i].id) + " has a non-positive weight");
    }
  }
  if (nodes.empty()) throw Error(ErrorCode::kKindViolation, "task DAG has no nodes");

  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  for (const auto& [p, c] : edges) {
    if (!g.index_.count(p) || !g.index_.count(c)) {
      throw Error(ErrorCode::kKindViolation,
                  "edge " + std::to_string(p) + "->" + std::to_string(c) + " names an unknown node");
    }
  }
  std::vector<std::int64_t> ids;
  for (const auto& n : nodes) ids.push_back(n.id);
  if (!check_acyclic(ids, edges)) throw Error(ErrorCode::kCyclicInput, "task graph has a cycle");

  g.nodes_ = std::move(nodes);
  g.edges_ = std::move(edges);
  g.parents_.assign(g.nodes_.size(), {});
  g.children_.assign(g.nodes_.size(), {});
  for (const auto& [p, c] : g.edges_) {
    g.children_[g.index_.at(p)].push_back(g.index_.at(c));
    g.parents_[g.index_.at(c)].push_back(g.index_.at(p));
  }

  bool any_sink = false;
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
    const auto& n = g.nodes_[i];
    const std::string who = "node " + std::to_string(n.id);
    const bool has_parents = !g.parents_[i].empty();
    const bool has_children = !g.children_[i].empty();
    switch (n.kind) {
      case NodeKind::kSource:
        if (has_parents) throw Error(ErrorCode::kKindViolation, who + " is a source with parents");
        break;
      case NodeKind::kSink:
        if (has_children) throw Error(ErrorCode::kKindViolation, who + " is a sink with children");
        if (!has_parents) throw Error(ErrorCode::kKindViolation, who + " is a sink without parents");
        any_sink = true;
        break;
      case NodeKind::kIntermediate:
        if (!has_parents) throw Error(ErrorCode::kKindViolation, who + " has no parents but is not a source");
        break;
    }
    if (n.kind != NodeKind::kSink && !has_children) {
      throw Error(ErrorCode::kKindViolation, who + " is a dead end but not a sink");
    }
  }
  if (!any_sink) throw Error(ErrorCode::kKindViolation, "task DAG has no sink");

  auto it = g.index_.find(correct_sink);
  if (it == g.index_.end() || g.nodes_[it->second].kind != NodeKind::kSink) {
    throw Error(ErrorCode::kMissingCorrectSink,
                "correct sink " + std::to_string(correct_sink) + " is not a sink of the DAG");
  }
  g.correct_sink_ = correct_sink;
  g.correct_index_ = it->second;

  g.perfect_support_.assign(g.nodes_.size(), 0);
  std::vector<std::size_t> stack{g.correct_index_};
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    if (g.perfect_support_[v]) continue;
    g.perfect_support_[v] = 1;
    for (std::size_t p : g.parents_[v]) stack.push_back(p);
  }
  return g;
}

std::size_t TaskDag::index_of(NodeId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::kUnknownNode, "task node " + std::to_string(id));
  return it->second;
}

std::vector<NodeId> TaskDag::sources() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_) {
    if (n.kind == NodeKind::kSource) out.push_back(n.id);
  }
  return out;
}

std::vector<NodeId> TaskDag::sinks() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_) {
    if (n.kind == NodeKind::kSink) out.push_back(n.id);
  }
  return out;
}

TransitionPolicy TransitionPolicy::weighted(std::map<NodeId, double> w) {
  for (const auto& [id, value] : w) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw Error(ErrorCode::kConfigError, "weight for node " + std::to_string(id) + " must be positive");
    }
  }
  TransitionPolicy p;
  p.kind = Kind::kWeighted;
  p.weights = std::move(w);
  return p;
}

TransitionPolicy TransitionPolicy::from_node_weights(const TaskDag& g) {
  std::map<NodeId, double> w;
  for (const auto& n : g.nodes()) w[n.id] = n.weight;
  return weighted(std::move(w));
}

double TransitionPolicy::weight(NodeId id) const {
  if (kind == Kind::kUniform) return 1.0;
  auto it = weights.find(id);
  return it == weights.end() ? 1.0 : it->second;
}

std::vector<NodeId> frontier(const TaskDag& g, std::span<const NodeId> visited) {
  std::vector<char> seen(g.size(), 0);
  for (NodeId id : visited) seen[g.index_of(id)] = 1;
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (seen[i]) continue;
    const auto& pa = g.parents(i);
    if (std::all_of(pa.begin(), pa.end(), [&](std::size_t p) { return seen[p] != 0; })) {
      out.push_back(g.id_at(i));
    }
  }
  return out;
}

std::vector<std::pair<NodeId, double>> transition_distribution(const TaskDag& g,
                                                               const TransitionPolicy& policy,
                                                               std::span<const NodeId> visited) {
  const auto open = frontier(g, visited);
  double total = 0.0;
  for (NodeId id : open) total += policy.weight(id);
  std::vector<std::pair<NodeId, double>> out;
  out.reserve(open.size());
  for (NodeId id : open) out.emplace_back(id, policy.weight(id) / total);
  return out;
}

namespace detail {

std::uint64_t stream_seed(std::uint64_t root, std::uint64_t index) {
  // splitmix64 finalizer over (root, counter)
  std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<double> resolve_weights(const TaskDag& g, const TransitionPolicy& policy) {
  std::vector<double> w(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) w[i] = policy.weight(g.id_at(i));
  return w;
}

TrajectoryClass sample_indices(const TaskDag& g, std::span<const double> weights, std::uint64_t seed,
                               SamplerScratch& s, std::vector<std::size_t>* path) {
  const std::size_t n = g.size();
  s.missing_parents.resize(n);
  s.visited.assign(n, 0);
  s.frontier.clear();
  for (std::size_t i = 0; i < n; ++i) {
    s.missing_parents[i] = static_cast<std::uint32_t>(g.parents(i).size());
    if (s.missing_parents[i] == 0) s.frontier.push_back(i);
  }
  std::mt19937_64 rng(seed);
  for (;;) {
    if (s.frontier.empty()) {
      throw Error(ErrorCode::kStuckState, "empty frontier before reaching a sink");
    }
    double total = 0.0;
    for (std::size_t i : s.frontier) total += weights[i];
    double u = unit_draw(rng) * total;
    std::size_t pick = s.frontier.size() - 1;
    for (std::size_t k = 0; k < s.frontier.size(); ++k) {
      u -= weights[s.frontier[k]];
      if (u < 0.0) {
        pick = k;
        break;
      }
    }
    const std::size_t v = s.frontier[pick];
    s.frontier.erase(s.frontier.begin() + static_cast<std::ptrdiff_t>(pick));
    s.visited[v] = 1;
    if (path) path->push_back(v);
    if (g.is_sink(v)) {
      if (v != g.correct_sink_index()) return TrajectoryClass::kWrong;
      const auto& support = g.perfect_support();
      for (std::size_t i = 0; i < n; ++i) {
        if (s.visited[i] && !support[i]) return TrajectoryClass::kImperfect;
      }
      return TrajectoryClass::kPerfect;
    }
    for (std::size_t c : g.children(v)) {
      if (--s.missing_parents[c] == 0) {
        s.frontier.insert(std::lower_bound(s.frontier.begin(), s.frontier.end(), c), c);
      }
    }
  }
}

}  // namespace detail

SimTrajectory sample_trajectory(const TaskDag& g, const TransitionPolicy& policy, std::uint64_t seed) {
  const auto weights = detail::resolve_weights(g, policy);
  detail::SamplerScratch scratch;
  std::vector<std::size_t> path;
  SimTrajectory t;
  t.classification = detail::sample_indices(g, weights, seed, scratch, &path);
  t.visited.reserve(path.size());
  for (std::size_t i : path) t.visited.push_back(g.id_at(i));
  t.terminal = t.visited.back();
  return t;
}

TrajectoryClass classify_sim_trajectory(const TaskDag& g, const SimTrajectory& t) {
  if (t.visited.empty() || !t.terminal || t.visited.back() != *t.terminal ||
      !g.is_sink(g.index_of(*t.terminal))) {
    throw Error(ErrorCode::kNonTerminatedTrajectory, "trajectory does not end at a sink");
  }
  if (*t.terminal != g.correct_sink()) return TrajectoryClass::kWrong;
  const auto& support = g.perfect_support();
  for (NodeId id : t.visited) {
    if (!support[g.index_of(id)]) return TrajectoryClass::kImperfect;
  }
  return TrajectoryClass::kPerfect;
}

PrrEstimate exhaustive_prr(const TaskDag& g, const TransitionPolicy& policy, std::size_t state_budget) {
  const std::size_t n = g.size();
  if (n > 64) {
    throw Error(ErrorCode::kBudgetExceeded, "exhaustive enumeration supports at most 64 nodes");
  }
  const auto weights = detail::resolve_weights(g, policy);
  std::vector<std::uint64_t> parent_mask(n, 0);
  std::uint64_t support_mask = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p : g.parents(i)) parent_mask[i] |= std::uint64_t{1} << p;
    if (g.perfect_support()[i]) support_mask |= std::uint64_t{1} << i;
  }
  const std::size_t correct = g.correct_sink_index();

  PrrEstimate est;
  est.method = PrrEstimate::Method::kExhaustive;
  std::unordered_map<std::uint64_t, double> layer{{0, 1.0}};
  std::vector<std::size_t> open;
  while (!layer.empty()) {
    est.states_explored += layer.size();
    if (est.states_explored > state_budget) {
      throw Error(ErrorCode::kBudgetExceeded,
                  "more than " + std::to_string(state_budget) + " visited-sets to expand");
    }
    std::unordered_map<std::uint64_t, double> next;
    for (const auto& [mask, mass] : layer) {
      open.clear();
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t bit = std::uint64_t{1} << i;
        if (!(mask & bit) && (parent_mask[i] & ~mask) == 0) {
          open.push_back(i);
          total += weights[i];
        }
      }
      if (open.empty()) throw Error(ErrorCode::kStuckState, "empty frontier before reaching a sink");
      for (std::size_t v : open) {
        const double p = mass * weights[v] / total;
        const std::uint64_t reached = mask | (std::uint64_t{1} << v);
        if (!g.is_sink(v)) {
          next[reached] += p;
        } else if (v != correct) {
          est.breakdown.wrong += p;
        } else if ((reached & ~support_mask) == 0) {
          est.breakdown.perfect += p;
        } else {
          est.breakdown.imperfect += p;
        }
      }
    }
    layer = std::move(next);
  }
  est.value = est.breakdown.perfect;
  return est;
}

PrrEstimate monte_carlo_prr(const TaskDag& g, const TransitionPolicy& policy, std::size_t n,
                            std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::kInvalidLength, "Monte Carlo needs at least one sample");
  const SimCounts counts = kernels::monte_carlo_counts_omp(g, policy, n, seed);
  return kernels::estimate_from_counts(counts);
}

TaskDag make_two_chain(int chain_length) {
  if (chain_length < 1) {
    throw Error(ErrorCode::kInvalidLength, "chain length must be >= 1, got " + std::to_string(chain_length));
  }
  const NodeId L = chain_length;
  std::vector<TaskNode> nodes;
  std::vector<TaskDag::Edge> edges;
  nodes.push_back({0, NodeKind::kSource, "source", 1.0});
  for (int chain = 0; chain < 2; ++chain) {
    const NodeId base = chain * L;
    for (NodeId k = 1; k <= L; ++k) {
      const NodeId id = base + k;
      const NodeKind kind = k == L ? NodeKind::kSink : NodeKind::kIntermediate;
      nodes.push_back({id, kind, (chain == 0 ? "A" : "B") + std::to_string(k), 1.0});
      edges.emplace_back(k == 1 ? 0 : id - 1, id);
    }
  }
  return TaskDag::create(std::move(nodes), std::move(edges), L);
}

TaskDag load_task_dag(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedStructure, e.what());
  }
  if (!j.is_object() || !j.contains("nodes") || !j["nodes"].is_array()) {
    throw Error(ErrorCode::kMalformedStructure, "task DAG needs a \"nodes\" array");
  }
  if (!j.contains("correct_sink") || j["correct_sink"].is_null()) {
    throw Error(ErrorCode::kMissingCorrectSink, "no \"correct_sink\" given");
  }
  try {
    std::vector<TaskNode> nodes;
    for (const auto& item : j["nodes"]) {
      TaskNode n;
      n.id = item.at("id").get<NodeId>();
      n.kind = parse_kind(item.at("kind").get<std::string>());
      n.label = item.value("label", std::string());
      n.weight = item.value("weight", 1.0);
      nodes.push_back(std::move(n));
    }
    std::vector<TaskDag::Edge> edges;
    for (const auto& e : j.value("edges", json::array())) {
      if (!e.is_array() || e.size() != 2) {
        throw Error(ErrorCode::kMalformedStructure, "edges must be [parent, child] pairs");
      }
      edges.emplace_back(e[0].get<NodeId>(), e[1].get<NodeId>());
    }
    return TaskDag::create(std::move(nodes), std::move(edges), j["correct_sink"].get<NodeId>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedStructure, e.what());
  }
}

json task_dag_to_json(const TaskDag& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes()) {
    json item{{"id", n.id}, {"kind", std::string(node_kind_name(n.kind))}, {"label", n.label}};
    if (n.weight != 1.0) item["weight"] = n.weight;
    nodes.push_back(std::move(item));
  }
  json edges = json::array();
  for (const auto& [p, c] : g.edges()) edges.push_back({p, c});
  return json{{"nodes", nodes}, {"edges", edges}, {"correct_sink", g.correct_sink()}};
}

std::string save_task_dag(const TaskDag& g) { return task_dag_to_json(g).dump(2); }

Trajectory induced_trajectory(const TaskDag& g, const SimTrajectory& t, const TrajectoryMeta& meta) {
  Trajectory out;
  out.problem_id = meta.problem_id;
  out.model_id = meta.model_id;
  out.sample_index = meta.sample_index;
  std::unordered_map<std::size_t, StepId> step_of;
  StepId next_id = 1;
  for (NodeId id : t.visited) {
    const std::size_t idx = g.index_of(id);
    Step step;
    step.step_id = next_id++;
    step_of[idx] = step.step_id;
    std::vector<StepId> parents;
    for (std::size_t p : g.parents(idx)) {
      auto it = step_of.find(p);
      if (it == step_of.end()) {
        throw Error(ErrorCode::kNonTerminatedTrajectory,
                    "node " + std::to_string(id) + " visited before its parents");
      }
      parents.push_back(it->second);
    }
    std::sort(parents.begin(), parents.end());
    if (parents.empty()) {
      step.edge = "Restate node " + std::to_string(id) + " from the problem statement.";
    } else {
      step.edge = "Derive node " + std::to_string(id) + " from";
      for (std::size_t k = 0; k < parents.size(); ++k) {
        step.edge += (k ? ", Step " : " Step ") + std::to_string(parents[k]);
      }
      step.edge += ".";
      step.direct_dependent_steps = std::move(parents);
    }
    const std::string& label = g.nodes()[idx].label;
    step.node = label.empty() ? "Node " + std::to_string(id) + " holds." : label;
    out.steps.push_back(std::move(step));
  }
  if (!out.steps.empty() && t.terminal) {
    out.steps.back().node = "The final answer is $\\boxed{" + std::to_string(*t.terminal) + "}$.";
  }
  return out;
}

}  // namespace dagmath
