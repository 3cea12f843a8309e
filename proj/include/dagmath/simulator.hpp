#pragma once

// The rule-based stochastic process over a task DAG: from the visited set,
// the next node is drawn from the frontier (unvisited nodes whose parents
// are all visited) until a sink is reached.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dagmath/format.hpp"

namespace dagmath {

using NodeId = std::int64_t;

enum class NodeKind { kSource, kIntermediate, kSink };

std::string_view node_kind_name(NodeKind k);

struct TaskNode {
  NodeId id = 0;
  NodeKind kind = NodeKind::kIntermediate;
  std::string label;
  // Used by TransitionPolicy::from_node_weights; must be positive.
  double weight = 1.0;

  bool operator==(const TaskNode&) const = default;
};

// Immutable, validated task DAG. Node indices follow ascending id order.
class TaskDag {
 public:
  using Edge = std::pair<NodeId, NodeId>;

  // Throws kCyclicInput, kKindViolation (sources with parents, sinks with
  // children, parentless non-sources, non-sink dead ends, unknown endpoints,
  // duplicate ids, no sinks) or kMissingCorrectSink.
  static TaskDag create(std::vector<TaskNode> nodes, std::vector<Edge> edges, NodeId correct_sink);

  const std::vector<TaskNode>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }  // sorted, unique
  NodeId correct_sink() const { return correct_sink_; }
  std::size_t size() const { return nodes_.size(); }

  std::size_t index_of(NodeId id) const;  // throws kUnknownNode
  NodeId id_at(std::size_t index) const { return nodes_[index].id; }
  const TaskNode& node(NodeId id) const { return nodes_[index_of(id)]; }
  const std::vector<std::size_t>& parents(std::size_t index) const { return parents_[index]; }
  const std::vector<std::size_t>& children(std::size_t index) const { return children_[index]; }
  bool is_sink(std::size_t index) const { return nodes_[index].kind == NodeKind::kSink; }
  std::size_t correct_sink_index() const { return correct_index_; }

  std::vector<NodeId> sources() const;
  std::vector<NodeId> sinks() const;
  // ancestors(correct sink) plus the correct sink itself.
  const std::vector<char>& perfect_support() const { return perfect_support_; }

  bool operator==(const TaskDag& other) const {
    return nodes_ == other.nodes_ && edges_ == other.edges_ && correct_sink_ == other.correct_sink_;
  }

 private:
  std::vector<TaskNode> nodes_;
  std::vector<Edge> edges_;
  NodeId correct_sink_ = 0;
  std::size_t correct_index_ = 0;
  std::map<NodeId, std::size_t> index_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<char> perfect_support_;
};

struct TransitionPolicy {
  enum class Kind { kUniform, kWeighted };

  Kind kind = Kind::kUniform;
  // Weighted only; nodes without an entry weigh 1.
  std::map<NodeId, double> weights;

  static TransitionPolicy uniform() { return {}; }
  static TransitionPolicy weighted(std::map<NodeId, double> w);
  static TransitionPolicy from_node_weights(const TaskDag& g);

  double weight(NodeId id) const;
};

enum class TrajectoryClass { kPerfect, kImperfect, kWrong };

std::string_view trajectory_class_name(TrajectoryClass c);

struct SimTrajectory {
  std::vector<NodeId> visited;
  std::optional<NodeId> terminal;
  TrajectoryClass classification = TrajectoryClass::kWrong;
};

struct OutcomeShares {
  double perfect = 0.0;
  double imperfect = 0.0;
  double wrong = 0.0;
};

struct PrrEstimate {
  enum class Method { kMonteCarlo, kExhaustive };

  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  Method method = Method::kMonteCarlo;
  OutcomeShares breakdown;
  // Exhaustive only: distinct visited-sets expanded.
  std::size_t states_explored = 0;
};

// { v : pa(v) within visited, v not visited }, ascending id. Throws
// kUnknownNode for ids outside the DAG.
std::vector<NodeId> frontier(const TaskDag& g, std::span<const NodeId> visited);

// Next-step distribution over the frontier; probabilities sum to 1.
std::vector<std::pair<NodeId, double>> transition_distribution(const TaskDag& g,
                                                               const TransitionPolicy& policy,
                                                               std::span<const NodeId> visited);

// Draws until a sink is visited. Deterministic in `seed`. Throws kStuckState.
SimTrajectory sample_trajectory(const TaskDag& g, const TransitionPolicy& policy, std::uint64_t seed);

// wrong: terminal is not the correct sink; perfect: every visited node is the
// correct sink or one of its ancestors; imperfect otherwise.
// Throws kNonTerminatedTrajectory.
TrajectoryClass classify_sim_trajectory(const TaskDag& g, const SimTrajectory& t);

// Exact outcome distribution by expanding visited-sets breadth-first.
// Throws kBudgetExceeded past `state_budget` states or above 64 nodes.
PrrEstimate exhaustive_prr(const TaskDag& g, const TransitionPolicy& policy,
                           std::size_t state_budget = 2'000'000);

// OpenMP-parallel sampling; trajectory i uses stream_seed(seed, i), so the
// result does not depend on the thread count. Throws kInvalidLength for n = 0.
PrrEstimate monte_carlo_prr(const TaskDag& g, const TransitionPolicy& policy, std::size_t n,
                            std::uint64_t seed);

// One source, two disjoint chains of L nodes; the first chain ends at the
// correct sink. Ids: source 0, chain A 1..L, chain B L+1..2L.
TaskDag make_two_chain(int chain_length);

// {"nodes":[{"id","kind","label"[,"weight"]}], "edges":[[p,c]], "correct_sink": id}
TaskDag load_task_dag(std::string_view text);
nlohmann::json task_dag_to_json(const TaskDag& g);
std::string save_task_dag(const TaskDag& g);

// The DAG-MATH trajectory a simulated run would print: one step per visited
// node with parents inherited from the task DAG, ending in
// "The final answer is $\boxed{<terminal id>}$".
Trajectory induced_trajectory(const TaskDag& g, const SimTrajectory& t, const TrajectoryMeta& meta = {});

namespace detail {

std::uint64_t stream_seed(std::uint64_t root, std::uint64_t index);

// Per-node weights resolved in index order.
std::vector<double> resolve_weights(const TaskDag& g, const TransitionPolicy& policy);

struct SamplerScratch {
  std::vector<std::uint32_t> missing_parents;
  std::vector<char> visited;
  std::vector<std::size_t> frontier;
};

// Core sampler shared by sample_trajectory and the Monte Carlo kernels.
// Appends visited indices to `path` when non-null.
TrajectoryClass sample_indices(const TaskDag& g, std::span<const double> weights, std::uint64_t seed,
                               SamplerScratch& scratch, std::vector<std::size_t>* path);

}  // namespace detail

}  // namespace dagmath
