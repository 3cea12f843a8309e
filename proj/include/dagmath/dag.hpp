#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dagmath/format.hpp"

namespace dagmath {

// Graph extracted from one trajectory: one node per step, one edge per
// (parent -> step) citation. The sink is the final step.
class TrajectoryDag {
 public:
  using Edge = std::pair<StepId, StepId>;

  TrajectoryDag() = default;

  const std::vector<StepId>& node_ids() const { return node_ids_; }  // ascending
  const std::set<Edge>& edges() const { return edges_; }
  StepId sink_id() const { return sink_id_; }
  const std::set<StepId>& source_ids() const { return source_ids_; }

  size_t node_count() const { return node_ids_.size(); }
  size_t edge_count() const { return edges_.size(); }
  bool contains(StepId id) const { return out_.count(id) != 0; }

  size_t out_degree(StepId id) const;  // throws kUnknownNode
  size_t in_degree(StepId id) const;   // throws kUnknownNode

  friend TrajectoryDag build_dag(const Trajectory& t);

 private:
  std::vector<StepId> node_ids_;
  std::set<Edge> edges_;
  StepId sink_id_ = 0;
  std::set<StepId> source_ids_;
  std::map<StepId, size_t> out_;
  std::map<StepId, size_t> in_;
};

struct GraphStats {
  size_t n_nodes = 0;
  size_t n_edges = 0;
  double density = 0.0;
  size_t max_in_degree = 0;
  size_t max_out_degree = 0;
  double avg_in_degree = 0.0;
  double avg_out_degree = 0.0;

  bool operator==(const GraphStats&) const = default;
};

// Throws kInvalidFormat when the trajectory has any F01..F05 error.
TrajectoryDag build_dag(const Trajectory& t);

size_t out_degree(const TrajectoryDag& g, StepId v);

// Zero out-degree nodes other than the sink.
std::set<StepId> unclosed_nodes(const TrajectoryDag& g);
bool is_logically_closed(const TrajectoryDag& g);

// Closeness as an exact fraction: (n-1-|unclosed|) / (n-1), with 1/1 for a
// single-node graph. `rate()` is the same value as a double.
struct Closeness {
  std::int64_t closed = 1;
  std::int64_t total = 1;
  double rate() const { return static_cast<double>(closed) / static_cast<double>(total); }
};
Closeness closeness(const TrajectoryDag& g);
double closeness_rate(const TrajectoryDag& g);

// density = 2E / (N(N-1)), 0 for N < 2.
GraphStats graph_stats(const TrajectoryDag& g);

// Kahn's algorithm over an arbitrary directed graph.
bool check_acyclic(const std::vector<std::int64_t>& nodes,
                   const std::vector<std::pair<std::int64_t, std::int64_t>>& edges);

// "parent child" per line.
std::string to_edge_list(const TrajectoryDag& g);
// Graphviz dot; unclosed nodes are filled orange, the sink green.
std::string to_dot(const TrajectoryDag& g, const std::string& name = "trajectory");

}  // namespace dagmath
