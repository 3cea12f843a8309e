#include "dagmath/dag.hpp"

#include <algorithm>
#include <deque>
#include <sstream>
#include <unordered_map>

#include "dagmath/error.hpp"

namespace dagmath {

size_t TrajectoryDag::out_degree(StepId id) const {
  auto it = out_.find(id);
  if (it == out_.end()) throw Error(ErrorCode::kUnknownNode, "node " + std::to_string(id));
  return it->second;
}

size_t TrajectoryDag::in_degree(StepId id) const {
  auto it = in_.find(id);
  if (it == in_.end()) throw Error(ErrorCode::kUnknownNode, "node " + std::to_string(id));
  return it->second;
}

TrajectoryDag build_dag(const Trajectory& t) {
  const auto diagnostics = validate_format(t);
  if (t.steps.empty() || has_structural_errors(diagnostics)) {
    std::string why = "trajectory has no steps";
    for (const auto& d : diagnostics) {
      if (d.severity == Severity::kError) {
        why = std::string(rule_code_id(d.rule_code)) + " " + d.message;
        break;
      }
    }
    throw Error(ErrorCode::kInvalidFormat, why);
  }
  TrajectoryDag g;
  g.node_ids_.reserve(t.steps.size());
  for (const Step& s : t.steps) {
    g.node_ids_.push_back(s.step_id);
    g.out_[s.step_id] = 0;
    g.in_[s.step_id] = 0;
  }
  for (const Step& s : t.steps) {
    if (!s.direct_dependent_steps) {
      g.source_ids_.insert(s.step_id);
      continue;
    }
    for (StepId p : *s.direct_dependent_steps) {
      g.edges_.emplace(p, s.step_id);
      ++g.out_[p];
      ++g.in_[s.step_id];
    }
  }
  g.sink_id_ = t.steps.back().step_id;
  return g;
}

size_t out_degree(const TrajectoryDag& g, StepId v) { return g.out_degree(v); }

std::set<StepId> unclosed_nodes(const TrajectoryDag& g) {
  std::set<StepId> out;
  for (StepId v : g.node_ids()) {
    if (v != g.sink_id() && g.out_degree(v) == 0) out.insert(v);
  }
  return out;
}

bool is_logically_closed(const TrajectoryDag& g) { return unclosed_nodes(g).empty(); }

Closeness closeness(const TrajectoryDag& g) {
  const auto n = static_cast<std::int64_t>(g.node_count());
  if (n < 2) return {};
  const auto open = static_cast<std::int64_t>(unclosed_nodes(g).size());
  return {n - 1 - open, n - 1};
}

double closeness_rate(const TrajectoryDag& g) { return closeness(g).rate(); }

GraphStats graph_stats(const TrajectoryDag& g) {
  GraphStats s;
  s.n_nodes = g.node_count();
  s.n_edges = g.edge_count();
  if (s.n_nodes >= 2) {
    s.density = 2.0 * static_cast<double>(s.n_edges) /
                (static_cast<double>(s.n_nodes) * static_cast<double>(s.n_nodes - 1));
  }
  for (StepId v : g.node_ids()) {
    s.max_in_degree = std::max(s.max_in_degree, g.in_degree(v));
    s.max_out_degree = std::max(s.max_out_degree, g.out_degree(v));
  }
  if (s.n_nodes > 0) {
    s.avg_in_degree = static_cast<double>(s.n_edges) / static_cast<double>(s.n_nodes);
    s.avg_out_degree = s.avg_in_degree;
  }
  return s;
}

bool check_acyclic(const std::vector<std::int64_t>& nodes,
                   const std::vector<std::pair<std::int64_t, std::int64_t>>& edges) {
  std::unordered_map<std::int64_t, std::vector<std::int64_t>> children;
  std::unordered_map<std::int64_t, size_t> indegree;
  for (auto v : nodes) indegree.emplace(v, 0);
  for (const auto& [p, c] : edges) {
    indegree.emplace(p, 0);
    children[p].push_back(c);
    ++indegree[c];
  }
  std::deque<std::int64_t> ready;
  for (const auto& [v, d] : indegree) {
    if (d == 0) ready.push_back(v);
  }
  size_t emitted = 0;
  while (!ready.empty()) {
    const auto v = ready.front();
    ready.pop_front();
    ++emitted;
    auto it = children.find(v);
    if (it == children.end()) continue;
    for (auto c : it->second) {
      if (--indegree[c] == 0) ready.push_back(c);
    }
  }
  return emitted == indegree.size();
}

std::string to_edge_list(const TrajectoryDag& g) {
  std::ostringstream os;
  for (const auto& [p, c] : g.edges()) os << p << ' ' << c << '\n';
  return os.str();
}

std::string to_dot(const TrajectoryDag& g, const std::string& name) {
  const auto open = unclosed_nodes(g);
  std::ostringstream os;
  os << "digraph \"" << name << "\" {\n  rankdir=TB;\n";
  for (StepId v : g.node_ids()) {
    os << "  " << v;
    if (v == g.sink_id()) {
      os << " [style=filled, fillcolor=palegreen]";
    } else if (open.count(v)) {
      os << " [style=filled, fillcolor=orange]";
    }
    os << ";\n";
  }
  for (const auto& [p, c] : g.edges()) os << "  " << p << " -> " << c << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace dagmath
