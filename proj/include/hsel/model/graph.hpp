#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hsel/common/error.hpp"

namespace hsel {

enum class NodeKind { continuous, discrete };

inline const char* to_string(NodeKind k) { return k == NodeKind::continuous ? "continuous" : "discrete"; }

inline NodeKind node_kind_from_string(std::string_view s) {
  if (s == "continuous") return NodeKind::continuous;
  if (s == "discrete") return NodeKind::discrete;
  throw DomainError("unknown node kind '" + std::string(s) + "'");
}

struct Node {
  std::string name;
  int level = 0;
  NodeKind kind = NodeKind::discrete;
};

// Points from a finer node (level l+1) into the coarser concept it helps select (level l).
struct Edge {
  int from = 0;
  int to = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Leveled concept graph. Smaller level index = coarser. parents(v) are the finer
// constituents selected into v; children(v) are the coarser concepts v feeds.
class SelectionGraph {
 public:
  int add_node(std::string name, int level, NodeKind kind = NodeKind::discrete) {
    nodes_.push_back({std::move(name), level, kind});
    parents_.emplace_back();
    children_.emplace_back();
    return static_cast<int>(nodes_.size()) - 1;
  }

  // Edges are stored even when they break the leveling rules; validate_graph reports those.
  void add_edge(int from, int to) {
    if (from < 0 || to < 0 || from >= size() || to >= size())
      throw DomainError("edge endpoint out of range");
    edges_.push_back({from, to});
    insert_sorted(parents_[to], from);
    insert_sorted(children_[from], to);
  }

  void add_edge(std::string_view from, std::string_view to) { add_edge(require(from), require(to)); }

  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(int id) const { return nodes_.at(id); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& parents(int id) const { return parents_.at(id); }
  const std::vector<int>& children(int id) const { return children_.at(id); }

  std::vector<int> levels() const {
    std::set<int> s;
    for (const auto& n : nodes_) s.insert(n.level);
    return {s.begin(), s.end()};
  }
  int min_level() const { return nodes_.empty() ? 0 : levels().front(); }
  int max_level() const { return nodes_.empty() ? 0 : levels().back(); }

  std::vector<int> level_nodes(int level) const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
      if (nodes_[i].level == level) out.push_back(i);
    return out;
  }

  int find(std::string_view name) const {
    for (int i = 0; i < size(); ++i)
      if (nodes_[i].name == name) return i;
    return -1;
  }
  int require(std::string_view name) const {
    int id = find(name);
    if (id < 0) throw DomainError("unknown node '" + std::string(name) + "'");
    return id;
  }

  // Finer nodes reachable through parents() from id, restricted to the given level.
  std::vector<int> descendants_at(int id, int level) const {
    std::set<int> frontier{id};
    for (int l = node(id).level; l < level; ++l) {
      std::set<int> next;
      for (int v : frontier)
        for (int p : parents_[v]) next.insert(p);
      frontier = std::move(next);
    }
    return {frontier.begin(), frontier.end()};
  }

 private:
  static void insert_sorted(std::vector<int>& v, int x) {
    auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it == v.end() || *it != x) v.insert(it, x);
  }

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> parents_;
  std::vector<std::vector<int>> children_;
};

struct Violation {
  std::string kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(std::string_view kind) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.kind == kind; });
  }
};

inline ValidationReport validate_graph(const SelectionGraph& g) {
  ValidationReport r;
  std::set<std::string> names;
  for (const auto& n : g.nodes())
    if (!names.insert(n.name).second) r.violations.push_back({"duplicate name", "node name '" + n.name + "' repeated"});

  std::set<Edge> seen;
  for (const auto& e : g.edges()) {
    const auto& a = g.node(e.from);
    const auto& b = g.node(e.to);
    std::string label = a.name + " -> " + b.name;
    if (!seen.insert(e).second) r.violations.push_back({"duplicate edge", label});
    if (e.from == e.to)
      r.violations.push_back({"self loop", label});
    else if (a.level == b.level)
      r.violations.push_back({"within-level edge", label});
    else if (a.level < b.level)
      r.violations.push_back({"upward edge", label + " points from a coarser to a finer level"});
    else if (a.level != b.level + 1)
      r.violations.push_back({"level-skipping edge", label});
  }

  if (g.size() > 0) {
    int bottom = g.max_level();
    for (int i = 0; i < g.size(); ++i) {
      if (g.node(i).level >= bottom) continue;
      bool fed = false;
      for (int p : g.parents(i))
        if (g.node(p).level == g.node(i).level + 1) fed = true;
      if (!fed) r.violations.push_back({"orphan concept", g.node(i).name + " has no incoming edge from the level below"});
    }
  }
  return r;
}

}  // namespace hsel
