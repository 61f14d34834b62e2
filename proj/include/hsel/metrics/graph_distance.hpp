#pragma once

#include <map>
#include <set>
#include <utility>

#include "hsel/common/error.hpp"
#include "hsel/discovery/concept_graph.hpp"

namespace hsel {

struct GraphDistance {
  int shd = 0;
  double precision = 1.0;  // skeleton
  double recall = 1.0;     // skeleton
  double oriented_precision = 1.0;
  int truth_edges = 0;
  int learned_edges = 0;
};

namespace detail {

// (min, max) -> head node, or -1 for undirected.
inline std::map<std::pair<int, int>, int> edge_marks(const ConceptGraph& g, const std::vector<int>& map) {
  std::map<std::pair<int, int>, int> out;
  for (const auto& e : g.edges) {
    int a = map[e.from], b = map[e.to];
    out[std::minmax(a, b)] = e.directed ? b : -1;
  }
  return out;
}

}  // namespace detail

// Nodes are aligned by (level, feature); structural Hamming distance counts
// missing, extra and differently oriented edges once each.
inline GraphDistance graph_distance(const ConceptGraph& truth, const ConceptGraph& learned) {
  if (truth.nodes.size() != learned.nodes.size()) throw AlignmentError("node counts differ");
  std::vector<int> t_id(truth.nodes.size()), l_id(learned.nodes.size());
  std::map<std::pair<int, int>, int> key;
  for (std::size_t i = 0; i < truth.nodes.size(); ++i) {
    key[{truth.nodes[i].level, truth.nodes[i].feature}] = static_cast<int>(i);
    t_id[i] = static_cast<int>(i);
  }
  for (std::size_t i = 0; i < learned.nodes.size(); ++i) {
    auto it = key.find({learned.nodes[i].level, learned.nodes[i].feature});
    if (it == key.end())
      throw AlignmentError("learned node (" + std::to_string(learned.nodes[i].level) + ", " + std::to_string(learned.nodes[i].feature) +
                           ") has no counterpart");
    l_id[i] = it->second;
  }
  auto tm = detail::edge_marks(truth, t_id), lm = detail::edge_marks(learned, l_id);
  GraphDistance d;
  d.truth_edges = static_cast<int>(tm.size());
  d.learned_edges = static_cast<int>(lm.size());
  std::set<std::pair<int, int>> all;
  for (const auto& [k, _] : tm) all.insert(k);
  for (const auto& [k, _] : lm) all.insert(k);
  int common = 0, directed = 0, directed_ok = 0;
  for (const auto& k : all) {
    auto a = tm.find(k), b = lm.find(k);
    if (a == tm.end() || b == lm.end()) {
      ++d.shd;
      continue;
    }
    ++common;
    if (a->second != b->second) ++d.shd;
  }
  for (const auto& [k, head] : lm) {
    if (head < 0) continue;
    ++directed;
    auto a = tm.find(k);
    if (a != tm.end() && a->second == head) ++directed_ok;
  }
  d.precision = lm.empty() ? 1.0 : static_cast<double>(common) / lm.size();
  d.recall = tm.empty() ? 1.0 : static_cast<double>(common) / tm.size();
  d.oriented_precision = directed ? static_cast<double>(directed_ok) / directed : 1.0;
  return d;
}

}  // namespace hsel
