#pragma once

#include <algorithm>
#include <json.hpp>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hsel/common/error.hpp"

namespace hsel {

inline constexpr const char* kConceptGraphSchema = "hsel.concept_graph/1";

struct ConceptNode {
  int level = 0;
  int feature = 0;
  std::string label;

  bool operator==(const ConceptNode&) const = default;
};

enum class EdgeSource { level_rule, collider_rule, undirected };

inline const char* to_string(EdgeSource s) {
  switch (s) {
    case EdgeSource::level_rule: return "level-rule";
    case EdgeSource::collider_rule: return "collider-rule";
    case EdgeSource::undirected: return "undirected";
  }
  return "?";
}

inline EdgeSource edge_source_from_string(const std::string& s) {
  if (s == "level-rule") return EdgeSource::level_rule;
  if (s == "collider-rule") return EdgeSource::collider_rule;
  if (s == "undirected") return EdgeSource::undirected;
  throw DomainError("unknown edge source '" + s + "'");
}

// from -> to when directed; undirected edges store from < to.
struct ConceptEdge {
  int from = 0;
  int to = 0;
  bool directed = true;
  EdgeSource source = EdgeSource::level_rule;
  bool within_level = false;

  bool operator==(const ConceptEdge&) const = default;
};

struct ConceptGraph {
  std::vector<ConceptNode> nodes;
  std::vector<ConceptEdge> edges;  // sorted by (min, max) endpoint
  std::map<std::pair<int, int>, std::vector<int>> sepsets;
  bool larger_level_is_coarser = false;

  bool operator==(const ConceptGraph&) const = default;

  bool coarser(int a, int b) const {
    return larger_level_is_coarser ? nodes[a].level > nodes[b].level : nodes[a].level < nodes[b].level;
  }

  int find(int level, int feature) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].level == level && nodes[i].feature == feature) return static_cast<int>(i);
    return -1;
  }

  void sort_edges() {
    std::sort(edges.begin(), edges.end(), [](const ConceptEdge& a, const ConceptEdge& b) {
      auto ka = std::minmax(a.from, a.to), kb = std::minmax(b.from, b.to);
      return ka != kb ? ka < kb : a.from < b.from;
    });
  }

  // Cross-level edges must point to the coarser level; within-level edges must not form a cycle.
  std::vector<std::string> check() const {
    std::vector<std::string> out;
    for (const auto& e : edges) {
      if (e.from < 0 || e.to < 0 || e.from >= static_cast<int>(nodes.size()) || e.to >= static_cast<int>(nodes.size()))
        out.push_back("edge endpoint out of range");
      else if (nodes[e.from].level != nodes[e.to].level && (!e.directed || !coarser(e.to, e.from)))
        out.push_back("cross-level edge " + nodes[e.from].label + " - " + nodes[e.to].label + " not oriented toward the coarser level");
    }
    std::vector<std::vector<int>> adj(nodes.size());
    for (const auto& e : edges)
      if (e.directed && e.within_level) adj[e.from].push_back(e.to);
    std::vector<int> state(nodes.size(), 0);
    bool cycle = false;
    auto dfs = [&](auto&& self, int v) -> void {
      state[v] = 1;
      for (int w : adj[v]) {
        if (state[w] == 1) cycle = true;
        if (state[w] == 0) self(self, w);
      }
      state[v] = 2;
    };
    for (std::size_t v = 0; v < nodes.size(); ++v)
      if (!state[v]) dfs(dfs, static_cast<int>(v));
    if (cycle) out.push_back("within-level cycle");
    return out;
  }
};

inline nlohmann::ordered_json to_json(const ConceptGraph& g) {
  nlohmann::ordered_json j;
  j["schema"] = kConceptGraphSchema;
  j["larger_level_is_coarser"] = g.larger_level_is_coarser;
  j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : g.nodes) j["nodes"].push_back({{"level", n.level}, {"feature", n.feature}, {"label", n.label}});
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : g.edges)
    j["edges"].push_back({{"from", e.from}, {"to", e.to}, {"directed", e.directed}, {"source", to_string(e.source)},
                          {"within_level", e.within_level}});
  j["sepsets"] = nlohmann::ordered_json::array();
  for (const auto& [k, s] : g.sepsets) j["sepsets"].push_back({{"a", k.first}, {"b", k.second}, {"set", s}});
  return j;
}

inline ConceptGraph concept_graph_from_json(const nlohmann::json& j) {
  if (j.value("schema", std::string{}) != kConceptGraphSchema) throw IoError("unsupported concept graph schema");
  ConceptGraph g;
  g.larger_level_is_coarser = j.at("larger_level_is_coarser").get<bool>();
  for (const auto& n : j.at("nodes")) g.nodes.push_back({n.at("level").get<int>(), n.at("feature").get<int>(), n.at("label").get<std::string>()});
  for (const auto& e : j.at("edges"))
    g.edges.push_back({e.at("from").get<int>(), e.at("to").get<int>(), e.at("directed").get<bool>(),
                       edge_source_from_string(e.at("source").get<std::string>()), e.at("within_level").get<bool>()});
  for (const auto& s : j.at("sepsets")) g.sepsets[{s.at("a").get<int>(), s.at("b").get<int>()}] = s.at("set").get<std::vector<int>>();
  return g;
}

inline std::string export_graph(const ConceptGraph& g, const std::string& format) {
  if (format == "json") return to_json(g).dump(2) + "\n";
  if (format != "dot") throw DomainError("unknown export format '" + format + "'");
  std::ostringstream os;
  os << "digraph concepts {\n";
  std::map<int, std::vector<int>> by_level;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) by_level[g.nodes[i].level].push_back(static_cast<int>(i));
  for (const auto& [level, ids] : by_level) {
    os << "  subgraph cluster_level_" << (level < 0 ? "m" : "") << std::abs(level) << " {\n    rank=same;\n    label=\"level " << level
       << "\";\n";
    for (int i : ids) os << "    n" << i << " [label=\"" << g.nodes[i].label << "\"];\n";
    os << "  }\n";
  }
  for (const auto& e : g.edges) {
    os << "  n" << e.from << " -> n" << e.to;
    if (!e.directed) os << " [dir=none]";
    os << ";\n";
  }
  os << "}\n";
  return os.str();
}

inline ConceptGraph parse_graph_json(const std::string& text) { return concept_graph_from_json(nlohmann::json::parse(text)); }

}  // namespace hsel
