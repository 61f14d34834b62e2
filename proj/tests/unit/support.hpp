#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hsel/model/discrete_model.hpp"
#include "hsel/model/graph.hpp"

namespace hsel::testing {

inline std::string fixture(const std::string& name) { return std::string(HSEL_FIXTURE_DIR) + "/" + name; }

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hsel_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Hand-built discrete model: tables keyed by latent name, prior over the top
// level (uniform over configurations with a nonempty preimage when omitted).
inline DiscreteSelectionModel hand_model(const SelectionGraph& g, const std::vector<int>& supports,
                                         const std::map<std::string, std::vector<int>>& tables,
                                         std::vector<double> top_prior = {}, const PreimageWeights& weights = {}) {
  DiscreteSelectionModel m;
  m.graph = g;
  m.supports = supports;
  m.functions.resize(static_cast<std::size_t>(g.size()));
  for (const auto& [name, table] : tables) {
    int v = g.require(name);
    std::vector<int> ps;
    for (int p : g.parents(v)) ps.push_back(supports[p]);
    m.functions[v] = make_selection(v, g.parents(v), ps, table);
  }
  if (top_prior.empty()) {
    DiscreteSelectionModel probe = m;
    probe.top_prior.assign(m.level_radix(m.top_level()).size(), 0.0);
    build_conditionals(probe, weights);
    int live = 0;
    if (probe.conditionals.empty()) {
      top_prior.assign(probe.top_prior.size(), 1.0 / static_cast<double>(probe.top_prior.size()));
    } else {
      for (const auto& row : probe.conditionals.front().rows) live += !row.empty();
      for (const auto& row : probe.conditionals.front().rows) top_prior.push_back(row.empty() ? 0.0 : 1.0 / live);
    }
  }
  m.top_prior = std::move(top_prior);
  build_conditionals(m, weights);
  return m;
}

// One latent over a set of binary bottom variables, with extra free bottoms.
inline SelectionGraph star_graph(const std::vector<std::string>& bottoms, const std::vector<std::string>& members,
                                 const std::string& latent = "S") {
  SelectionGraph g;
  g.add_node(latent, 0);
  for (const auto& b : bottoms) g.add_node(b, 1);
  for (const auto& b : members) g.add_edge(b, latent);
  return g;
}

}  // namespace hsel::testing
