#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hsel/common/rng.hpp"
#include "hsel/discovery/binary_matrix.hpp"
#include "hsel/discovery/concept_graph.hpp"
#include "hsel/model/continuous_model.hpp"
#include "hsel/model/graph.hpp"
#include "hsel/model/joint_table.hpp"

namespace hsel {

// Binary concepts on a leveled graph, sampled top-down: a node switches on with
// probability sigmoid(bias + sum of weights over its active coarser concepts).
struct BinaryHierarchy {
  SelectionGraph graph;
  std::vector<double> bias;
  std::vector<std::vector<double>> weights;  // aligned with graph.children(v)

  double on_probability(int v, const std::vector<int>& x) const {
    double u = bias[v];
    const auto& ch = graph.children(v);
    for (std::size_t i = 0; i < ch.size(); ++i) u += weights[v][i] * x[ch[i]];
    return 1.0 / (1.0 + std::exp(-u));
  }

  std::vector<int> topological_order() const {
    std::vector<int> order(graph.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return graph.node(a).level < graph.node(b).level; });
    return order;
  }
};

// Strong signed weights keep every drawn dependence well above sampling noise.
inline BinaryHierarchy random_binary_hierarchy(const SelectionGraph& g, std::uint64_t seed, double low = 1.6, double high = 2.6) {
  Rng rng = make_rng(seed, 0xB1);
  BinaryHierarchy h;
  h.graph = g;
  h.bias.resize(g.size());
  h.weights.resize(g.size());
  for (int v = 0; v < g.size(); ++v) {
    const auto& ch = g.children(v);
    double sum = 0.0;
    for (std::size_t i = 0; i < ch.size(); ++i) {
      double w = low + (high - low) * uniform01(rng);
      if (uniform01(rng) < 0.3) w = -w;
      h.weights[v].push_back(w);
      sum += w;
    }
    // Centre the logit so each node is on roughly half the time.
    h.bias[v] = -0.5 * sum + normal(rng, 0.0, 0.2);
  }
  return h;
}

inline BinaryHierarchy figure2_binary_fixture(std::uint64_t seed = 0) { return random_binary_hierarchy(figure2_graph(NodeKind::discrete), seed); }

inline BinaryFeatureMatrix sample_binary(const BinaryHierarchy& h, int n, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0xB2);
  const int N = h.graph.size();
  std::vector<std::vector<std::uint8_t>> cols(N, std::vector<std::uint8_t>(n, 0));
  auto order = h.topological_order();
  std::vector<int> x(N);
  for (int r = 0; r < n; ++r) {
    for (int v : order) x[v] = uniform01(rng) < h.on_probability(v, x) ? 1 : 0;
    for (int v = 0; v < N; ++v) cols[v][r] = static_cast<std::uint8_t>(x[v]);
  }
  BinaryFeatureMatrix b;
  for (int v = 0; v < N; ++v) b.add_column({h.graph.node(v).level, v}, std::move(cols[v]));
  if (n == 0) b.rows = 0;
  b.provenance.push_back("binary hierarchy seed " + std::to_string(seed));
  return b;
}

inline JointTable binary_exact_joint(const BinaryHierarchy& h) {
  const int N = h.graph.size();
  if (N > 24) throw SizeError("binary hierarchy too large to enumerate", 1ULL << N);
  std::vector<std::string> names;
  for (const auto& node : h.graph.nodes()) names.push_back(node.name);
  JointTable j(names, std::vector<int>(N, 2));
  auto order = h.topological_order();
  std::vector<JointTable::Entry> entries;
  std::vector<int> x(N);
  for (std::uint64_t code = 0; code < (1ULL << N); ++code) {
    for (int v = 0; v < N; ++v) x[v] = static_cast<int>(code >> (N - 1 - v) & 1ULL);
    double p = 1.0;
    for (int v : order) {
      double q = h.on_probability(v, x);
      p *= x[v] ? q : 1.0 - q;
    }
    if (p > 0.0) entries.push_back({code, p});
  }
  j.assign(std::move(entries));
  return j;
}

inline std::vector<ConceptNode> hierarchy_nodes(const SelectionGraph& g) {
  std::vector<ConceptNode> nodes;
  for (int v = 0; v < g.size(); ++v) nodes.push_back({g.node(v).level, v, g.node(v).name});
  return nodes;
}

// Ground-truth concept graph: every selection edge, finer to coarser.
inline ConceptGraph truth_concept_graph(const SelectionGraph& g) {
  ConceptGraph c;
  c.nodes = hierarchy_nodes(g);
  c.larger_level_is_coarser = false;
  for (const auto& e : g.edges()) c.edges.push_back({e.from, e.to, true, EdgeSource::level_rule, false});
  c.sort_edges();
  return c;
}

}  // namespace hsel
