#pragma once

#include <boost/math/special_functions/gamma.hpp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hsel/common/combinatorics.hpp"
#include "hsel/common/error.hpp"
#include "hsel/discovery/binary_matrix.hpp"
#include "hsel/discovery/concept_graph.hpp"
#include "hsel/ident/ci_test.hpp"
#include "hsel/model/joint_table.hpp"

namespace hsel {

struct CIDecision {
  bool independent = false;
  double statistic = 0.0;
  double p_value = 0.0;
  int dof = 0;
};

// G^2 likelihood-ratio test on discrete columns; degrees of freedom count only
// the nonzero rows and columns of each conditioning stratum.
class GSquareTest {
 public:
  GSquareTest(const BinaryFeatureMatrix& data, double alpha) : data_(data), alpha_(alpha) {
    for (const auto& col : data.data) arity_.push_back(col.empty() ? 1 : *std::max_element(col.begin(), col.end()) + 1);
  }

  CIDecision operator()(int x, int y, const std::vector<int>& S) const {
    const int ax = arity_[x], ay = arity_[y];
    std::uint64_t strata = 1;
    for (int s : S) strata *= static_cast<std::uint64_t>(arity_[s]);
    std::vector<double> n(strata * ax * ay, 0.0);
    for (int r = 0; r < data_.rows; ++r) {
      std::uint64_t k = 0;
      for (int s : S) k = k * arity_[s] + data_.data[s][r];
      n[(k * ax + data_.data[x][r]) * ay + data_.data[y][r]] += 1.0;
    }
    CIDecision d;
    for (std::uint64_t k = 0; k < strata; ++k) {
      const double* c = &n[k * ax * ay];
      std::vector<double> rx(ax, 0.0), cy(ay, 0.0);
      double tot = 0.0;
      for (int i = 0; i < ax; ++i)
        for (int j = 0; j < ay; ++j) {
          rx[i] += c[i * ay + j];
          cy[j] += c[i * ay + j];
          tot += c[i * ay + j];
        }
      if (tot == 0.0) continue;
      int nzr = 0, nzc = 0;
      for (double v : rx) nzr += v > 0.0;
      for (double v : cy) nzc += v > 0.0;
      d.dof += std::max(0, (nzr - 1) * (nzc - 1));
      for (int i = 0; i < ax; ++i)
        for (int j = 0; j < ay; ++j) {
          double o = c[i * ay + j];
          if (o > 0.0) d.statistic += 2.0 * o * std::log(o * tot / (rx[i] * cy[j]));
        }
    }
    d.statistic = std::max(0.0, d.statistic);
    d.p_value = d.dof == 0 ? 1.0 : boost::math::gamma_q(0.5 * d.dof, 0.5 * d.statistic);
    d.independent = d.p_value > alpha_;
    return d;
  }

 private:
  const BinaryFeatureMatrix& data_;
  double alpha_;
  std::vector<int> arity_;
};

// Exact test on an enumerated joint; variable i of the search is joint variable i.
class ExactCITest {
 public:
  explicit ExactCITest(const JointTable& j, double tolerance = 1e-9) : j_(j), tol_(tolerance) {}
  CIDecision operator()(int x, int y, const std::vector<int>& S) const {
    auto r = ci_test(j_, {{x}, {y}, S, tol_});
    return {r.independent, r.max_deviation, r.independent ? 1.0 : 0.0, 0};
  }

 private:
  const JointTable& j_;
  double tol_;
};

struct PcOptions {
  double alpha = 0.01;
  int max_conditioning = 3;
  int min_rows = 100;
};

struct Skeleton {
  int n = 0;
  std::vector<std::vector<char>> adjacent;
  std::map<std::pair<int, int>, std::vector<int>> sepsets;
  std::vector<int> dropped;  // constant columns
  std::vector<std::string> warnings;
  long long tests = 0;

  std::vector<int> neighbors(int v) const {
    std::vector<int> out;
    for (int w = 0; w < n; ++w)
      if (adjacent[v][w]) out.push_back(w);
    return out;
  }
  int edge_count() const {
    int c = 0;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) c += adjacent[a][b];
    return c;
  }
};

// Order-independent skeleton search: removals found at one conditioning size are
// committed together before the next size starts.
template <class Test>
Skeleton pc_skeleton(int n, const Test& test, const PcOptions& opt, const std::vector<int>& excluded = {}) {
  Skeleton sk;
  sk.n = n;
  sk.adjacent.assign(n, std::vector<char>(n, 1));
  for (int v = 0; v < n; ++v) sk.adjacent[v][v] = 0;
  for (int v : excluded)
    for (int w = 0; w < n; ++w) sk.adjacent[v][w] = sk.adjacent[w][v] = 0;
  for (int level = 0; level <= opt.max_conditioning; ++level) {
    auto snapshot = sk.adjacent;
    std::vector<std::pair<int, int>> removals;
    bool any_candidate = false;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        if (!snapshot[a][b]) continue;
        bool removed = false;
        for (int side = 0; side < 2 && !removed; ++side) {
          int x = side ? b : a, y = side ? a : b;
          std::vector<int> adj;
          for (int w = 0; w < n; ++w)
            if (snapshot[x][w] && w != y) adj.push_back(w);
          if (static_cast<int>(adj.size()) < level) continue;
          any_candidate = true;
          for_each_combination(adj, static_cast<std::size_t>(level), [&](const std::vector<int>& S) {
            ++sk.tests;
            if (!test(a, b, S).independent) return false;
            sk.sepsets[{a, b}] = S;
            removed = true;
            return true;
          });
        }
        if (removed) removals.push_back({a, b});
      }
    for (auto [a, b] : removals) sk.adjacent[a][b] = sk.adjacent[b][a] = 0;
    if (!any_candidate) break;
  }
  return sk;
}

inline Skeleton pc_search(const BinaryFeatureMatrix& data, const PcOptions& opt = {}) {
  if (data.rows < opt.min_rows)
    throw DomainError("PC needs at least " + std::to_string(opt.min_rows) + " rows, got " + std::to_string(data.rows));
  std::vector<int> dropped;
  std::vector<std::string> warnings;
  for (int c = 0; c < data.cols(); ++c) {
    const auto& col = data.data[c];
    if (col.empty() || std::all_of(col.begin(), col.end(), [&](std::uint8_t v) { return v == col[0]; })) {
      dropped.push_back(c);
      warnings.push_back("constant column " + data.label(c) + " dropped");
    }
  }
  GSquareTest test(data, opt.alpha);
  auto sk = pc_skeleton(data.cols(), test, opt, dropped);
  sk.dropped = dropped;
  sk.warnings = warnings;
  return sk;
}

inline Skeleton pc_search_exact(const JointTable& joint, const PcOptions& opt = {}, double tolerance = 1e-9) {
  ExactCITest test(joint, tolerance);
  return pc_skeleton(static_cast<int>(joint.arity()), test, opt);
}

// Cross-level edges point to the coarser node; within-level edges are oriented as
// colliders where the separating sets allow it and stay undirected otherwise.
inline ConceptGraph orient_levels(const Skeleton& sk, std::vector<ConceptNode> nodes, bool larger_level_is_coarser) {
  if (static_cast<int>(nodes.size()) != sk.n) throw DomainError("one level label per skeleton node required");
  ConceptGraph g;
  g.nodes = std::move(nodes);
  g.larger_level_is_coarser = larger_level_is_coarser;
  g.sepsets = sk.sepsets;
  std::map<std::pair<int, int>, int> dir;  // (min, max) -> head (-1 undirected)
  for (int a = 0; a < sk.n; ++a)
    for (int b = a + 1; b < sk.n; ++b) {
      if (!sk.adjacent[a][b]) continue;
      if (g.nodes[a].level != g.nodes[b].level)
        dir[{a, b}] = g.coarser(a, b) ? a : b;
      else
        dir[{a, b}] = -1;
    }
  std::set<std::pair<int, int>> collider;
  for (int c = 0; c < sk.n; ++c) {
    auto nb = sk.neighbors(c);
    for (std::size_t i = 0; i < nb.size(); ++i)
      for (std::size_t k = i + 1; k < nb.size(); ++k) {
        int a = nb[i], b = nb[k];
        if (sk.adjacent[a][b]) continue;
        if (g.nodes[a].level != g.nodes[c].level || g.nodes[b].level != g.nodes[c].level) continue;
        auto it = sk.sepsets.find(std::minmax(a, b));
        if (it == sk.sepsets.end() || std::find(it->second.begin(), it->second.end(), c) != it->second.end()) continue;
        collider.insert(std::minmax(a, c));
        collider.insert(std::minmax(b, c));
        dir[std::minmax(a, c)] = c;
        dir[std::minmax(b, c)] = c;
      }
  }
  for (const auto& [k, head] : dir) {
    ConceptEdge e;
    e.within_level = g.nodes[k.first].level == g.nodes[k.second].level;
    if (head < 0) {
      e.from = k.first;
      e.to = k.second;
      e.directed = false;
      e.source = EdgeSource::undirected;
    } else {
      e.to = head;
      e.from = head == k.first ? k.second : k.first;
      e.source = e.within_level ? EdgeSource::collider_rule : EdgeSource::level_rule;
    }
    g.edges.push_back(e);
  }
  g.sort_edges();
  return g;
}

inline std::vector<ConceptNode> nodes_from_matrix(const BinaryFeatureMatrix& data) {
  std::vector<ConceptNode> nodes;
  for (int c = 0; c < data.cols(); ++c) nodes.push_back({data.columns[c].level, data.columns[c].feature, data.label(c)});
  return nodes;
}

}  // namespace hsel
