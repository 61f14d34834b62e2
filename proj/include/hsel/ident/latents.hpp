#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "hsel/common/combinatorics.hpp"
#include "hsel/common/error.hpp"
#include "hsel/model/joint_table.hpp"
#include "hsel/model/selection_function.hpp"

namespace hsel {

struct LatentSpec {
  std::vector<int> parents;  // sorted
  std::vector<int> pure;     // parents feeding only this latent
  std::vector<int> hybrid;   // parents shared with another latent
};

struct LatentLayer {
  std::vector<LatentSpec> latents;
};

// One latent per maximal clique of the co-parent graph.
inline LatentLayer introduce_latents(const std::map<int, std::vector<int>>& coparents) {
  for (const auto& [a, cs] : coparents)
    for (int b : cs) {
      if (b == a) throw StructureError("variable " + std::to_string(a) + " listed as its own co-parent");
      auto it = coparents.find(b);
      if (it == coparents.end() || std::find(it->second.begin(), it->second.end(), a) == it->second.end())
        throw StructureError("co-parent map is not symmetric for pair (" + std::to_string(a) + ", " +
                             std::to_string(b) + ")");
    }

  std::map<int, std::set<int>> adj;
  for (const auto& [a, cs] : coparents) adj[a].insert(cs.begin(), cs.end());

  std::vector<std::vector<int>> cliques;
  auto bron_kerbosch = [&](auto&& self, std::set<int> R, std::set<int> P, std::set<int> X) -> void {
    if (P.empty() && X.empty()) {
      if (!R.empty()) cliques.emplace_back(R.begin(), R.end());
      return;
    }
    int pivot = -1;
    std::size_t best = 0;
    for (const auto* s : {&P, &X})
      for (int u : *s) {
        std::size_t k = 0;
        for (int v : P) k += adj[u].count(v);
        if (pivot < 0 || k > best) {
          pivot = u;
          best = k;
        }
      }
    std::vector<int> candidates;
    for (int v : P)
      if (!adj[pivot].count(v)) candidates.push_back(v);
    for (int v : candidates) {
      std::set<int> R2 = R, P2, X2;
      R2.insert(v);
      for (int w : P)
        if (adj[v].count(w)) P2.insert(w);
      for (int w : X)
        if (adj[v].count(w)) X2.insert(w);
      self(self, R2, P2, X2);
      P.erase(v);
      X.insert(v);
    }
  };
  std::set<int> all;
  for (const auto& [a, _] : coparents) all.insert(a);
  bron_kerbosch(bron_kerbosch, {}, all, {});
  std::sort(cliques.begin(), cliques.end());

  std::map<int, int> membership;
  for (const auto& c : cliques)
    for (int v : c) ++membership[v];
  LatentLayer layer;
  for (auto& c : cliques) {
    LatentSpec s;
    s.parents = c;
    for (int v : c) (membership[v] == 1 ? s.pure : s.hybrid).push_back(v);
    layer.latents.push_back(std::move(s));
  }
  return layer;
}

struct MergeResult {
  SelectionFunction function;  // over the latent's parents; kOutside for zero-mass tuples
  int states = 0;
  std::vector<std::vector<std::uint64_t>> classes;  // parent-tuple codes per learned state
  bool hybrid_stage_applied = false;
};

namespace detail {

using Distribution = std::map<std::uint64_t, double>;

inline double distribution_gap(const Distribution& a, const Distribution& b) {
  double ta = 0.0, tb = 0.0;
  for (const auto& [k, v] : a) ta += v;
  for (const auto& [k, v] : b) tb += v;
  double gap = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      gap = std::max(gap, ia->second / ta);
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      gap = std::max(gap, ib->second / tb);
      ++ib;
    } else {
      gap = std::max(gap, std::abs(ia->second / ta - ib->second / tb));
      ++ia;
      ++ib;
    }
  }
  return gap;
}

struct UnionFind {
  std::vector<int> p;
  explicit UnionFind(std::size_t n) : p(n) { std::iota(p.begin(), p.end(), 0); }
  int find(int x) { return p[x] == x ? x : p[x] = find(p[x]); }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) p[std::max(a, b)] = std::min(a, b);
  }
};

// Groups items whose pairwise gap is within tol; gaps just above tol, or
// non-transitive groupings, are reported as ambiguous.
template <class Gap>
std::vector<int> equivalence_classes(std::size_t n, Gap&& gap, double tol, const std::string& what) {
  UnionFind uf(n);
  std::vector<std::vector<double>> g(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      double x = gap(a, b);
      g[a][b] = g[b][a] = x;
      if (x > tol && x <= 100.0 * tol)
        throw AmbiguityError(what + ": comparison of items " + std::to_string(a) + " and " + std::to_string(b) +
                             " is inconclusive (gap " + std::to_string(x) + ")");
      if (x <= tol) uf.unite(static_cast<int>(a), static_cast<int>(b));
    }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (uf.find(static_cast<int>(a)) == uf.find(static_cast<int>(b)) && g[a][b] > tol)
        throw AmbiguityError(what + ": items " + std::to_string(a) + " and " + std::to_string(b) +
                             " are linked by equalities but differ directly");
  std::vector<int> cls(n);
  for (std::size_t a = 0; a < n; ++a) cls[a] = uf.find(static_cast<int>(a));
  return cls;
}

inline std::vector<int> complement(std::size_t arity, const std::vector<int>& vars) {
  std::vector<int> out;
  for (int v = 0; v < static_cast<int>(arity); ++v)
    if (std::find(vars.begin(), vars.end(), v) == vars.end()) out.push_back(v);
  return out;
}

}  // namespace detail

// Learned states of one latent: parent tuples are merged when they induce the
// same conditional distribution downstream (first given each hybrid value, then
// across hybrid values given the remaining parents of the hybrids' children).
inline MergeResult merge_states(const JointTable& j, const LatentLayer& layer, std::size_t latent, double tol = 1e-9) {
  using detail::Distribution;
  const LatentSpec& spec = layer.latents.at(latent);
  const auto& pa = spec.parents;
  std::vector<int> psup;
  for (int v : pa) psup.push_back(j.supports().at(v));
  Radix pr(psup);
  std::vector<int> hpos;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (std::find(spec.hybrid.begin(), spec.hybrid.end(), pa[i]) != spec.hybrid.end()) hpos.push_back(static_cast<int>(i));

  auto rest1 = detail::complement(j.arity(), pa);
  if (rest1.empty()) throw AmbiguityError("no downstream variables to separate the states of latent " + std::to_string(latent));
  std::vector<int> s1;
  for (int v : rest1) s1.push_back(j.supports()[v]);
  Radix r1(s1);

  std::map<std::uint64_t, Distribution> dist1;
  for (const auto& e : j.entries()) dist1[j.project(e.code, pa, pr)][j.project(e.code, rest1, r1)] += e.p;

  std::vector<std::uint64_t> tuples;
  for (const auto& [t, _] : dist1) tuples.push_back(t);
  auto hybrid_code = [&](std::uint64_t t) {
    std::uint64_t h = 0;
    for (int i : hpos) h = h * static_cast<std::uint64_t>(psup[i]) + static_cast<std::uint64_t>(pr.digit(t, i));
    return h;
  };

  // Stage 1: within each hybrid value.
  std::vector<int> cls(tuples.size());
  {
    std::map<std::uint64_t, std::vector<std::size_t>> by_h;
    for (std::size_t i = 0; i < tuples.size(); ++i) by_h[hybrid_code(tuples[i])].push_back(i);
    for (const auto& [h, idx] : by_h) {
      auto local = detail::equivalence_classes(
          idx.size(), [&](std::size_t a, std::size_t b) { return detail::distribution_gap(dist1[tuples[idx[a]]], dist1[tuples[idx[b]]]); },
          tol, "pure-parent merge");
      for (std::size_t a = 0; a < idx.size(); ++a) cls[idx[a]] = static_cast<int>(idx[local[a]]);
    }
  }

  MergeResult out;
  // Stage 2: across hybrid values, conditioning on the other parents of the hybrids' children.
  if (!spec.hybrid.empty()) {
    std::set<int> U;
    for (const auto& other : layer.latents) {
      bool touches = false;
      for (int h : spec.hybrid)
        if (std::find(other.parents.begin(), other.parents.end(), h) != other.parents.end()) touches = true;
      if (touches) U.insert(other.parents.begin(), other.parents.end());
    }
    std::vector<int> extended;
    for (int v : U)
      if (std::find(pa.begin(), pa.end(), v) == pa.end()) extended.push_back(v);
    std::vector<int> Uv(U.begin(), U.end());
    auto rest2 = detail::complement(j.arity(), Uv);
    if (!rest2.empty()) {
      out.hybrid_stage_applied = true;
      std::vector<int> se, s2;
      for (int v : extended) se.push_back(j.supports()[v]);
      for (int v : rest2) s2.push_back(j.supports()[v]);
      Radix re(se), r2(s2);
      std::map<std::uint64_t, std::size_t> tuple_index;
      for (std::size_t i = 0; i < tuples.size(); ++i) tuple_index[tuples[i]] = i;
      std::vector<int> roots;
      for (std::size_t i = 0; i < tuples.size(); ++i)
        if (cls[i] == static_cast<int>(i)) roots.push_back(static_cast<int>(i));
      std::map<int, std::size_t> root_pos;
      for (std::size_t k = 0; k < roots.size(); ++k) root_pos[roots[k]] = k;
      std::vector<std::map<std::uint64_t, Distribution>> dist2(roots.size());
      for (const auto& e : j.entries()) {
        std::size_t i = tuple_index.at(j.project(e.code, pa, pr));
        dist2[root_pos.at(cls[i])][j.project(e.code, extended, re)][j.project(e.code, rest2, r2)] += e.p;
      }
      std::vector<std::uint64_t> root_h(roots.size());
      for (std::size_t k = 0; k < roots.size(); ++k) root_h[k] = hybrid_code(tuples[roots[k]]);
      auto gap = [&](std::size_t a, std::size_t b) {
        if (root_h[a] == root_h[b]) return 1.0;
        const auto& da = dist2[a];
        const auto& db = dist2[b];
        if (da.size() != db.size()) return 1.0;
        double g = 0.0;
        for (auto ia = da.begin(), ib = db.begin(); ia != da.end(); ++ia, ++ib) {
          if (ia->first != ib->first) return 1.0;
          g = std::max(g, detail::distribution_gap(ia->second, ib->second));
        }
        return g;
      };
      auto merged = detail::equivalence_classes(roots.size(), gap, tol, "hybrid-parent merge");
      for (std::size_t i = 0; i < tuples.size(); ++i) cls[i] = roots[merged[root_pos.at(cls[i])]];
    }
  }

  // Canonical labels: order of first appearance over parent tuples in row-major order.
  std::map<int, int> label;
  SelectionFunction f;
  f.parents = pa;
  f.parent_supports = psup;
  f.table.assign(pr.size(), SelectionFunction::kOutside);
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    auto it = label.find(cls[i]);
    if (it == label.end()) it = label.emplace(cls[i], static_cast<int>(label.size())).first;
    f.table[tuples[i]] = it->second;
  }
  out.states = static_cast<int>(label.size());
  out.classes.assign(out.states, {});
  for (std::size_t i = 0; i < tuples.size(); ++i) out.classes[f.table[tuples[i]]].push_back(tuples[i]);
  out.function = std::move(f);
  return out;
}

}  // namespace hsel
