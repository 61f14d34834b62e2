#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hsel/common/error.hpp"
#include "hsel/ident/equivalence.hpp"
#include "hsel/ident/identify.hpp"
#include "hsel/model/discrete_model.hpp"
#include "hsel/model/joint_table.hpp"

// Deliberately plain reference implementations: dense arrays, exhaustive loops,
// no shared numerics with the identification code.
namespace hsel::oracle {

struct OracleBudget {
  std::uint64_t max_states = 10'000'000;
  std::uint64_t max_subsets = 1'000'000;
  std::uint64_t max_permutations = 50'000'000;
  double wall_seconds = 600.0;

  void validate() const {
    if (max_states == 0 || max_subsets == 0 || max_permutations == 0 || !(wall_seconds > 0.0))
      throw ConfigError("oracle budget caps must be positive");
  }
};

namespace detail {

class Clock {
 public:
  explicit Clock(double cap) : cap_(cap), start_(std::chrono::steady_clock::now()) {}
  void check() const {
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (s > cap_) throw BudgetError("oracle wall-clock cap exceeded");
  }

 private:
  double cap_;
  std::chrono::steady_clock::time_point start_;
};

// Rank by Gaussian elimination with partial pivoting.
inline int gauss_rank(std::vector<std::vector<double>> a, double rel_tol = 1e-9) {
  const std::size_t rows = a.size(), cols = rows ? a[0].size() : 0;
  double scale = 0.0;
  for (const auto& r : a)
    for (double v : r) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0;
  int rank = 0;
  std::size_t r = 0;
  for (std::size_t c = 0; c < cols && r < rows; ++c) {
    std::size_t piv = r;
    for (std::size_t i = r + 1; i < rows; ++i)
      if (std::abs(a[i][c]) > std::abs(a[piv][c])) piv = i;
    if (std::abs(a[piv][c]) <= rel_tol * scale) continue;
    std::swap(a[piv], a[r]);
    for (std::size_t i = r + 1; i < rows; ++i) {
      double f = a[i][c] / a[r][c];
      for (std::size_t k = c; k < cols; ++k) a[i][k] -= f * a[r][k];
    }
    ++r;
    ++rank;
  }
  return rank;
}

// Full dense probability array over every configuration of the table's variables.
inline std::vector<double> dense(const JointTable& j, const OracleBudget& b) {
  std::uint64_t n = 1;
  for (int s : j.supports()) {
    n *= static_cast<std::uint64_t>(s);
    if (n > b.max_states) throw BudgetError("oracle state budget exceeded (" + std::to_string(n) + " states)");
  }
  std::vector<double> p(n, 0.0);
  for (const auto& e : j.entries()) {
    auto x = j.config(e);
    std::uint64_t code = 0;
    for (std::size_t i = 0; i < x.size(); ++i) code = code * j.supports()[i] + x[i];
    p[code] = e.p;
  }
  return p;
}

inline std::vector<int> decode(std::uint64_t code, const std::vector<int>& sup) {
  std::vector<int> x(sup.size());
  for (std::size_t i = sup.size(); i-- > 0;) {
    x[i] = static_cast<int>(code % sup[i]);
    code /= sup[i];
  }
  return x;
}

// Bottleneck test by direct enumeration. Returns nullopt when the rank cannot be
// certified without a factorization search (3 <= rank < min(rows, cols)).
inline std::optional<bool> bottleneck_holds(const std::vector<double>& p, const std::vector<int>& sup, int d,
                                            const std::vector<int>& C) {
  const int n = static_cast<int>(sup.size());
  std::vector<int> R;
  for (int v = 0; v < n; ++v)
    if (v != d && std::find(C.begin(), C.end(), v) == C.end()) R.push_back(v);
  if (R.empty()) return false;
  // cell key -> (remainder key -> column of d)
  std::map<std::vector<int>, std::map<std::vector<int>, std::vector<double>>> cells;
  for (std::uint64_t code = 0; code < p.size(); ++code) {
    if (p[code] <= 0.0) continue;
    auto x = decode(code, sup);
    std::vector<int> ck, rk;
    for (int v : C) ck.push_back(x[v]);
    for (int v : R) rk.push_back(x[v]);
    auto& col = cells[ck][rk];
    if (col.empty()) col.assign(sup[d], 0.0);
    col[x[d]] += p[code];
  }
  int informative = 0, max_rank = 0;
  for (const auto& [ck, cols] : cells) {
    std::vector<int> rows;
    for (int a = 0; a < sup[d]; ++a)
      for (const auto& [rk, col] : cols)
        if (col[a] > 0.0) {
          rows.push_back(a);
          break;
        }
    const int nr = static_cast<int>(rows.size()), nc = static_cast<int>(cols.size());
    if (nr < 2 || nc < 2) continue;
    ++informative;
    std::vector<std::vector<double>> m(nr);
    for (int i = 0; i < nr; ++i)
      for (const auto& [rk, col] : cols) m[i].push_back(col[rows[i]]);
    int r = gauss_rank(m);
    int full = std::min(nr, nc);
    if (r >= full) return false;
    if (r > 2) return std::nullopt;
    max_rank = std::max(max_rank, r);
  }
  return informative > 0 && max_rank >= 2;
}

}  // namespace detail

// Smallest conditioning set (cardinality, then lexicographic) passing the
// bottleneck test; nullopt when no candidate up to search_cap passes.
inline std::optional<std::vector<int>> oracle_minimal_coparents(const JointTable& joint, int d, int search_cap = 4,
                                                                const OracleBudget& budget = {}) {
  budget.validate();
  const int n = static_cast<int>(joint.arity());
  if (n > 8) throw BudgetError("oracle co-parent search limited to 8 variables");
  if (d < 0 || d >= n) throw DomainError("variable index out of range");
  detail::Clock clock(budget.wall_seconds);
  auto p = detail::dense(joint, budget);
  std::vector<int> sup = joint.supports();
  std::vector<std::vector<int>> candidates;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (mask >> d & 1u) continue;
    std::vector<int> C;
    for (int v = 0; v < n; ++v)
      if (mask >> v & 1u) C.push_back(v);
    if (static_cast<int>(C.size()) <= search_cap) candidates.push_back(C);
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  std::uint64_t tested = 0;
  for (const auto& C : candidates) {
    if (++tested > budget.max_subsets) throw BudgetError("oracle subset budget exceeded");
    clock.check();
    auto h = detail::bottleneck_holds(p, sup, d, C);
    if (!h) throw IndeterminateError("oracle cannot certify the nonnegative rank of a cell with linear rank above 2");
    if (*h) return C;
  }
  return std::nullopt;
}

// |intersection of sets[i] for i in S| for every nonempty bitmask S.
inline std::map<std::uint32_t, int> oracle_set_intersections(const std::vector<std::set<int>>& sets) {
  if (sets.size() > 8) throw BudgetError("oracle set intersections limited to 8 sets");
  std::map<std::uint32_t, int> out;
  const std::uint32_t n = static_cast<std::uint32_t>(sets.size());
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    int count = 0;
    std::set<int> universe;
    for (const auto& s : sets) universe.insert(s.begin(), s.end());
    for (int x : universe) {
      bool all = true;
      for (std::uint32_t i = 0; i < n; ++i)
        if ((mask >> i & 1u) && !sets[i].count(x)) all = false;
      if (all) ++count;
    }
    out[mask] = count;
  }
  return out;
}

struct OracleMatch {
  bool found = false;
  std::vector<NodeMatch> witness;
  std::uint64_t permutations_tried = 0;
  std::string closest;  // diagnostic for the best failing assignment
};

// Exhaustive search over level-wise latent permutations and state bijections.
inline OracleMatch oracle_best_match(const DiscreteSelectionModel& truth, const LearnedDiscreteModel& learned,
                                     const OracleBudget& budget = {}) {
  budget.validate();
  detail::Clock clock(budget.wall_seconds);
  OracleMatch out;
  JointTable j = exact_joint(truth, false, budget.max_states);

  const int K = truth.bottom_level() - truth.top_level();
  if (K != learned.learned_levels) {
    out.closest = "level count differs";
    return out;
  }
  std::vector<int> order;  // truth latents, finest level first
  for (int k = 1; k <= K; ++k)
    for (int v : truth.level_nodes(truth.bottom_level() - k)) order.push_back(v);
  for (int k = 1; k <= K; ++k) {
    auto tl = truth.level_nodes(truth.bottom_level() - k);
    auto ll = learned.learned_level_nodes(k);
    if (tl.size() != ll.size()) {
      out.closest = "latent count differs on level " + std::to_string(k);
      return out;
    }
    if (tl.size() > 8) throw BudgetError("oracle match limited to 8 latents per level");
  }

  std::map<int, int> to_learned;
  std::map<int, std::map<int, int>> h;
  for (int v : truth.observed()) {
    int l = learned.graph.find(truth.graph.node(v).name);
    if (l < 0) {
      out.closest = "observed variable " + truth.graph.node(v).name + " missing";
      return out;
    }
    to_learned[v] = l;
    for (int x = 0; x < truth.supports[v]; ++x) h[v][x] = x;
  }
  std::map<int, std::vector<std::vector<int>>> tuples;
  std::map<int, std::vector<int>> states;
  for (int s : order) {
    JointTable pm = j.marginal(truth.graph.parents(s));
    for (const auto& e : pm.entries()) tuples[s].push_back(pm.config(e));
    states[s] = j.support_of(s);
    if (states[s].size() > 6) throw BudgetError("oracle match limited to 6 states per latent");
  }

  std::set<int> used;
  int best_depth = -1;
  auto commutes = [&](int t, int l, const std::map<int, int>& bij) {
    const auto& tpa = truth.graph.parents(t);
    const auto& lf = learned.functions.at(l);
    std::vector<int> lp;
    for (int p : tpa) lp.push_back(to_learned.at(p));
    auto sorted = lp;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != lf.parents) return false;
    for (const auto& x : tuples[t]) {
      std::vector<int> y(lf.parents.size());
      for (std::size_t i = 0; i < tpa.size(); ++i) {
        auto pos = std::find(lf.parents.begin(), lf.parents.end(), lp[i]) - lf.parents.begin();
        y[pos] = h.at(tpa[i]).at(x[i]);
      }
      std::uint64_t code = 0;
      for (std::size_t i = 0; i < y.size(); ++i) code = code * lf.parent_supports[i] + y[i];
      if (lf.table[code] != bij.at(truth.functions[t].table[truth.functions[t].radix().encode(x)])) return false;
    }
    return true;
  };

  auto search = [&](auto&& self, std::size_t i) -> bool {
    if (i == order.size()) return true;
    clock.check();
    const int t = order[i];
    const int k = truth.bottom_level() - truth.graph.node(t).level;
    for (int l : learned.learned_level_nodes(k)) {
      if (used.count(l)) continue;
      if (learned.supports[l] != static_cast<int>(states[t].size())) continue;
      std::vector<int> perm(states[t].size());
      for (std::size_t a = 0; a < perm.size(); ++a) perm[a] = static_cast<int>(a);
      do {
        if (++out.permutations_tried > budget.max_permutations) throw BudgetError("oracle permutation budget exceeded");
        std::map<int, int> bij;
        for (std::size_t a = 0; a < perm.size(); ++a) bij[states[t][a]] = perm[a];
        if (!commutes(t, l, bij)) continue;
        best_depth = std::max(best_depth, static_cast<int>(i));
        used.insert(l);
        to_learned[t] = l;
        h[t] = bij;
        out.witness.push_back({truth.graph.node(t).name, learned.graph.node(l).name, bij});
        if (self(self, i + 1)) return true;
        out.witness.pop_back();
        h.erase(t);
        to_learned.erase(t);
        used.erase(l);
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
    return false;
  };
  out.found = search(search, 0);
  if (!out.found) {
    out.witness.clear();
    int stuck = best_depth + 1;
    out.closest = stuck < static_cast<int>(order.size()) ? "no commuting assignment for " + truth.graph.node(order[stuck]).name
                                                         : "no complete assignment";
  }
  return out;
}

}  // namespace hsel::oracle
