#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hsel/common/combinatorics.hpp"
#include "hsel/common/error.hpp"
#include "hsel/common/rng.hpp"
#include "hsel/model/dataset.hpp"
#include "hsel/model/graph.hpp"
#include "hsel/model/joint_table.hpp"
#include "hsel/model/selection_function.hpp"

namespace hsel {

// P(level l+1 configuration | level l configuration); rows indexed by the
// coarser configuration code, entries are (finer code, probability).
struct LevelConditional {
  int level = 0;
  std::vector<std::vector<std::pair<std::uint64_t, double>>> rows;
};

struct DiscreteSelectionModel {
  SelectionGraph graph;
  std::vector<int> supports;
  std::vector<SelectionFunction> functions;  // by node id; target == -1 for bottom nodes
  std::vector<double> top_prior;             // over top-level configurations
  std::vector<LevelConditional> conditionals;  // ordered coarse to fine

  int top_level() const { return graph.min_level(); }
  int bottom_level() const { return graph.max_level(); }
  bool has_function(int id) const { return id < static_cast<int>(functions.size()) && functions[id].target == id; }

  std::vector<int> level_nodes(int level) const { return graph.level_nodes(level); }

  Radix level_radix(int level) const {
    std::vector<int> r;
    for (int v : level_nodes(level)) r.push_back(supports.at(v));
    return Radix(r);
  }

  std::vector<int> latents() const {
    std::vector<int> out;
    for (int i = 0; i < graph.size(); ++i)
      if (graph.node(i).level < bottom_level()) out.push_back(i);
    return out;
  }

  std::vector<int> observed() const { return level_nodes(bottom_level()); }

  // Coarser configuration selected by a level-(l+1) configuration.
  std::uint64_t select_up(int coarse_level, std::uint64_t fine_code) const {
    auto fine = level_nodes(coarse_level + 1);
    Radix fr = level_radix(coarse_level + 1);
    std::map<int, int> value;
    for (std::size_t i = 0; i < fine.size(); ++i) value[fine[i]] = fr.digit(fine_code, i);
    auto coarse = level_nodes(coarse_level);
    std::vector<int> out(coarse.size());
    for (std::size_t i = 0; i < coarse.size(); ++i) {
      const auto& f = functions.at(coarse[i]);
      std::vector<int> pv;
      for (int p : f.parents) pv.push_back(value.at(p));
      out[i] = apply_selection(f, pv);
    }
    return level_radix(coarse_level).encode(out);
  }
};

inline ValidationReport validate_model(const DiscreteSelectionModel& m, double tol = 1e-12) {
  ValidationReport r = validate_graph(m.graph);
  const int n = m.graph.size();
  if (static_cast<int>(m.supports.size()) != n) {
    r.violations.push_back({"supports", "support list size differs from node count"});
    return r;
  }
  for (int i = 0; i < n; ++i)
    if (m.supports[i] < 1) r.violations.push_back({"supports", m.graph.node(i).name + " has empty support"});
  if (!r.ok()) return r;

  for (int v : m.latents()) {
    if (!m.has_function(v)) {
      r.violations.push_back({"selection function", m.graph.node(v).name + " has no selection function"});
      continue;
    }
    const auto& f = m.functions[v];
    if (f.parents != m.graph.parents(v))
      r.violations.push_back({"selection function", m.graph.node(v).name + " function parents differ from graph"});
    std::vector<int> ps;
    for (int p : f.parents) ps.push_back(m.supports.at(p));
    if (ps != f.parent_supports || f.table.size() != Radix(ps).size()) {
      r.violations.push_back({"selection function", m.graph.node(v).name + " table shape mismatch"});
      continue;
    }
    for (int x : f.table)
      if (x < 0 || x >= m.supports[v]) {
        r.violations.push_back({"selection function", m.graph.node(v).name + " is not total or maps outside support"});
        break;
      }
  }
  if (!r.ok()) return r;

  const int top = m.top_level(), bottom = m.bottom_level();
  if (m.top_prior.size() != m.level_radix(top).size()) {
    r.violations.push_back({"top prior", "top prior size differs from top-level configuration count"});
    return r;
  }
  double s = 0.0;
  for (double p : m.top_prior) {
    if (p < 0.0) r.violations.push_back({"top prior", "negative probability"});
    s += p;
  }
  if (std::abs(s - 1.0) > tol) r.violations.push_back({"top prior", "top prior not normalized"});

  if (static_cast<int>(m.conditionals.size()) != bottom - top) {
    r.violations.push_back({"conditionals", "one conditional per adjacent level pair required"});
    return r;
  }
  for (const auto& lc : m.conditionals) {
    if (lc.rows.size() != m.level_radix(lc.level).size()) {
      r.violations.push_back({"conditionals", "row count mismatch at level " + std::to_string(lc.level)});
      continue;
    }
    for (std::size_t c = 0; c < lc.rows.size(); ++c) {
      if (lc.rows[c].empty()) continue;
      double t = 0.0;
      for (const auto& [code, p] : lc.rows[c]) {
        t += p;
        if (p > 0.0 && m.select_up(lc.level, code) != c) {
          r.violations.push_back({"selection consistency",
                                  "level " + std::to_string(lc.level) + " row " + std::to_string(c) +
                                      " places mass outside its preimage"});
          break;
        }
      }
      if (std::abs(t - 1.0) > tol)
        r.violations.push_back({"conditionals", "row " + std::to_string(c) + " at level " + std::to_string(lc.level) +
                                                    " not normalized"});
    }
  }
  if (!r.ok() || m.conditionals.empty()) return r;
  for (std::size_t c = 0; c < m.top_prior.size(); ++c)
    if (m.top_prior[c] > 0.0 && m.conditionals.front().rows[c].empty()) {
      r.violations.push_back({"dead branch", "top configuration " + std::to_string(c) + " has mass but no preimage"});
      return r;
    }
  for (std::size_t li = 0; li + 1 < m.conditionals.size(); ++li)
    for (const auto& row : m.conditionals[li].rows)
      for (const auto& [code, p] : row)
        if (p > 0.0 && m.conditionals[li + 1].rows[code].empty()) {
          r.violations.push_back({"dead branch", "level " + std::to_string(m.conditionals[li + 1].level) + " configuration " +
                                                     std::to_string(code) + " has mass but no preimage"});
          return r;
        }
  return r;
}

inline void require_valid(const DiscreteSelectionModel& m) {
  auto r = validate_model(m);
  if (!r.ok()) throw ValidationError("invalid discrete model: " + r.violations.front().kind + ": " +
                                     r.violations.front().message);
}

// Per-node positive value weights; the preimage mass of a finer configuration is
// proportional to the product of its node weights. Empty weights mean uniform.
using PreimageWeights = std::vector<std::vector<double>>;

inline void build_conditionals(DiscreteSelectionModel& m, const PreimageWeights& weights = {}) {
  m.conditionals.assign(static_cast<std::size_t>(m.bottom_level() - m.top_level()), {});
  // Built finest first so that a row only keeps finer configurations that are
  // themselves reachable; dead coarser configurations end up with empty rows.
  std::vector<bool> live_fine;
  for (int l = m.bottom_level() - 1; l >= m.top_level(); --l) {
    LevelConditional lc;
    lc.level = l;
    lc.rows.assign(m.level_radix(l).size(), {});
    auto fine_nodes = m.level_nodes(l + 1);
    Radix fr = m.level_radix(l + 1);
    for (std::uint64_t s = 0; s < fr.size(); ++s) {
      if (!live_fine.empty() && !live_fine[s]) continue;
      double w = 1.0;
      if (!weights.empty())
        for (std::size_t i = 0; i < fine_nodes.size(); ++i) w *= weights.at(fine_nodes[i]).at(fr.digit(s, i));
      if (w <= 0.0) continue;
      lc.rows[m.select_up(l, s)].push_back({s, w});
    }
    live_fine.assign(lc.rows.size(), false);
    for (std::size_t c = 0; c < lc.rows.size(); ++c) {
      auto& row = lc.rows[c];
      double t = 0.0;
      for (const auto& e : row) t += e.second;
      for (auto& e : row) e.second /= t;
      live_fine[c] = !row.empty();
    }
    m.conditionals[static_cast<std::size_t>(l - m.top_level())] = std::move(lc);
  }
}

inline std::uint64_t bottom_state_count(const DiscreteSelectionModel& m) {
  long double c = 1;
  for (int v : m.observed()) c *= m.supports[v];
  return c > 1.8e19L ? UINT64_MAX : static_cast<std::uint64_t>(c);
}

// Exact P over all nodes (id order) or over the bottom level only.
inline JointTable exact_joint(const DiscreteSelectionModel& m, bool observed_only = false,
                              std::uint64_t cap = 10'000'000ULL) {
  require_valid(m);
  std::uint64_t count = bottom_state_count(m);
  if (count > cap)
    throw SizeError("joint support of " + std::to_string(count) + " states exceeds cap " + std::to_string(cap), count);

  std::vector<int> vars = observed_only ? m.observed() : std::vector<int>{};
  if (!observed_only)
    for (int i = 0; i < m.graph.size(); ++i) vars.push_back(i);
  std::vector<std::string> names;
  std::vector<int> sups;
  std::vector<int> pos(m.graph.size(), -1);
  for (std::size_t i = 0; i < vars.size(); ++i) {
    names.push_back(m.graph.node(vars[i]).name);
    sups.push_back(m.supports[vars[i]]);
    pos[vars[i]] = static_cast<int>(i);
  }
  JointTable out(names, sups);
  const Radix& R = out.radix();

  const int top = m.top_level();
  std::vector<std::vector<int>> level_nodes;
  std::vector<Radix> radices;
  for (int l = top; l <= m.bottom_level(); ++l) {
    level_nodes.push_back(m.level_nodes(l));
    radices.push_back(m.level_radix(l));
  }
  std::vector<JointTable::Entry> entries;
  entries.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 22)));

  auto contribution = [&](std::size_t li, std::uint64_t code) {
    std::uint64_t c = 0;
    for (std::size_t i = 0; i < level_nodes[li].size(); ++i) {
      int p = pos[level_nodes[li][i]];
      if (p >= 0) c += static_cast<std::uint64_t>(radices[li].digit(code, i)) * R.stride(p);
    }
    return c;
  };

  auto recurse = [&](auto&& self, std::size_t li, std::uint64_t code, double p, std::uint64_t acc) -> void {
    acc += contribution(li, code);
    if (li + 1 == level_nodes.size()) {
      entries.push_back({acc, p});
      return;
    }
    for (const auto& [fine, q] : m.conditionals[li].rows[code])
      if (q > 0.0) self(self, li + 1, fine, p * q, acc);
  };
  for (std::uint64_t c = 0; c < m.top_prior.size(); ++c)
    if (m.top_prior[c] > 0.0) recurse(recurse, 0, c, m.top_prior[c], 0);
  out.assign(std::move(entries));
  return out;
}

// Ancestral top-down sampling; columns are all nodes in id order.
inline Dataset sample(const DiscreteSelectionModel& m, int n, std::uint64_t seed) {
  require_valid(m);
  if (n < 0) throw DomainError("sample count must be nonnegative");
  Rng rng = make_rng(seed, 0xD15C);
  const int L = m.graph.size();
  Dataset d;
  d.discrete = true;
  d.seed = seed;
  for (const auto& node : m.graph.nodes()) {
    d.labels.push_back(node.name);
    d.levels.push_back(node.level);
  }
  d.values.setZero(n, L);
  std::vector<std::vector<int>> level_nodes;
  std::vector<Radix> radices;
  for (int l = m.top_level(); l <= m.bottom_level(); ++l) {
    level_nodes.push_back(m.level_nodes(l));
    radices.push_back(m.level_radix(l));
  }
  std::vector<double> w;
  for (int r = 0; r < n; ++r) {
    std::uint64_t code = draw_index(rng, m.top_prior);
    for (std::size_t li = 0;; ++li) {
      for (std::size_t i = 0; i < level_nodes[li].size(); ++i)
        d.values(r, level_nodes[li][i]) = radices[li].digit(code, i);
      if (li + 1 == level_nodes.size()) break;
      const auto& row = m.conditionals[li].rows[code];
      if (row.empty()) throw ValidationError("sampled a configuration with an empty preimage");
      w.resize(row.size());
      for (std::size_t k = 0; k < row.size(); ++k) w[k] = row[k].second;
      code = row[draw_index(rng, w)].first;
    }
  }
  d.validate();
  return d;
}

}  // namespace hsel
