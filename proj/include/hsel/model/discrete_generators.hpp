#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hsel/common/rng.hpp"
#include "hsel/model/discrete_model.hpp"

namespace hsel {

// Literal leveled graph of the discrete running example: D1..D6 at level 3,
// S21..S24 at level 2, S11, S12 at level 1.
inline SelectionGraph figure3_graph() {
  SelectionGraph g;
  for (const char* n : {"S11", "S12"}) g.add_node(n, 1);
  for (const char* n : {"S21", "S22", "S23", "S24"}) g.add_node(n, 2);
  for (const char* n : {"D1", "D2", "D3", "D4", "D5", "D6"}) g.add_node(n, 3);
  for (const char* s : {"S21", "S22", "S23"}) g.add_edge(s, "S11");
  for (const char* s : {"S22", "S23", "S24"}) g.add_edge(s, "S12");
  g.add_edge("D1", "S21");
  g.add_edge("D1", "S22");
  g.add_edge("D2", "S21");
  g.add_edge("D2", "S22");
  g.add_edge("D3", "S22");
  g.add_edge("D4", "S23");
  g.add_edge("D5", "S22");
  g.add_edge("D5", "S24");
  g.add_edge("D6", "S23");
  g.add_edge("D6", "S24");
  return g;
}

struct TableConstraints {
  bool natural_selection = true;  // some real parent tuple maps to the rejected state
  bool cell_collisions = true;    // every informative single-parent cell is non-injective
  bool distinguishable = true;    // no two values of a parent are interchangeable
};

// Searches a random table over the parents' real states. Parents carrying a
// rejected state (index == real support) always map to the target's rejected state k.
inline std::optional<std::vector<int>> random_selection_table(const std::vector<int>& real, const std::vector<bool>& has_rej,
                                                              int k, const TableConstraints& tc, Rng& rng,
                                                              int max_tries = 200000) {
  const std::size_t n = real.size();
  Radix rr(real);
  std::vector<int> full(n);
  for (std::size_t i = 0; i < n; ++i) full[i] = real[i] + (has_rej[i] ? 1 : 0);
  Radix fr(full);
  const int REJ = k;
  const double q_rej = tc.natural_selection ? 0.18 : 0.0;
  std::vector<int> t(rr.size());

  auto ok = [&]() {
    std::vector<char> used(k, 0);
    bool any_rej = false;
    for (int v : t) {
      if (v == REJ)
        any_rej = true;
      else
        used[v] = 1;
    }
    if (std::count(used.begin(), used.end(), 1) != k) return false;
    if (tc.natural_selection && !any_rej) return false;
    for (std::size_t j = 0; j < n; ++j) {
      bool informative_rank2 = false;
      std::vector<char> value_alive(real[j], 0);
      std::vector<std::vector<int>> profile(real[j]);
      for (std::uint64_t c = 0; c < rr.size(); ++c) {
        if (rr.digit(c, j) != 0) continue;
        std::vector<int> outs;
        for (int a = 0; a < real[j]; ++a) {
          int o = t[c + static_cast<std::uint64_t>(a) * rr.stride(j)];
          profile[a].push_back(o);
          if (o != REJ) {
            outs.push_back(o);
            value_alive[a] = 1;
          }
        }
        std::set<int> distinct(outs.begin(), outs.end());
        if (tc.cell_collisions && outs.size() >= 2 && distinct.size() >= outs.size()) return false;
        if (distinct.size() >= 2) informative_rank2 = true;
      }
      if (std::count(value_alive.begin(), value_alive.end(), 1) != real[j]) return false;
      if (tc.cell_collisions && !informative_rank2) return false;
      if (tc.distinguishable)
        for (int a = 0; a < real[j]; ++a)
          for (int b = a + 1; b < real[j]; ++b)
            if (profile[a] == profile[b]) return false;
    }
    return true;
  };

  for (int attempt = 0; attempt < max_tries; ++attempt) {
    for (auto& v : t) v = (uniform01(rng) < q_rej) ? REJ : uniform_int(rng, 0, k - 1);
    if (!ok()) continue;
    std::vector<int> table(fr.size(), REJ);
    for (std::uint64_t c = 0; c < fr.size(); ++c) {
      auto vals = fr.decode(c);
      bool rej = false;
      for (std::size_t i = 0; i < n; ++i)
        if (vals[i] >= real[i]) rej = true;
      if (!rej) table[c] = t[rr.encode(vals)];
    }
    return table;
  }
  return std::nullopt;
}

struct RandomDiscreteSpec {
  int bottom_count = 8;
  // Group sizes per latent level, listed bottom-up; each group becomes one latent
  // whose parents are a disjoint block of the level below.
  std::vector<std::vector<int>> group_sizes{{2, 2, 2, 2}, {2, 2}};
  int bottom_support = 3;
  std::vector<int> latent_states{3, 2};  // candidate real-state counts, tried in order
  TableConstraints constraints{};
  bool factorized_weights = true;  // Dirichlet-style per-value preimage weights
  bool shuffle_groups = true;
  int max_retries = 100;
  double faithfulness_threshold = 1e-6;
};

struct FaithfulnessResult {
  bool ok = true;
  std::string detail;
};

// Every graph-implied dependence must carry mutual information above threshold:
// each parent with its latent, and every pair of observed nodes sharing a connected component.
inline FaithfulnessResult faithfulness_screen(const DiscreteSelectionModel& m, double threshold = 1e-6) {
  JointTable j = exact_joint(m, false);
  for (int s : m.latents())
    for (int d : m.graph.parents(s)) {
      std::vector<int> a{d}, b{s};
      if (mutual_information(j, a, b) <= threshold)
        return {false, m.graph.node(d).name + " carries no information about " + m.graph.node(s).name};
    }
  const int n = m.graph.size();
  std::vector<int> comp(n);
  std::iota(comp.begin(), comp.end(), 0);
  auto find = [&](int x) {
    while (comp[x] != x) x = comp[x] = comp[comp[x]];
    return x;
  };
  for (const auto& e : m.graph.edges()) comp[find(e.from)] = find(e.to);
  auto obs = m.observed();
  for (std::size_t a = 0; a < obs.size(); ++a)
    for (std::size_t b = a + 1; b < obs.size(); ++b) {
      if (find(obs[a]) != find(obs[b])) continue;
      std::vector<int> x{obs[a]}, y{obs[b]};
      if (mutual_information(j, x, y) <= threshold)
        return {false, m.graph.node(obs[a]).name + " and " + m.graph.node(obs[b]).name + " are independent"};
    }
  return {};
}

namespace detail {

// Groups of the level below become the parent blocks of one latent each.
inline SelectionGraph grouped_graph(const RandomDiscreteSpec& spec, Rng& rng) {
  const int L = static_cast<int>(spec.group_sizes.size());
  std::vector<std::string> names;
  std::vector<int> levels;
  std::vector<std::vector<int>> parents_of;
  std::vector<int> below;
  for (int i = 0; i < spec.bottom_count; ++i) {
    names.push_back("D" + std::to_string(i + 1));
    levels.push_back(L + 1);
    parents_of.emplace_back();
    below.push_back(i);
  }
  for (int k = 0; k < L; ++k) {
    int coarse_level = L - k;
    int total = std::accumulate(spec.group_sizes[k].begin(), spec.group_sizes[k].end(), 0);
    if (total != static_cast<int>(below.size())) throw ConfigError("group sizes do not cover the level below");
    if (spec.shuffle_groups) std::shuffle(below.begin(), below.end(), rng);
    std::vector<int> next;
    std::size_t at = 0;
    for (std::size_t gi = 0; gi < spec.group_sizes[k].size(); ++gi) {
      std::vector<int> pa(below.begin() + at, below.begin() + at + spec.group_sizes[k][gi]);
      at += spec.group_sizes[k][gi];
      std::sort(pa.begin(), pa.end());
      next.push_back(static_cast<int>(names.size()));
      names.push_back("S" + std::to_string(coarse_level) + std::to_string(gi + 1));
      levels.push_back(coarse_level);
      parents_of.push_back(pa);
    }
    below = next;
  }
  std::vector<int> order(names.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return levels[a] < levels[b]; });
  std::vector<int> new_id(names.size());
  SelectionGraph g;
  for (std::size_t i = 0; i < order.size(); ++i) {
    new_id[order[i]] = static_cast<int>(i);
    g.add_node(names[order[i]], levels[order[i]]);
  }
  for (std::size_t v = 0; v < names.size(); ++v)
    for (int p : parents_of[v]) g.add_edge(new_id[p], new_id[v]);
  return g;
}

}  // namespace detail

struct TableSpec {
  int bottom_support = 3;
  std::vector<int> latent_states{3, 2};
  TableConstraints constraints{};
  bool factorized_weights = true;
};

// Fills selection tables, top prior and level conditionals on a fixed graph.
// Latents get one extra rejected state when natural selection is requested.
inline std::optional<DiscreteSelectionModel> random_tables_on_graph(const SelectionGraph& g, const TableSpec& spec,
                                                                    Rng& rng) {
  DiscreteSelectionModel m;
  m.graph = g;
  const int N = g.size();
  const int bottom = g.max_level();
  std::vector<int> real(N, spec.bottom_support);
  std::vector<bool> rej(N, false);
  m.functions.assign(N, SelectionFunction{});
  for (int lvl = bottom - 1; lvl >= g.min_level(); --lvl) {
    for (int v : g.level_nodes(lvl)) {
      const auto& pa = g.parents(v);
      std::vector<int> pr, psup;
      std::vector<bool> prej;
      std::uint64_t real_count = 1;
      for (int p : pa) {
        pr.push_back(real[p]);
        prej.push_back(rej[p]);
        psup.push_back(real[p] + (rej[p] ? 1 : 0));
        real_count *= static_cast<std::uint64_t>(real[p]);
      }
      std::optional<std::vector<int>> table;
      int k_used = 0;
      for (int k : spec.latent_states) {
        if (static_cast<std::uint64_t>(k) >= real_count) continue;
        table = random_selection_table(pr, prej, k, spec.constraints, rng, 20000);
        if (table) {
          k_used = k;
          break;
        }
      }
      if (!table) return std::nullopt;
      real[v] = k_used;
      rej[v] = spec.constraints.natural_selection;
      m.functions[v] = make_selection(v, pa, psup, *table);
    }
  }
  m.supports.resize(N);
  for (int v = 0; v < N; ++v) m.supports[v] = real[v] + (rej[v] ? 1 : 0);

  const int top_level = g.min_level();
  Radix top = m.level_radix(top_level);
  auto top_nodes = m.level_nodes(top_level);
  std::vector<std::uint64_t> admissible;
  for (std::uint64_t c = 0; c < top.size(); ++c) {
    bool okc = true;
    for (std::size_t i = 0; i < top_nodes.size(); ++i)
      if (top.digit(c, i) >= real[top_nodes[i]]) okc = false;
    if (okc) admissible.push_back(c);
  }
  auto w = dirichlet(rng, admissible.size(), 1.0);
  m.top_prior.assign(top.size(), 0.0);
  for (std::size_t i = 0; i < admissible.size(); ++i) m.top_prior[admissible[i]] = w[i];

  PreimageWeights pw;
  if (spec.factorized_weights) {
    std::gamma_distribution<double> gd(4.0, 0.25);
    pw.resize(N);
    for (int v = 0; v < N; ++v) {
      pw[v].resize(m.supports[v]);
      for (auto& x : pw[v]) x = gd(rng);
    }
  }
  build_conditionals(m, pw);
  double mass = 0.0;
  for (std::uint64_t c = 0; c < m.top_prior.size(); ++c) {
    if (!m.conditionals.empty() && m.conditionals.front().rows[c].empty()) m.top_prior[c] = 0.0;
    mass += m.top_prior[c];
  }
  if (mass <= 0.0) return std::nullopt;
  for (auto& p : m.top_prior) p /= mass;
  if (!validate_model(m).ok()) return std::nullopt;
  return m;
}

// Draws a random leveled discrete model and resamples until it is valid and
// passes the faithfulness screen.
inline DiscreteSelectionModel random_discrete_model(const RandomDiscreteSpec& spec, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x6E4E);
  std::string last = "no admissible selection table";
  for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
    SelectionGraph g = detail::grouped_graph(spec, rng);
    TableSpec ts{spec.bottom_support, spec.latent_states, spec.constraints, spec.factorized_weights};
    auto m = random_tables_on_graph(g, ts, rng);
    if (!m) continue;
    auto f = faithfulness_screen(*m, spec.faithfulness_threshold);
    if (f.ok) return *m;
    last = f.detail;
  }
  throw ValidationError("random model generation failed after " + std::to_string(spec.max_retries) +
                        " retries: " + last);
}

// Random tables on the literal level-3 running-example graph, screened for faithfulness.
inline DiscreteSelectionModel figure3_model(std::uint64_t seed, int max_retries = 100) {
  Rng rng = make_rng(seed, 0xF163);
  TableSpec ts;
  ts.constraints.cell_collisions = false;
  SelectionGraph g = figure3_graph();
  std::string last = "no admissible selection table";
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    auto m = random_tables_on_graph(g, ts, rng);
    if (!m) continue;
    auto f = faithfulness_screen(*m);
    if (f.ok) return *m;
    last = f.detail;
  }
  throw ValidationError("figure-3 model generation failed: " + last);
}

}  // namespace hsel
