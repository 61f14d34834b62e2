#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hsel/common/combinatorics.hpp"
#include "hsel/common/error.hpp"
#include "hsel/ident/latents.hpp"
#include "hsel/model/continuous_model.hpp"
#include "hsel/model/discrete_generators.hpp"
#include "hsel/model/discrete_model.hpp"

namespace hsel {

enum class Verdict { pass, fail, inapplicable, unchecked };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inapplicable: return "inapplicable";
    case Verdict::unchecked: return "unchecked";
  }
  return "?";
}

struct NodeDiagnostic {
  std::string check;
  std::string node;
  Verdict verdict = Verdict::inapplicable;
  std::string detail;
  double evidence = 0.0;
};

struct ConditionReport {
  std::map<std::string, Verdict> verdicts;  // condition id -> verdict
  std::vector<NodeDiagnostic> nodes;
  std::map<std::string, double> evidence;

  Verdict verdict(const std::string& id) const {
    auto it = verdicts.find(id);
    return it == verdicts.end() ? Verdict::unchecked : it->second;
  }
  bool passes(std::initializer_list<const char*> ids) const {
    for (const char* id : ids)
      if (verdict(id) != Verdict::pass) return false;
    return true;
  }
  void merge(const ConditionReport& other) {
    for (const auto& [k, v] : other.verdicts) verdicts[k] = v;
    nodes.insert(nodes.end(), other.nodes.begin(), other.nodes.end());
    for (const auto& [k, v] : other.evidence) evidence[k] = v;
  }
};

namespace detail {

// pass iff every applicable node passes; inapplicable when none applies.
inline Verdict fold_verdicts(const std::vector<NodeDiagnostic>& nodes, const std::string& check) {
  bool any = false;
  for (const auto& n : nodes) {
    if (n.check != check || n.verdict == Verdict::inapplicable) continue;
    any = true;
    if (n.verdict == Verdict::fail) return Verdict::fail;
  }
  return any ? Verdict::pass : Verdict::inapplicable;
}

inline std::string name_list(const SelectionGraph& g, const std::vector<int>& ids) {
  std::string s = "{";
  for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? "," : "") + g.node(ids[i]).name;
  return s + "}";
}

}  // namespace detail

// For every node with coarser concepts: some subset of them has that node as
// the only common finer constituent.
inline ConditionReport check_sparse_connectivity(const SelectionGraph& g) {
  ConditionReport rep;
  for (int v = 0; v < g.size(); ++v) {
    NodeDiagnostic d{"1-iv", g.node(v).name};
    const auto& ch = g.children(v);
    if (ch.empty()) {
      d.detail = "no coarser concepts";
      rep.nodes.push_back(d);
      continue;
    }
    if (ch.size() > 20) throw SizeError("too many coarser concepts for exhaustive subset search", ch.size());
    d.verdict = Verdict::fail;
    for (std::uint32_t mask = 1; mask < (1u << ch.size()); ++mask) {
      std::set<int> inter;
      bool first = true;
      std::vector<int> subset;
      for (std::size_t i = 0; i < ch.size(); ++i) {
        if (!(mask >> i & 1u)) continue;
        subset.push_back(ch[i]);
        const auto& pa = g.parents(ch[i]);
        if (first) {
          inter.insert(pa.begin(), pa.end());
          first = false;
        } else {
          std::set<int> next;
          for (int p : pa)
            if (inter.count(p)) next.insert(p);
          inter.swap(next);
        }
      }
      if (inter.size() == 1 && *inter.begin() == v) {
        d.verdict = Verdict::pass;
        d.detail = "witness " + detail::name_list(g, subset);
        break;
      }
    }
    if (d.verdict == Verdict::fail) d.detail = "every subset of " + detail::name_list(g, ch) + " shares another constituent";
    rep.nodes.push_back(d);
  }
  rep.verdicts["1-iv"] = detail::fold_verdicts(rep.nodes, "1-iv");
  return rep;
}

// Score vectors d/dz~ log p(z~ | z) at probe values of z, one row per probe value.
struct ScoreProbe {
  int target = -1;
  std::vector<int> constituents;
  std::vector<double> probe_values;
  Eigen::MatrixXd score_vectors;
  double rank_tolerance = 1e-8;
};

// Relative smallest singular value of the difference vectors w(., z_n) - w(., z_0).
inline double probe_conditioning(const ScoreProbe& p) {
  const Eigen::Index n = p.score_vectors.rows() - 1;
  if (n < 1) return 0.0;
  Eigen::MatrixXd diff(n, p.score_vectors.cols());
  for (Eigen::Index k = 0; k < n; ++k) diff.row(k) = p.score_vectors.row(k + 1) - p.score_vectors.row(0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(diff);
  const auto& s = svd.singularValues();
  if (s.size() < p.score_vectors.cols() || s(0) <= 0.0) return 0.0;
  return s(s.size() - 1) / s(0);
}

inline std::vector<double> equispaced_probes(int count, double lo = -2.0, double hi = 2.0) {
  std::vector<double> out;
  for (int k = 0; k < count; ++k) out.push_back(count == 1 ? lo : lo + (hi - lo) * k / (count - 1));
  return out;
}

// Probe from an arbitrary log density log p(z~ | z) by central differences.
inline ScoreProbe score_probe_from_log_density(const std::function<double(const std::vector<double>&, double)>& log_density,
                                               const std::vector<double>& at, const std::vector<double>& probe_values,
                                               double step = 1e-5) {
  ScoreProbe p;
  p.probe_values = probe_values;
  p.score_vectors.resize(static_cast<Eigen::Index>(probe_values.size()), static_cast<Eigen::Index>(at.size()));
  for (std::size_t k = 0; k < probe_values.size(); ++k)
    for (std::size_t i = 0; i < at.size(); ++i) {
      auto up = at, dn = at;
      up[i] += step;
      dn[i] -= step;
      p.score_vectors(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
          (log_density(up, probe_values[k]) - log_density(dn, probe_values[k])) / (2.0 * step);
    }
  return p;
}

// Analytic probe for one node of a continuous model at one grid point (values of every node).
inline ScoreProbe score_probe(const ContinuousSelectionModel& m, int node, const std::vector<double>& at) {
  ScoreProbe p;
  p.target = node;
  p.constituents = m.graph.parents(node);
  const int n = static_cast<int>(p.constituents.size());
  const auto& e = m.equations.at(node);
  if (e.categories > 0) {
    if (e.categories < n + 1) throw DomainError(m.graph.node(node).name + " has fewer states than probe values required");
    for (int k = 0; k <= n; ++k) p.probe_values.push_back(k);
  } else {
    p.probe_values = equispaced_probes(n + 1);
  }
  p.score_vectors.resize(n + 1, n);
  auto vals = at;
  for (int k = 0; k <= n; ++k) {
    vals[node] = p.probe_values[k];
    for (int i = 0; i < n; ++i) {
      int c = p.constituents[i];
      p.score_vectors(k, i) = m.score(c, vals[c], vals);
    }
  }
  return p;
}

inline std::vector<std::vector<double>> default_probe_grid(const ContinuousSelectionModel& m, int points, std::uint64_t seed) {
  Dataset d = sample(m, points, seed);
  std::vector<std::vector<double>> grid;
  for (int r = 0; r < points; ++r) {
    std::vector<double> v(m.graph.size());
    for (int c = 0; c < m.graph.size(); ++c) v[c] = d.values(r, c);
    grid.push_back(std::move(v));
  }
  return grid;
}

inline ConditionReport check_sufficient_variability(const ContinuousSelectionModel& m, int node,
                                                    const std::vector<std::vector<double>>& grid, double tol = 1e-8) {
  ConditionReport rep;
  NodeDiagnostic d{"1-iii", m.graph.node(node).name};
  if (m.graph.parents(node).empty()) {
    d.detail = "no finer constituents";
  } else {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& at : grid) {
      auto probe = score_probe(m, node, at);
      worst = std::min(worst, probe_conditioning(probe));
    }
    d.evidence = grid.empty() ? 0.0 : worst;
    d.verdict = !grid.empty() && worst > tol ? Verdict::pass : Verdict::fail;
    d.detail = "min relative singular value " + std::to_string(d.evidence);
  }
  rep.nodes.push_back(d);
  rep.verdicts["1-iii"] = detail::fold_verdicts(rep.nodes, "1-iii");
  return rep;
}

struct ContinuousCheckOptions {
  int grid_points = 16;
  int jacobian_points = 16;
  double rank_tolerance = 1e-8;
  double jacobian_tolerance = 1e-6;
  std::uint64_t seed = 0;
};

inline ConditionReport check_continuous_conditions(const ContinuousSelectionModel& m, const ContinuousCheckOptions& opt = {}) {
  require_valid(m);
  ConditionReport rep;
  double cond = observation_conditioning(m, opt.jacobian_points, opt.seed);
  rep.evidence["observation_conditioning"] = cond;
  rep.verdicts["1-i"] = cond > opt.jacobian_tolerance ? Verdict::pass : Verdict::fail;

  bool smooth = true;
  for (int v = 0; v < m.graph.size(); ++v)
    if (m.equations[v].noise == NoiseFamily::laplace && !m.graph.parents(v).empty()) smooth = false;
  rep.verdicts["1-ii"] = smooth ? Verdict::pass : Verdict::fail;

  auto grid = default_probe_grid(m, opt.grid_points, opt.seed);
  ConditionReport iii;
  for (int v = 0; v < m.graph.size(); ++v) {
    if (!smooth) break;
    auto r = check_sufficient_variability(m, v, grid, opt.rank_tolerance);
    iii.nodes.insert(iii.nodes.end(), r.nodes.begin(), r.nodes.end());
  }
  rep.nodes.insert(rep.nodes.end(), iii.nodes.begin(), iii.nodes.end());
  rep.verdicts["1-iii"] = smooth ? detail::fold_verdicts(iii.nodes, "1-iii") : Verdict::fail;
  rep.merge(check_sparse_connectivity(m.graph));
  return rep;
}

// Condition 2 i-iv on an enumerable discrete model; v is reported unchecked.
inline ConditionReport check_discrete_conditions(const DiscreteSelectionModel& m, double tol = 1e-9) {
  ConditionReport rep;
  JointTable j = exact_joint(m, false);
  const auto& g = m.graph;
  std::vector<std::vector<int>> supp(g.size());
  for (int v = 0; v < g.size(); ++v) supp[v] = j.support_of(v);

  for (int s : m.latents()) {
    const auto& f = m.functions[s];
    const auto& pa = g.parents(s);
    const std::string name = g.node(s).name;

    // i: image of the selection over the product of the parents' supports.
    {
      NodeDiagnostic d{"2-i", name};
      std::set<int> image;
      std::vector<int> x(pa.size(), 0);
      std::vector<int> idx(pa.size(), 0);
      bool empty = false;
      for (int p : pa) empty = empty || supp[p].empty();
      while (!empty) {
        for (std::size_t i = 0; i < pa.size(); ++i) x[i] = supp[pa[i]][idx[i]];
        image.insert(apply_selection(f, x));
        std::size_t i = pa.size();
        while (i > 0) {
          --i;
          if (++idx[i] < static_cast<int>(supp[pa[i]].size())) break;
          idx[i] = 0;
          if (i == 0) empty = true;
        }
        if (pa.empty()) break;
      }
      std::set<int> own(supp[s].begin(), supp[s].end());
      bool subset = std::includes(image.begin(), image.end(), own.begin(), own.end());
      d.verdict = subset && own.size() < image.size() ? Verdict::pass : Verdict::fail;
      d.evidence = static_cast<double>(image.size());
      d.detail = "support " + std::to_string(own.size()) + " within image " + std::to_string(image.size());
      rep.nodes.push_back(d);
    }

    // ii: fewer states than positive parent configurations.
    {
      NodeDiagnostic d{"2-ii", name};
      std::size_t joint = j.marginal(pa).entries().size();
      d.verdict = supp[s].size() < joint ? Verdict::pass : Verdict::fail;
      d.evidence = static_cast<double>(joint);
      d.detail = "support " + std::to_string(supp[s].size()) + " vs joint parent support " + std::to_string(joint);
      rep.nodes.push_back(d);
    }

    // iii: distinct states give distinct conditionals of the rest of the finer level,
    // for every value of the shared constituents.
    {
      NodeDiagnostic d{"2-iii", name};
      std::vector<int> hybrid;
      for (int p : pa)
        if (g.children(p).size() > 1) hybrid.push_back(p);
      std::vector<int> rest;
      for (int v : m.level_nodes(g.node(s).level + 1))
        if (std::find(pa.begin(), pa.end(), v) == pa.end()) rest.push_back(v);
      if (rest.empty()) {
        d.verdict = Verdict::fail;
        d.detail = "no other variables on the finer level";
      } else {
        std::vector<int> sh, sr;
        for (int v : hybrid) sh.push_back(m.supports[v]);
        for (int v : rest) sr.push_back(m.supports[v]);
        Radix rh(sh), rr(sr);
        std::map<std::uint64_t, std::map<int, detail::Distribution>> cond;
        for (const auto& e : j.entries()) cond[j.project(e.code, hybrid, rh)][j.value(e, s)][j.project(e.code, rest, rr)] += e.p;
        d.verdict = Verdict::pass;
        double closest = std::numeric_limits<double>::infinity();
        for (const auto& [h, by_state] : cond)
          for (auto a = by_state.begin(); a != by_state.end(); ++a)
            for (auto b = std::next(a); b != by_state.end(); ++b) {
              double gap = detail::distribution_gap(a->second, b->second);
              closest = std::min(closest, gap);
              if (gap <= tol && d.verdict == Verdict::pass) {
                d.verdict = Verdict::fail;
                d.detail = "states " + std::to_string(a->first) + " and " + std::to_string(b->first) +
                           " share a downstream conditional";
              }
            }
        d.evidence = std::isfinite(closest) ? closest : 0.0;
        if (d.verdict == Verdict::pass) d.detail = "closest pair gap " + std::to_string(d.evidence);
      }
      rep.nodes.push_back(d);
    }
  }

  // iv: latents on one level have pairwise distinct adjacency.
  for (int l = m.top_level(); l < m.bottom_level(); ++l) {
    auto nodes = m.level_nodes(l);
    for (int s : nodes) {
      NodeDiagnostic d{"2-iv", g.node(s).name, Verdict::pass};
      auto adj = [&](int v) {
        std::set<int> a(g.parents(v).begin(), g.parents(v).end());
        a.insert(g.children(v).begin(), g.children(v).end());
        return a;
      };
      for (int t : nodes)
        if (t != s && adj(t) == adj(s)) {
          d.verdict = Verdict::fail;
          d.detail = "same adjacency as " + g.node(t).name;
        }
      rep.nodes.push_back(d);
    }
  }

  for (const char* c : {"2-i", "2-ii", "2-iii", "2-iv"}) rep.verdicts[c] = detail::fold_verdicts(rep.nodes, c);
  rep.verdicts["2-v"] = Verdict::unchecked;
  bool degenerate = false;
  for (int v = 0; v < g.size(); ++v) degenerate = degenerate || supp[v].size() <= 1;
  rep.evidence["degenerate_supports"] = degenerate ? 1.0 : 0.0;
  return rep;
}

struct CorpusEntry {
  std::uint64_t seed = 0;
  DiscreteSelectionModel model;
};

// Generated models passing Condition 2 i-iv, in seed order starting at first_seed.
inline std::vector<CorpusEntry> condition2_corpus(int count, const RandomDiscreteSpec& spec = {}, std::uint64_t first_seed = 0,
                                                  int max_attempts = 1000) {
  std::vector<CorpusEntry> out;
  for (std::uint64_t s = first_seed; static_cast<int>(out.size()) < count; ++s) {
    if (static_cast<int>(s - first_seed) >= max_attempts)
      throw BudgetError("only " + std::to_string(out.size()) + " corpus models within " + std::to_string(max_attempts) + " seeds");
    try {
      auto m = random_discrete_model(spec, s);
      if (check_discrete_conditions(m).passes({"2-i", "2-ii", "2-iii", "2-iv"})) out.push_back({s, std::move(m)});
    } catch (const ValidationError&) {
    }
  }
  return out;
}

}  // namespace hsel
