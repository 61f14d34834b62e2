#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hsel/ident/identify.hpp"
#include "hsel/model/discrete_model.hpp"

namespace hsel {

struct NodeMatch {
  std::string truth;
  std::string learned;
  std::map<int, int> bijection;  // truth value -> learned state
};

struct MatchReport {
  bool witness = false;
  std::vector<NodeMatch> matches;  // the witness, or the best partial match found
  int matched = 0;
  int truth_latents = 0;
  int learned_latents = 0;
  std::vector<std::string> diagnostics;
};

namespace detail {

// Positive parent tuples of each truth latent and the positive support of every node.
struct TruthSupport {
  std::map<int, std::vector<std::vector<int>>> parent_tuples;
  std::map<int, std::vector<int>> support;
};

inline TruthSupport truth_support(const DiscreteSelectionModel& truth) {
  TruthSupport ts;
  JointTable j = exact_joint(truth, false);
  for (int v = 0; v < truth.graph.size(); ++v) ts.support[v] = j.support_of(v);
  for (int s : truth.latents()) {
    const auto& pa = truth.graph.parents(s);
    JointTable m = j.marginal(pa);
    for (const auto& e : m.entries()) ts.parent_tuples[s].push_back(m.config(e));
  }
  return ts;
}

struct MatchContext {
  const DiscreteSelectionModel& truth;
  const LearnedDiscreteModel& learned;
  const TruthSupport& ts;
  std::map<int, int> to_learned;                // truth node -> learned node
  std::map<int, std::map<int, int>> bijection;  // truth node -> (truth value -> learned value)
};

// Bijection induced by commuting selections, or a diagnostic explaining why none exists.
inline std::optional<std::map<int, int>> induced_bijection(const MatchContext& ctx, int t, int l, std::string* why) {
  const auto& tpa = ctx.truth.graph.parents(t);
  const auto& lf = ctx.learned.functions.at(l);
  std::set<int> mapped;
  for (int p : tpa) {
    auto it = ctx.to_learned.find(p);
    if (it == ctx.to_learned.end()) return std::nullopt;
    mapped.insert(it->second);
  }
  if (mapped != std::set<int>(lf.parents.begin(), lf.parents.end())) {
    if (why) *why = "parent sets differ";
    return std::nullopt;
  }
  std::map<int, int> fwd, back;
  const auto& tf = ctx.truth.functions.at(t);
  std::vector<int> lvals(lf.parents.size());
  for (const auto& x : ctx.ts.parent_tuples.at(t)) {
    int tv = tf.table[tf.radix().encode(x)];
    for (std::size_t i = 0; i < tpa.size(); ++i) {
      int lp = ctx.to_learned.at(tpa[i]);
      auto pos = std::find(lf.parents.begin(), lf.parents.end(), lp) - lf.parents.begin();
      lvals[pos] = ctx.bijection.at(tpa[i]).at(x[i]);
    }
    int lv = lf.table[lf.radix().encode(lvals)];
    if (lv < 0) {
      if (why) *why = "learned selection undefined on a positive parent tuple";
      return std::nullopt;
    }
    auto [fi, fnew] = fwd.emplace(tv, lv);
    auto [bi, bnew] = back.emplace(lv, tv);
    if (fi->second != lv) {
      if (why) *why = "truth state " + std::to_string(tv) + " split across learned states";
      return std::nullopt;
    }
    if (bi->second != tv) {
      if (why)
        *why = "truth states " + std::to_string(bi->second) + " and " + std::to_string(tv) + " merged into learned state " +
               std::to_string(lv);
      return std::nullopt;
    }
  }
  if (static_cast<int>(back.size()) != ctx.learned.supports.at(l)) {
    if (why) *why = "learned state count differs from truth support";
    return std::nullopt;
  }
  return fwd;
}

}  // namespace detail

// Searches level by level for a permutation of latents and per-latent state
// bijections under which truth and learned selections commute.
inline MatchReport check_componentwise_equivalence(const DiscreteSelectionModel& truth, const LearnedDiscreteModel& learned) {
  MatchReport rep;
  auto ts = detail::truth_support(truth);
  const int Kt = truth.bottom_level() - truth.top_level();
  const int Kl = learned.learned_levels;
  rep.truth_latents = static_cast<int>(truth.latents().size());
  for (int k = 1; k <= Kl; ++k) rep.learned_latents += static_cast<int>(learned.learned_level_nodes(k).size());

  detail::MatchContext base{truth, learned, ts, {}, {}};
  for (int v : truth.observed()) {
    int l = learned.graph.find(truth.graph.node(v).name);
    if (l < 0 || learned.graph.node(l).level != learned.bottom_level()) {
      rep.diagnostics.push_back("observed variable " + truth.graph.node(v).name + " missing from learned model");
      return rep;
    }
    base.to_learned[v] = l;
    for (int x = 0; x < truth.supports[v]; ++x) base.bijection[v][x] = x;
  }
  if (Kt != Kl) rep.diagnostics.push_back("level count differs: truth " + std::to_string(Kt) + ", learned " + std::to_string(Kl));

  std::vector<NodeMatch> current, best;
  auto search = [&](auto&& self, int k, detail::MatchContext ctx) -> bool {
    if (k > std::min(Kt, Kl)) {
      if (static_cast<int>(current.size()) > static_cast<int>(best.size())) best = current;
      return Kt == Kl && static_cast<int>(current.size()) == rep.truth_latents &&
             rep.truth_latents == rep.learned_latents;
    }
    auto tn = truth.level_nodes(truth.bottom_level() - k);
    auto ln = learned.learned_level_nodes(k);
    std::vector<std::vector<std::optional<std::map<int, int>>>> ok(tn.size(), std::vector<std::optional<std::map<int, int>>>(ln.size()));
    for (std::size_t a = 0; a < tn.size(); ++a)
      for (std::size_t b = 0; b < ln.size(); ++b) {
        std::string why;
        ok[a][b] = detail::induced_bijection(ctx, tn[a], ln[b], &why);
        if (!ok[a][b] && !why.empty() && why != "parent sets differ")
          rep.diagnostics.push_back(truth.graph.node(tn[a]).name + " vs " + learned.graph.node(ln[b]).name + ": " + why);
      }
    std::vector<char> used(ln.size(), 0);
    bool full_level = tn.size() == ln.size();
    auto assign = [&](auto&& me, std::size_t a, detail::MatchContext c) -> bool {
      if (a == tn.size()) {
        if (!full_level) {
          if (static_cast<int>(current.size()) > static_cast<int>(best.size())) best = current;
          return false;
        }
        return self(self, k + 1, c);
      }
      bool any = false;
      for (std::size_t b = 0; b < ln.size(); ++b) {
        if (used[b] || !ok[a][b]) continue;
        any = true;
        used[b] = 1;
        auto c2 = c;
        c2.to_learned[tn[a]] = ln[b];
        c2.bijection[tn[a]] = *ok[a][b];
        current.push_back({truth.graph.node(tn[a]).name, learned.graph.node(ln[b]).name, *ok[a][b]});
        bool done = me(me, a + 1, c2);
        if (done) return true;
        current.pop_back();
        used[b] = 0;
      }
      if (!any) {
        if (static_cast<int>(current.size()) > static_cast<int>(best.size())) best = current;
        return me(me, a + 1, c) && false;
      }
      return false;
    };
    return assign(assign, 0, ctx);
  };
  rep.witness = search(search, 1, base);
  rep.matches = rep.witness ? current : best;
  rep.matched = static_cast<int>(rep.matches.size());
  std::sort(rep.diagnostics.begin(), rep.diagnostics.end());
  rep.diagnostics.erase(std::unique(rep.diagnostics.begin(), rep.diagnostics.end()), rep.diagnostics.end());
  return rep;
}

}  // namespace hsel
