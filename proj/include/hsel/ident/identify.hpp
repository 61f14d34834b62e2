#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hsel/ident/coparents.hpp"
#include "hsel/ident/latents.hpp"
#include "hsel/model/graph.hpp"
#include "hsel/model/joint_table.hpp"

namespace hsel {

struct ProvenanceEntry {
  std::string latent;
  std::string parent;
  std::vector<std::string> conditioning_set;
  int informative_cells = 0;
  int max_rank = 0;
};

// Recovered hierarchy. Observed variables sit on the bottom level; learned
// level k (1 = just above the observations) sits on graph level K + 1 - k.
struct LearnedDiscreteModel {
  SelectionGraph graph;
  std::vector<int> supports;
  std::vector<SelectionFunction> functions;  // by node id; target == -1 for observed nodes
  std::vector<ProvenanceEntry> provenance;
  std::optional<std::string> error;
  int learned_levels = 0;

  int bottom_level() const { return graph.max_level(); }
  std::vector<int> observed() const { return graph.level_nodes(bottom_level()); }
  // Latents of learned level k, counted upward from the observations.
  std::vector<int> learned_level_nodes(int k) const { return graph.level_nodes(bottom_level() - k); }
};

struct IdentifyOptions {
  int level_cap = 8;
  int search_cap = 4;
  double tolerance = 1e-9;
  NmfOptions nmf{};
};

struct LevelRecovery {
  LatentLayer layer;
  std::vector<MergeResult> merges;
  std::vector<ProvenanceEntry> provenance;
};

// Values of the new latents for every entry of the current joint, as a joint over the latents.
inline JointTable push_forward(const JointTable& j, const std::vector<MergeResult>& merges,
                               const std::vector<std::string>& names) {
  std::vector<int> sup;
  for (const auto& m : merges) sup.push_back(m.states);
  JointTable out(names, sup);
  const Radix& R = out.radix();
  std::unordered_map<std::uint64_t, double> acc;
  std::vector<Radix> pr;
  for (const auto& m : merges) pr.push_back(m.function.radix());
  for (const auto& e : j.entries()) {
    std::uint64_t code = 0;
    for (std::size_t i = 0; i < merges.size(); ++i) {
      int v = merges[i].function.table[j.project(e.code, merges[i].function.parents, pr[i])];
      if (v < 0) throw StructureError("learned selection undefined on a positive configuration");
      code += static_cast<std::uint64_t>(v) * R.stride(i);
    }
    acc[code] += e.p;
  }
  std::vector<JointTable::Entry> es;
  for (const auto& [c, p] : acc) es.push_back({c, p});
  out.assign(std::move(es));
  return out;
}

inline LearnedDiscreteModel identify_hierarchy(const JointTable& joint, const IdentifyOptions& opt = {}) {
  std::vector<std::vector<std::string>> level_names{joint.names()};
  std::vector<std::vector<int>> level_supports{joint.supports()};
  std::vector<LevelRecovery> levels;
  std::optional<std::string> error;

  JointTable current = joint;
  for (int k = 1; k <= opt.level_cap; ++k) {
    try {
      LevelRecovery rec;
      std::map<int, std::vector<int>> cop;
      std::map<int, CoparentResult> evidence;
      for (int d = 0; d < static_cast<int>(current.arity()); ++d) {
        try {
          auto r = find_coparents_detailed(current, d, opt.search_cap, opt.nmf);
          cop[d] = r.set;
          evidence[d] = r;
        } catch (const NoBottleneckError&) {
        }
      }
      if (cop.empty()) break;
      rec.layer = introduce_latents(cop);
      std::vector<std::string> names;
      for (std::size_t i = 0; i < rec.layer.latents.size(); ++i) {
        names.push_back("L" + std::to_string(k) + "_" + std::to_string(i));
        rec.merges.push_back(merge_states(current, rec.layer, i, opt.tolerance));
        for (int d : rec.layer.latents[i].parents) {
          ProvenanceEntry p;
          p.latent = names.back();
          p.parent = current.names()[d];
          for (int c : evidence[d].set) p.conditioning_set.push_back(current.names()[c]);
          p.informative_cells = evidence[d].evidence.informative_cells;
          p.max_rank = evidence[d].evidence.max_rank;
          rec.provenance.push_back(std::move(p));
        }
      }
      JointTable next = push_forward(current, rec.merges, names);
      std::vector<int> sup;
      for (const auto& m : rec.merges) sup.push_back(m.states);
      level_names.push_back(names);
      level_supports.push_back(sup);
      levels.push_back(std::move(rec));
      current = std::move(next);
    } catch (const Error& e) {
      error = "learned level " + std::to_string(k) + ": " + e.what();
      break;
    }
  }

  LearnedDiscreteModel out;
  out.error = error;
  const int K = static_cast<int>(levels.size());
  out.learned_levels = K;
  std::vector<std::vector<int>> ids(K + 1);
  for (int k = 0; k <= K; ++k)
    for (std::size_t i = 0; i < level_names[k].size(); ++i) {
      ids[k].push_back(out.graph.add_node(level_names[k][i], K + 1 - k));
      out.supports.push_back(level_supports[k][i]);
    }
  out.functions.assign(out.graph.size(), SelectionFunction{});
  for (int k = 1; k <= K; ++k) {
    const auto& rec = levels[k - 1];
    for (std::size_t i = 0; i < rec.merges.size(); ++i) {
      int id = ids[k][i];
      SelectionFunction f = rec.merges[i].function;
      for (auto& p : f.parents) {
        int pid = ids[k - 1][p];
        out.graph.add_edge(pid, id);
        p = pid;
      }
      f.target = id;
      out.functions[id] = std::move(f);
    }
    out.provenance.insert(out.provenance.end(), rec.provenance.begin(), rec.provenance.end());
  }
  return out;
}

}  // namespace hsel
