#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hsel/common/rng.hpp"
#include "hsel/conditions/condition_check.hpp"
#include "hsel/discovery/binary_fixture.hpp"
#include "hsel/discovery/pc.hpp"
#include "hsel/ident/coparents.hpp"
#include "hsel/ident/identify.hpp"
#include "hsel/ident/nonneg_rank.hpp"
#include "hsel/metrics/graph_distance.hpp"
#include "hsel/oracle/oracle.hpp"
#include "hsel/set_calculus/set_calculus.hpp"

namespace hsel {

struct SuiteResult {
  std::string name;
  int cases = 0;
  int agreed = 0;
  std::vector<std::string> failures;  // first few disagreements

  bool ok() const { return cases > 0 && agreed == cases; }
  void record(bool agree, const std::string& what) {
    ++cases;
    if (agree)
      ++agreed;
    else if (failures.size() < 5)
      failures.push_back(what);
  }
};

inline nlohmann::ordered_json to_json(const SuiteResult& r) {
  return {{"suite", r.name}, {"cases", r.cases}, {"agreed", r.agreed}, {"ok", r.ok()}, {"failures", r.failures}};
}

struct VerifyOptions {
  std::uint64_t seed = 0;
  int set_families = 200;
  int max_sets = 6;
  int universe = 32;
  int corpus_size = 50;
  int products = 50;
  int pc_samples = 10000;
  double alpha = 0.01;
};

inline std::vector<std::set<int>> random_set_family(Rng& rng, int max_sets, int universe) {
  int n = uniform_int(rng, 1, max_sets), U = uniform_int(rng, 1, universe);
  std::vector<std::set<int>> sets(n);
  for (auto& s : sets)
    for (int x = 0; x < U; ++x)
      if (uniform01(rng) < 0.5) s.insert(x);
  return sets;
}

inline SuiteResult verify_set_calculus(const VerifyOptions& o) {
  SuiteResult r{"set_calculus"};
  Rng rng = make_rng(o.seed, 0x5E7);
  for (int t = 0; t < o.set_families; ++t) {
    auto sets = random_set_family(rng, o.max_sets, o.universe);
    auto fast = intersections_map(family_from_sets(sets));
    auto slow = oracle::oracle_set_intersections(sets);
    bool eq = fast.size() == slow.size();
    for (const auto& [k, v] : slow) eq = eq && fast.count(k) && fast.at(k) == v;
    r.record(eq, "family " + std::to_string(t));
  }
  return r;
}

// Random nonnegative B (4 x p) times C (p x 4); the estimate must bracket p.
inline SuiteResult verify_nonneg_rank(const VerifyOptions& o, int p = 3) {
  SuiteResult r{"nonneg_rank"};
  Rng rng = make_rng(o.seed, 0xBC);
  for (int t = 0; t < o.products; ++t) {
    Eigen::MatrixXd B(4, p), C(p, 4);
    for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = uniform01(rng);
    for (Eigen::Index i = 0; i < C.size(); ++i) C.data()[i] = uniform01(rng);
    auto e = estimate_nonneg_rank(B * C, p);
    r.record(e.lower <= p && p <= e.upper, "product " + std::to_string(t) + " bounds [" + std::to_string(e.lower) + ", " +
                                               std::to_string(e.upper) + "]");
  }
  return r;
}

inline SuiteResult verify_coparents(const std::vector<CorpusEntry>& corpus) {
  SuiteResult r{"coparents"};
  for (const auto& c : corpus) {
    auto j = exact_joint(c.model, true);
    for (int d = 0; d < static_cast<int>(j.arity()); ++d) {
      auto slow = oracle::oracle_minimal_coparents(j, d);
      std::optional<std::vector<int>> fast;
      try {
        fast = find_coparents(j, d);
      } catch (const NoBottleneckError&) {
      }
      r.record(slow == fast, "seed " + std::to_string(c.seed) + " variable " + j.names()[d]);
    }
  }
  return r;
}

inline SuiteResult verify_identification(const std::vector<CorpusEntry>& corpus) {
  SuiteResult r{"identification"};
  for (const auto& c : corpus) {
    auto learned = identify_hierarchy(exact_joint(c.model, true));
    bool found = false;
    if (!learned.error) found = oracle::oracle_best_match(c.model, learned).found;
    r.record(found, "seed " + std::to_string(c.seed) + (learned.error ? ": " + *learned.error : ": no witness"));
  }
  return r;
}

inline SuiteResult verify_conditions(const std::vector<CorpusEntry>& corpus) {
  SuiteResult r{"conditions"};
  for (const auto& c : corpus)
    r.record(check_discrete_conditions(c.model).passes({"2-i", "2-ii", "2-iii", "2-iv"}), "seed " + std::to_string(c.seed));
  return r;
}

// Exact-CI PC against the truth graph of the binary fixture.
inline SuiteResult verify_exact_discovery(const VerifyOptions& o) {
  SuiteResult r{"exact_discovery"};
  auto h = figure2_binary_fixture(o.seed);
  auto sk = pc_search_exact(binary_exact_joint(h));
  auto g = orient_levels(sk, hierarchy_nodes(h.graph), false);
  auto d = graph_distance(truth_concept_graph(h.graph), g);
  r.record(d.shd == 0, "shd " + std::to_string(d.shd));
  return r;
}

inline std::vector<SuiteResult> verify_suites(const std::string& suite, const VerifyOptions& o) {
  static const std::set<std::string> known{"all", "sets", "nonneg", "coparents", "identify", "conditions", "discovery"};
  if (!known.count(suite)) throw ConfigError("unknown suite '" + suite + "'");
  auto want = [&](const char* s) { return suite == "all" || suite == s; };
  std::vector<SuiteResult> out;
  if (want("sets")) out.push_back(verify_set_calculus(o));
  if (want("nonneg")) out.push_back(verify_nonneg_rank(o));
  std::vector<CorpusEntry> corpus;
  if (want("coparents") || want("identify") || want("conditions")) corpus = condition2_corpus(o.corpus_size, {}, o.seed);
  if (want("conditions")) out.push_back(verify_conditions(corpus));
  if (want("coparents")) out.push_back(verify_coparents(corpus));
  if (want("identify")) out.push_back(verify_identification(corpus));
  if (want("discovery")) out.push_back(verify_exact_discovery(o));
  return out;
}

}  // namespace hsel
