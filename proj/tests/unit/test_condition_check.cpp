#include <gtest/gtest.h>

#include <algorithm>

#include "hsel/conditions/condition_check.hpp"
#include "hsel/io/serialize.hpp"
#include "support.hpp"

using namespace hsel;
using hsel::testing::hand_model;

namespace {

Verdict node_verdict(const ConditionReport& r, const std::string& check, const std::string& node) {
  for (const auto& n : r.nodes)
    if (n.check == check && n.node == node) return n.verdict;
  return Verdict::unchecked;
}

// Brute force over child subsets with explicit sorted vectors.
bool oracle_sparse_connectivity(const SelectionGraph& g, int v) {
  const auto& ch = g.children(v);
  for (std::uint32_t mask = 1; mask < (1u << ch.size()); ++mask) {
    std::vector<int> acc;
    bool first = true;
    for (std::size_t i = 0; i < ch.size(); ++i) {
      if (!(mask & (1u << i))) continue;
      std::vector<int> pa = g.parents(ch[i]);
      std::sort(pa.begin(), pa.end());
      if (first) {
        acc = pa;
        first = false;
      } else {
        std::vector<int> out;
        std::set_intersection(acc.begin(), acc.end(), pa.begin(), pa.end(), std::back_inserter(out));
        acc = out;
      }
    }
    if (acc == std::vector<int>{v}) return true;
  }
  return false;
}

SelectionGraph random_leveled_dag(Rng& rng) {
  SelectionGraph g;
  int levels = uniform_int(rng, 2, 4), total = 0;
  std::vector<std::vector<int>> at(levels);
  for (int l = 0; l < levels && total < 12; ++l) {
    int k = std::min(uniform_int(rng, 1, 4), 12 - total);
    for (int i = 0; i < k; ++i) at[l].push_back(g.add_node("n" + std::to_string(total++), l));
  }
  for (int l = 1; l < levels; ++l)
    for (int f : at[l])
      for (int c : at[l - 1])
        if (uniform01(rng) < 0.45) g.add_edge(f, c);
  return g;
}

// log p(z~ | z) for a Gaussian with mean a*z per component.
double gaussian_log_density(const std::vector<double>& zt, double z, const std::vector<double>& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < zt.size(); ++i) s += -0.5 * (zt[i] - a[i] * z) * (zt[i] - a[i] * z);
  return s;
}

// Relabels the states of one latent below the top level via a permutation.
DiscreteSelectionModel relabel_latent(const DiscreteSelectionModel& m, int s, const std::vector<int>& perm) {
  auto out = m;
  for (auto& x : out.functions[s].table) x = perm[x];
  for (int t : m.graph.children(s)) {
    auto& f = out.functions[t];
    const auto& old = m.functions[t];
    auto pos = std::find(old.parents.begin(), old.parents.end(), s) - old.parents.begin();
    Radix r = old.radix();
    for (std::uint64_t c = 0; c < r.size(); ++c) {
      auto vals = r.decode(c);
      vals[pos] = perm[vals[pos]];
      f.table[r.encode(vals)] = old.table[c];
    }
  }
  build_conditionals(out);
  return out;
}

}  // namespace

TEST(SparseConnectivity, SingletonParentSetPasses) {
  SelectionGraph g;
  g.add_node("a", 0);
  g.add_node("z", 1);
  g.add_edge("z", "a");
  auto r = check_sparse_connectivity(g);
  EXPECT_EQ(node_verdict(r, "1-iv", "z"), Verdict::pass);
  EXPECT_EQ(r.verdict("1-iv"), Verdict::pass);
}

TEST(SparseConnectivity, LatentsSharingEveryChildFail) {
  SelectionGraph g;
  g.add_node("a", 0);
  g.add_node("b", 0);
  g.add_node("z1", 1);
  g.add_node("z2", 1);
  for (const char* z : {"z1", "z2"})
    for (const char* c : {"a", "b"}) g.add_edge(z, c);
  auto r = check_sparse_connectivity(g);
  EXPECT_EQ(node_verdict(r, "1-iv", "z1"), Verdict::fail);
  EXPECT_EQ(node_verdict(r, "1-iv", "z2"), Verdict::fail);
  EXPECT_EQ(r.verdict("1-iv"), Verdict::fail);
}

TEST(SparseConnectivity, HierarchyGraphMatchesSubsetOracle) {
  auto g = figure2_graph();
  auto r = check_sparse_connectivity(g);
  for (int v = 0; v < g.size(); ++v) {
    if (g.children(v).empty()) continue;
    bool expect = oracle_sparse_connectivity(g, v);
    EXPECT_EQ(node_verdict(r, "1-iv", g.node(v).name), expect ? Verdict::pass : Verdict::fail) << g.node(v).name;
  }
}

TEST(SparseConnectivity, RandomDagsMatchSubsetOracle) {
  Rng rng = make_rng(7);
  for (int t = 0; t < 100; ++t) {
    auto g = random_leveled_dag(rng);
    auto r = check_sparse_connectivity(g);
    for (int v = 0; v < g.size(); ++v) {
      if (g.children(v).empty()) {
        EXPECT_EQ(node_verdict(r, "1-iv", g.node(v).name), Verdict::inapplicable);
        continue;
      }
      EXPECT_EQ(node_verdict(r, "1-iv", g.node(v).name) == Verdict::pass, oracle_sparse_connectivity(g, v))
          << "dag " << t << " node " << g.node(v).name;
    }
  }
}

TEST(SufficientVariability, DensityIndependentOfParentFails) {
  auto probe = score_probe_from_log_density([](const std::vector<double>& zt, double) { return gaussian_log_density(zt, 0.0, {0.0}); },
                                            {0.3}, equispaced_probes(2));
  EXPECT_EQ(probe_conditioning(probe), 0.0);
}

TEST(SufficientVariability, LinearGaussianSingleConstituentPasses) {
  const double a = 1.7, zt = 0.3;
  auto probes = equispaced_probes(2);
  auto probe = score_probe_from_log_density([&](const std::vector<double>& v, double z) { return gaussian_log_density(v, z, {a}); },
                                            {zt}, probes);
  for (std::size_t k = 0; k < probes.size(); ++k) EXPECT_NEAR(probe.score_vectors(k, 0), -(zt - a * probes[k]), 1e-6);
  EXPECT_GT(probe_conditioning(probe), 1e-8);
}

TEST(SufficientVariability, DuplicatedConstituentsAreRankDeficient) {
  auto probe = score_probe_from_log_density(
      [](const std::vector<double>& v, double z) { return gaussian_log_density(v, z, {1.3, 1.3}); }, {0.2, 0.2}, equispaced_probes(3));
  Eigen::MatrixXd diff(2, 2);
  for (int k = 0; k < 2; ++k) diff.row(k) = probe.score_vectors.row(k + 1) - probe.score_vectors.row(0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(diff);
  EXPECT_LT(svd.singularValues()(1), 1e-10);
  EXPECT_LT(probe_conditioning(probe), 1e-8);
}

TEST(SufficientVariability, VerdictIgnoresConstantRescaling) {
  auto base = [](const std::vector<double>& v, double z) { return gaussian_log_density(v, z, {0.8, -1.1}); };
  auto scaled = [&](const std::vector<double>& v, double z) { return base(v, z) + std::log(7.5); };
  auto p1 = score_probe_from_log_density(base, {0.1, -0.4}, equispaced_probes(3));
  auto p2 = score_probe_from_log_density(scaled, {0.1, -0.4}, equispaced_probes(3));
  EXPECT_NEAR(probe_conditioning(p1), probe_conditioning(p2), 1e-9);
  EXPECT_EQ(probe_conditioning(p1) > 1e-8, probe_conditioning(p2) > 1e-8);
}

TEST(SufficientVariability, ModelNodeWithoutInfluenceFails) {
  auto m = random_continuous_model(figure2_graph(), {}, 2);
  int z11 = m.graph.require("Z11");
  auto grid = default_probe_grid(m, 6, 0);
  EXPECT_EQ(check_sufficient_variability(m, z11, grid).verdict("1-iii"), Verdict::pass);
  for (int c : m.graph.parents(z11)) {
    auto& e = m.equations[c];
    for (std::size_t i = 0; i < e.inputs.size(); ++i)
      if (e.inputs[i] == z11) e.weights[i] = 0.0;
  }
  EXPECT_EQ(check_sufficient_variability(m, z11, grid).verdict("1-iii"), Verdict::fail);
}

TEST(SufficientVariability, NonDifferentiableNoiseIsUnsupported) {
  ContinuousSpec spec;
  spec.noise = NoiseFamily::laplace;
  auto m = random_continuous_model(figure2_graph(), spec, 2);
  auto grid = default_probe_grid(m, 3, 0);
  EXPECT_THROW(check_sufficient_variability(m, m.graph.require("Z11"), grid), UnsupportedFamilyError);
  EXPECT_EQ(check_continuous_conditions(m).verdict("1-ii"), Verdict::fail);
}

TEST(ContinuousConditions, SyntheticHierarchyPassesInvertibilityAndVariability) {
  auto m = random_continuous_model(sparse_two_level_graph(), {}, 0);
  auto r = check_continuous_conditions(m);
  EXPECT_EQ(r.verdict("1-i"), Verdict::pass);
  EXPECT_EQ(r.verdict("1-ii"), Verdict::pass);
  EXPECT_EQ(r.verdict("1-iii"), Verdict::pass);
  EXPECT_EQ(r.verdict("1-iv"), Verdict::pass);
}

TEST(DiscreteConditions, XorLatentHasFewerStatesThanParents) {
  SelectionGraph g;
  g.add_node("S", 0);
  for (const char* d : {"d1", "d2", "d3"}) g.add_node(d, 1);
  g.add_edge("d1", "S");
  g.add_edge("d2", "S");
  auto m = hand_model(g, {2, 2, 2, 2}, {{"S", {0, 1, 1, 0}}});
  auto r = check_discrete_conditions(m);
  EXPECT_EQ(node_verdict(r, "2-ii", "S"), Verdict::pass);
}

TEST(DiscreteConditions, TwinCopyLatentsFailDistinctAdjacency) {
  SelectionGraph g;
  g.add_node("S", 0);
  g.add_node("T", 0);
  g.add_node("d1", 1);
  g.add_node("d2", 1);
  g.add_edge("d1", "S");
  g.add_edge("d1", "T");
  auto m = hand_model(g, {2, 2, 2, 2}, {{"S", {0, 1}}, {"T", {0, 1}}}, {0.5, 0.0, 0.0, 0.5});
  auto r = check_discrete_conditions(m);
  EXPECT_EQ(node_verdict(r, "2-iv", "S"), Verdict::fail);
  EXPECT_EQ(node_verdict(r, "2-iv", "T"), Verdict::fail);
  EXPECT_EQ(r.verdict("2-v"), Verdict::unchecked);
}

TEST(DiscreteConditions, Figure3VerdictsMatchGoldenFile) {
  auto m = discrete_model_from_json(read_json_file(hsel::testing::fixture("figure3_model.json")));
  auto golden = read_json_file(hsel::testing::fixture("figure3_verdicts.json"));
  auto r = check_discrete_conditions(m);
  for (const auto& [k, v] : golden.at("verdicts").items()) EXPECT_EQ(to_string(r.verdict(k)), v.get<std::string>()) << k;
  ASSERT_EQ(r.nodes.size(), golden.at("nodes").size());
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    const auto& g = golden.at("nodes")[i];
    EXPECT_EQ(r.nodes[i].check, g.at("check").get<std::string>());
    EXPECT_EQ(r.nodes[i].node, g.at("node").get<std::string>());
    EXPECT_EQ(to_string(r.nodes[i].verdict), g.at("verdict").get<std::string>()) << r.nodes[i].check << " " << r.nodes[i].node;
  }
}

TEST(DiscreteConditions, SupportCountsMatchHandEnumeration) {
  auto m = discrete_model_from_json(read_json_file(hsel::testing::fixture("figure3_model.json")));
  auto j = exact_joint(m, false);
  auto r = check_discrete_conditions(m);
  for (int s : m.latents()) {
    std::set<int> own;
    std::set<std::vector<int>> parent_tuples;
    for (const auto& e : j.entries()) {
      if (e.p <= 0.0) continue;
      auto cfg = j.config(e);
      own.insert(cfg[s]);
      std::vector<int> t;
      for (int p : m.graph.parents(s)) t.push_back(cfg[p]);
      parent_tuples.insert(t);
    }
    bool expect_ii = own.size() < parent_tuples.size();
    EXPECT_EQ(node_verdict(r, "2-ii", m.graph.node(s).name), expect_ii ? Verdict::pass : Verdict::fail);
  }
}

TEST(DiscreteConditions, InjectivityVerdictInvariantToRelabeling) {
  for (const auto& c : condition2_corpus(5, {}, 40)) {
    auto base = c.model;
    build_conditionals(base);
    auto ref = check_discrete_conditions(base);
    for (int s : base.latents()) {
      if (base.graph.node(s).level == base.top_level()) continue;
      std::vector<int> perm(static_cast<std::size_t>(base.supports[s]));
      std::iota(perm.begin(), perm.end(), 0);
      std::reverse(perm.begin(), perm.end());
      auto moved = check_discrete_conditions(relabel_latent(base, s, perm));
      EXPECT_EQ(node_verdict(moved, "2-iii", base.graph.node(s).name), node_verdict(ref, "2-iii", base.graph.node(s).name))
          << "seed " << c.seed << " latent " << base.graph.node(s).name;
    }
  }
}

TEST(DiscreteConditions, CorpusModelsPassConditionTwo) {
  for (const auto& c : condition2_corpus(10)) {
    auto r = check_discrete_conditions(c.model);
    EXPECT_TRUE(r.passes({"2-i", "2-ii", "2-iii", "2-iv"})) << "seed " << c.seed;
    EXPECT_EQ(r.evidence.at("degenerate_supports"), 0.0);
  }
}
