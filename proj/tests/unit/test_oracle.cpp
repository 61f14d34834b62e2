#include <gtest/gtest.h>

#include <bit>

#include "hsel/conditions/condition_check.hpp"
#include "hsel/ident/coparents.hpp"
#include "hsel/ident/identify.hpp"
#include "hsel/oracle/oracle.hpp"
#include "hsel/oracle/verify.hpp"
#include "hsel/set_calculus/set_calculus.hpp"
#include "support.hpp"

using namespace hsel;
using hsel::testing::hand_model;

namespace {

DiscreteSelectionModel single_latent_model() {
  SelectionGraph g;
  g.add_node("S", 0);
  g.add_node("T", 0);
  for (const char* n : {"d1", "d2", "d3"}) g.add_node(n, 1);
  g.add_edge("d1", "S");
  g.add_edge("d2", "S");
  g.add_edge("d3", "T");
  return hand_model(g, {2, 3, 3, 2, 3}, {{"S", {0, 0, 0, 1, 1, 1}}, {"T", {0, 1, 2}}}, {0.3, 0.1, 0.1, 0.1, 0.1, 0.3});
}

// Rotates the state labels of every latent, updating the tables that read them.
LearnedDiscreteModel relabeled(const LearnedDiscreteModel& base) {
  LearnedDiscreteModel l = base;
  auto latent = [&](int v) { return !base.graph.parents(v).empty(); };
  for (int c = 0; c < base.graph.size(); ++c) {
    const auto& old = base.functions[c];
    if (old.target < 0) continue;
    Radix r = old.radix();
    for (std::uint64_t code = 0; code < r.size(); ++code) {
      auto vals = r.decode(code);
      for (std::size_t i = 0; i < vals.size(); ++i)
        if (latent(old.parents[i])) vals[i] = (vals[i] + 1) % base.supports[old.parents[i]];
      int out = old.table[code];
      if (out != SelectionFunction::kOutside) out = (out + 1) % base.supports[c];
      l.functions[c].table[r.encode(vals)] = out;
    }
  }
  return l;
}

}  // namespace

TEST(OracleBudget, NonPositiveCapsAreConfigErrors) {
  oracle::OracleBudget b;
  b.max_subsets = 0;
  EXPECT_THROW(b.validate(), ConfigError);
  b = {};
  b.wall_seconds = 0.0;
  EXPECT_THROW(b.validate(), ConfigError);
  EXPECT_NO_THROW(oracle::OracleBudget{}.validate());
}

TEST(OracleSetIntersections, TwoOverlappingSets) {
  auto r = oracle::oracle_set_intersections({{1, 2}, {2, 3}});
  EXPECT_EQ(r.at(1), 2);
  EXPECT_EQ(r.at(2), 2);
  EXPECT_EQ(r.at(3), 1);
}

TEST(OracleSetIntersections, NestedChain) {
  std::vector<std::set<int>> sets{{1, 2}, {1, 2, 3, 4}, {0, 1, 2, 3, 4, 5}};
  auto r = oracle::oracle_set_intersections(sets);
  for (std::uint32_t mask = 1; mask < 8; ++mask) {
    const int smallest = std::countr_zero(mask);
    EXPECT_EQ(r.at(mask), static_cast<int>(sets[smallest].size())) << mask;
  }
}

TEST(OracleSetIntersections, AgreesWithUnionInversion) {
  VerifyOptions o;
  o.set_families = 100;
  o.seed = 5;
  auto r = verify_set_calculus(o);
  EXPECT_TRUE(r.ok()) << r.agreed << "/" << r.cases;
}

TEST(OracleSetIntersections, MoreThanEightSetsExceedBudget) {
  EXPECT_THROW(oracle::oracle_set_intersections(std::vector<std::set<int>>(9, std::set<int>{1})), BudgetError);
}

TEST(OracleCoparents, SingleLatentAgreesWithSearch) {
  auto j = exact_joint(single_latent_model(), true);
  EXPECT_EQ(oracle::oracle_minimal_coparents(j, 0), std::optional<std::vector<int>>(std::vector<int>{1}));
  EXPECT_EQ(oracle::oracle_minimal_coparents(j, 0), std::optional<std::vector<int>>(find_coparents(j, 0)));
}

TEST(OracleCoparents, IndependentVariablesHaveNoHit) {
  SelectionGraph g;
  for (const char* n : {"a", "b", "c"}) g.add_node(n, 0);
  auto j = exact_joint(hand_model(g, {3, 3, 2}, {}), true);
  for (int d = 0; d < 3; ++d) EXPECT_FALSE(oracle::oracle_minimal_coparents(j, d));
}

TEST(OracleCoparents, ReferentiallyTransparent) {
  auto j = exact_joint(condition2_corpus(1).front().model, true);
  for (int d = 0; d < static_cast<int>(j.arity()); ++d)
    EXPECT_EQ(oracle::oracle_minimal_coparents(j, d), oracle::oracle_minimal_coparents(j, d));
}

TEST(OracleCoparents, BudgetsAreExplicitErrors) {
  auto j = exact_joint(single_latent_model(), true);
  oracle::OracleBudget b;
  b.max_subsets = 1;
  EXPECT_THROW(oracle::oracle_minimal_coparents(j, 0, 4, b), BudgetError);
  b = {};
  b.max_states = 10;
  EXPECT_THROW(oracle::oracle_minimal_coparents(j, 0, 4, b), BudgetError);
  JointTable wide(std::vector<std::string>(9, "x"), std::vector<int>(9, 2));
  EXPECT_THROW(oracle::oracle_minimal_coparents(wide, 0), BudgetError);
  EXPECT_THROW(oracle::oracle_minimal_coparents(j, 7), DomainError);
}

TEST(OracleBestMatch, RelabeledCopyHasWitness) {
  auto truth = condition2_corpus(1).front().model;
  auto learned = identify_hierarchy(exact_joint(truth, true));
  auto r = oracle::oracle_best_match(truth, relabeled(learned));
  EXPECT_TRUE(r.found);
  EXPECT_EQ(r.witness.size(), truth.latents().size());
}

TEST(OracleBestMatch, MergedStatesHaveNoWitness) {
  // S = (d1 + d2) mod 3 with states 1 and 2 indistinguishable downstream.
  SelectionGraph g;
  g.add_node("S", 0);
  g.add_node("T", 0);
  for (const char* n : {"d1", "d2", "d3"}) g.add_node(n, 1);
  g.add_edge("d1", "S");
  g.add_edge("d2", "S");
  g.add_edge("d3", "T");
  auto truth = hand_model(g, {3, 3, 3, 3, 3}, {{"S", {0, 1, 2, 1, 2, 0, 2, 0, 1}}, {"T", {0, 1, 2}}},
                          {0.3, 0.05, 0.05, 0.05, 0.1, 0.15, 0.05, 0.1, 0.15});
  auto r = oracle::oracle_best_match(truth, identify_hierarchy(exact_joint(truth, true)));
  EXPECT_FALSE(r.found);
  EXPECT_TRUE(r.witness.empty());
  EXPECT_FALSE(r.closest.empty());
}

TEST(OracleBestMatch, TableCorruptionBreaksCommutation) {
  auto truth = condition2_corpus(1).front().model;
  auto learned = identify_hierarchy(exact_joint(truth, true));
  int victim = learned.learned_level_nodes(1).front();
  ASSERT_FALSE(learned.graph.children(victim).empty());
  auto& t = learned.functions[victim].table;
  auto first = std::find_if(t.begin(), t.end(), [](int x) { return x != SelectionFunction::kOutside; });
  auto other = std::find_if(first, t.end(), [&](int x) { return x != SelectionFunction::kOutside && x != *first; });
  ASSERT_NE(other, t.end());
  std::swap(*first, *other);
  auto r = oracle::oracle_best_match(truth, learned);
  EXPECT_FALSE(r.found);
  EXPECT_NE(r.closest.find("no commuting assignment"), std::string::npos) << r.closest;
}

TEST(OracleBestMatch, LevelCountMismatchIsReported) {
  auto truth = condition2_corpus(1).front().model;
  LearnedDiscreteModel flat;
  for (int v : truth.observed()) flat.graph.add_node(truth.graph.node(v).name, 1);
  flat.supports.assign(flat.graph.size(), 2);
  flat.functions.resize(flat.graph.size());
  auto r = oracle::oracle_best_match(truth, flat);
  EXPECT_FALSE(r.found);
  EXPECT_EQ(r.closest, "level count differs");
}

TEST(OracleBestMatch, PermutationBudgetIsEnforced) {
  auto truth = condition2_corpus(1).front().model;
  auto learned = identify_hierarchy(exact_joint(truth, true));
  oracle::OracleBudget b;
  b.max_permutations = 1;
  EXPECT_THROW(oracle::oracle_best_match(truth, learned, b), BudgetError);
}

TEST(OracleBestMatch, CorpusIdentificationAlwaysHasWitness) {
  auto r = verify_identification(condition2_corpus(10, {}, 100));
  EXPECT_TRUE(r.ok()) << r.agreed << "/" << r.cases << " " << (r.failures.empty() ? "" : r.failures.front());
}
