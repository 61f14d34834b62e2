#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <filesystem>

#include "hsel/conditions/condition_check.hpp"
#include "hsel/io/serialize.hpp"
#include "hsel/model/continuous_model.hpp"
#include "hsel/model/dataset.hpp"
#include "hsel/model/discrete_generators.hpp"
#include "support.hpp"

using namespace hsel;
using hsel::testing::hand_model;
using hsel::testing::star_graph;

namespace {

bool selection_consistent(const DiscreteSelectionModel& m, const std::vector<int>& values) {
  for (int v : m.latents()) {
    const auto& f = m.functions[v];
    std::vector<int> pv;
    for (int p : f.parents) pv.push_back(values[p]);
    if (apply_selection(f, pv) != values[v]) return false;
  }
  return true;
}

SelectionGraph two_level_continuous() {
  SelectionGraph g;
  g.add_node("A", 0, NodeKind::continuous);
  g.add_node("B1", 1, NodeKind::continuous);
  g.add_node("B2", 1, NodeKind::continuous);
  g.add_edge("B1", "A");
  g.add_edge("B2", "A");
  return g;
}

}  // namespace

TEST(ValidateGraph, HierarchyGraphIsValid) {
  auto g = figure2_graph();
  EXPECT_TRUE(validate_graph(g).ok());
  EXPECT_EQ(g.size(), 14);
  EXPECT_EQ(g.level_nodes(3).size(), 6u);
}

TEST(ValidateGraph, WithinLevelEdgeIsReported) {
  auto g = figure2_graph();
  g.add_edge("Z21", "Z22");
  auto r = validate_graph(g);
  EXPECT_FALSE(r.ok());
  EXPECT_TRUE(r.has("within-level edge"));
}

TEST(ValidateGraph, SingleLevelWithoutEdgesIsVacuouslyValid) {
  SelectionGraph g;
  g.add_node("a", 0);
  g.add_node("b", 0);
  EXPECT_TRUE(validate_graph(g).ok());
}

TEST(ValidateGraph, SkippingUpwardAndOrphanEdgesAreReported) {
  SelectionGraph g;
  g.add_node("top", 0);
  g.add_node("orphan", 0);
  g.add_node("mid", 1);
  g.add_node("leaf", 2);
  g.add_edge("mid", "top");
  g.add_edge("leaf", "mid");
  g.add_edge("leaf", "top");
  g.add_edge("top", "mid");
  auto r = validate_graph(g);
  EXPECT_TRUE(r.has("level-skipping edge"));
  EXPECT_TRUE(r.has("upward edge"));
  EXPECT_TRUE(r.has("orphan concept"));
}

TEST(ApplySelection, OrTable) {
  auto f = make_selection(2, {0, 1}, {2, 2}, {0, 1, 1, 1});
  std::vector<int> x{1, 0};
  EXPECT_EQ(apply_selection(f, x), 1);
}

TEST(ApplySelection, Identity) {
  auto f = make_selection(1, {0}, {5}, {0, 1, 2, 3, 4});
  std::vector<int> x{3};
  EXPECT_EQ(apply_selection(f, x), 3);
}

TEST(ApplySelection, MajorityOfThreeMatchesHandTable) {
  // rows 000..111, first parent most significant
  const std::vector<int> hand{0, 0, 0, 1, 0, 1, 1, 1};
  auto f = make_selection(3, {0, 1, 2}, {2, 2, 2}, hand);
  std::vector<int> x{1, 1, 0};
  EXPECT_EQ(apply_selection(f, x), 1);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        std::vector<int> v{a, b, c};
        EXPECT_EQ(apply_selection(f, v), (a + b + c >= 2) ? 1 : 0);
      }
}

TEST(ApplySelection, DomainMissNamesTheTuple) {
  auto f = make_selection(2, {0, 1}, {2, 2}, {0, 1, 1, 1});
  std::vector<int> bad{1, 2};
  try {
    apply_selection(f, bad);
    FAIL() << "expected a domain error";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("1,2"), std::string::npos) << e.what();
  }
}

TEST(Sample, DiscreteRowsAreSelectionConsistent) {
  auto m = figure3_model(0);
  auto d = sample(m, 1000, 11);
  ASSERT_EQ(d.rows(), 1000);
  for (int r = 0; r < d.rows(); ++r) {
    std::vector<int> row(static_cast<std::size_t>(d.cols()));
    for (int c = 0; c < d.cols(); ++c) row[c] = static_cast<int>(d.values(r, c));
    ASSERT_TRUE(selection_consistent(m, row)) << "row " << r;
  }
}

TEST(Sample, ContinuousZeroRowsKeepsLabels) {
  auto m = random_continuous_model(two_level_continuous(), {}, 3);
  auto d = sample(m, 0, 1);
  EXPECT_EQ(d.rows(), 0);
  EXPECT_EQ(d.labels.front(), "A");
  EXPECT_EQ(d.cols(), 3 + m.pixels());
}

TEST(Sample, SameSeedGivesBitIdenticalData) {
  auto cm = random_continuous_model(figure2_graph(), {}, 5);
  auto a = sample(cm, 300, 9), b = sample(cm, 300, 9);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_TRUE(a.values.cwiseEqual(b.values).all());
  auto dm = figure3_model(2);
  EXPECT_TRUE(sample(dm, 300, 4).values.cwiseEqual(sample(dm, 300, 4).values).all());
  EXPECT_FALSE(sample(dm, 300, 4).values.cwiseEqual(sample(dm, 300, 5).values).all());
}

TEST(ExactJoint, IndependentUniformBits) {
  SelectionGraph g;
  g.add_node("a", 0);
  g.add_node("b", 0);
  auto m = hand_model(g, {2, 2}, {});
  auto j = exact_joint(m, true);
  ASSERT_EQ(j.entries().size(), 4u);
  for (const auto& e : j.entries()) EXPECT_DOUBLE_EQ(e.p, 0.25);
}

TEST(ExactJoint, MatchesMonteCarloFrequencies) {
  auto m = figure3_model(0);
  auto j = exact_joint(m, true);
  const int n = 1'000'000;
  auto d = sample(m, n, 123);
  auto obs = m.observed();
  std::map<std::uint64_t, double> counts;
  for (int r = 0; r < n; ++r) {
    std::vector<int> cfg;
    for (int v : obs) cfg.push_back(static_cast<int>(d.values(r, v)));
    counts[j.radix().encode(cfg)] += 1.0;
  }
  double seen = 0.0, chi2 = 0.0;
  int cells = 0, misses = 0;
  for (const auto& e : j.entries()) {
    if (e.p <= 0.0) continue;
    ++cells;
    double c = counts[e.code], expected = e.p * n;
    chi2 += (c - expected) * (c - expected) / expected;
    if (std::abs(c / n - e.p) > 3.0 * std::sqrt(e.p * (1.0 - e.p) / n)) ++misses;
    seen += c;
  }
  EXPECT_EQ(seen, n) << "samples outside the exact support";
  double p_value = boost::math::gamma_q((cells - 1) / 2.0, chi2 / 2.0);
  EXPECT_GT(p_value, 0.01) << "chi2 " << chi2 << " over " << cells << " cells";
  const double per_cell = 0.0027;
  EXPECT_LE(misses, static_cast<int>(std::ceil(cells * per_cell + 4.0 * std::sqrt(cells * per_cell))))
      << misses << " of " << cells << " cells beyond 3 SE";
}

TEST(ExactJoint, ZeroMassBranchHasExactlyZeroProbability) {
  auto g = star_graph({"d1", "d2"}, {"d1", "d2"});
  auto m = hand_model(g, {2, 2, 2}, {{"S", {0, 1, 1, 1}}}, {0.0, 1.0});
  auto j = exact_joint(m, true);
  std::vector<int> zero{0, 0};
  EXPECT_EQ(j.probability(zero), 0.0);
  EXPECT_NEAR(j.total(), 1.0, 1e-12);
}

TEST(ExactJoint, CapExceededReportsStateCount) {
  auto m = figure3_model(0);
  try {
    exact_joint(m, true, 10);
    FAIL() << "expected a size error";
  } catch (const SizeError& e) {
    EXPECT_EQ(e.count(), bottom_state_count(m));
    EXPECT_NE(std::string(e.what()).find(std::to_string(e.count())), std::string::npos);
  }
}

TEST(ExactJoint, InvalidModelIsRejected) {
  auto g = star_graph({"d1", "d2"}, {"d1", "d2"});
  auto m = hand_model(g, {2, 2, 2}, {{"S", {0, 1, 1, 1}}});
  m.conditionals[0].rows[0] = {{3, 1.0}};  // (1,1) selects S=1, not 0
  EXPECT_TRUE(validate_model(m).has("selection consistency"));
  EXPECT_THROW(exact_joint(m), ValidationError);
  EXPECT_THROW(sample(m, 5, 0), ValidationError);
}

TEST(ModelProperties, SelectionConsistencyOverEveryPositiveEntry) {
  for (const auto& c : condition2_corpus(8, {}, 100)) {
    auto j = exact_joint(c.model, false);
    EXPECT_NEAR(j.total(), 1.0, 1e-12);
    for (const auto& e : j.entries()) {
      ASSERT_GE(e.p, 0.0);
      if (e.p > 0.0) ASSERT_TRUE(selection_consistent(c.model, j.config(e))) << "seed " << c.seed;
    }
  }
}

TEST(ModelProperties, GeneratedModelsPassFaithfulnessScreen) {
  for (std::uint64_t s = 0; s < 6; ++s) {
    auto m = random_discrete_model({}, s);
    EXPECT_TRUE(faithfulness_screen(m).ok) << "seed " << s;
    auto f3 = figure3_model(s);
    EXPECT_TRUE(faithfulness_screen(f3).ok) << "seed " << s;
  }
}

TEST(ModelProperties, ContinuousModelsHaveNonsingularObservationMaps) {
  auto m = random_continuous_model(figure2_graph(), {}, 1);
  EXPECT_TRUE(validate_model(m).ok());
  EXPECT_GT(observation_conditioning(m, 8, 0), 1e-6);
  for (int p = 0; p < m.pixels(); ++p) EXPECT_EQ(m.graph.node(m.observation.owner[p]).level, m.bottom_level());
}

TEST(DatasetIo, CsvRoundTripPreservesValuesAndLevels) {
  auto dir = hsel::testing::scratch_dir("dataset");
  auto m = random_continuous_model(two_level_continuous(), {}, 3);
  auto d = sample(m, 25, 8);
  write_dataset(d, (dir / "d.csv").string());
  auto back = read_dataset((dir / "d.csv").string());
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.levels, d.levels);
  EXPECT_EQ(back.seed, 8u);
  EXPECT_TRUE(back.values.cwiseEqual(d.values).all());
}

TEST(DatasetIo, DuplicateLabelsAreRejected) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(2, 2);
  EXPECT_THROW(make_dataset(v, {"x", "x"}, {0, 0}, 0), ValidationError);
}

TEST(ModelIo, DiscreteAndContinuousJsonRoundTrip) {
  auto m = figure3_model(1);
  auto text = to_json(m).dump();
  auto back = discrete_model_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(to_json(back).dump(), text);
  EXPECT_EQ(exact_joint(back, true).entries().size(), exact_joint(m, true).entries().size());
  auto cm = random_continuous_model(figure2_graph(), {}, 4);
  auto ctext = to_json(cm).dump();
  EXPECT_EQ(to_json(continuous_model_from_json(nlohmann::json::parse(ctext))).dump(), ctext);
}

TEST(ModelIo, WrongSchemaIsRejected) {
  nlohmann::json j = {{"schema", "hsel.discrete_model/999"}};
  EXPECT_THROW(discrete_model_from_json(j), Error);
}
