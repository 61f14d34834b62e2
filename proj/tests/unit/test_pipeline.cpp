#include <gtest/gtest.h>

#include <filesystem>

#include "hsel/pipeline/pipeline.hpp"
#include "support.hpp"

using namespace hsel;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.samples = 1200;
  c.sae.training_steps = 400;
  c.eval_rows = 100;
  c.run_ablation = false;
  c.seeds = {0};
  return c;
}

const ExperimentReport& small_report() {
  static const ExperimentReport r = run_hierarchy_experiment(small_config());
  return r;
}

}  // namespace

TEST(ExperimentConfig, DefaultsAreValid) { EXPECT_NO_THROW(ExperimentConfig{}.validate()); }

TEST(ExperimentConfig, InvalidSettingsAreConfigErrors) {
  auto expect_bad = [](auto edit) {
    ExperimentConfig c;
    edit(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  expect_bad([](ExperimentConfig& c) { c.seeds.clear(); });
  expect_bad([](ExperimentConfig& c) { c.sparsity_grid = {4, 10, 1000}; });
  expect_bad([](ExperimentConfig& c) { c.sparsity_grid.clear(); });
  expect_bad([](ExperimentConfig& c) { c.alpha = 0.0; });
  expect_bad([](ExperimentConfig& c) { c.alpha = 1.0; });
  expect_bad([](ExperimentConfig& c) { c.active_per_level = {1, 2}; });
  expect_bad([](ExperimentConfig& c) { c.latent_multipliers = {2, 0, 1}; });
  expect_bad([](ExperimentConfig& c) { c.samples = 10; });
  expect_bad([](ExperimentConfig& c) { c.ablation.active = 30; });
  expect_bad([](ExperimentConfig& c) { c.eval_rows = 0; });
}

TEST(ExperimentConfig, ZeroSeedListRejectedBeforeAnyWork) {
  auto c = small_config();
  c.seeds.clear();
  EXPECT_THROW(run_hierarchy_experiment(c), ConfigError);
}

TEST(ExperimentConfig, SparsityGridScalesOntoTheTrueActiveCount) {
  ExperimentConfig c;
  EXPECT_EQ(c.sparsity_grid, (std::vector<int>{4, 10, 100}));
  EXPECT_EQ(c.scaled_grid(), (std::vector<int>{2, 5, 50}));
  c.ablation.active = 10;
  EXPECT_EQ(c.scaled_grid(), (std::vector<int>{4, 10, 100}));
}

TEST(ConfigHash, KnownFnv1aVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(ConfigHash, StableAndSensitive) {
  auto a = small_config(), b = small_config();
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.output_dir = "/somewhere/else";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seeds = {1};
  EXPECT_NE(config_hash(a), config_hash(b));
  b = small_config();
  b.alpha = 0.05;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(ReferenceValues, PublishedAblationAndLevelTrends) {
  EXPECT_EQ(kReferenceAblation[0].K, 4);
  EXPECT_DOUBLE_EQ(kReferenceAblation[0].overlap, 0.108);
  EXPECT_DOUBLE_EQ(kReferenceAblation[0].coverage, 26.37);
  EXPECT_EQ(kReferenceAblation[1].K, 10);
  EXPECT_DOUBLE_EQ(kReferenceAblation[1].overlap, 0.089);
  EXPECT_DOUBLE_EQ(kReferenceAblation[1].coverage, 47.90);
  EXPECT_EQ(kReferenceAblation[2].K, 100);
  EXPECT_DOUBLE_EQ(kReferenceAblation[2].overlap, 0.235);
  EXPECT_DOUBLE_EQ(kReferenceAblation[2].coverage, 37.46);
  EXPECT_DOUBLE_EQ(kReferenceSpreadTop1[0], 0.27);
  EXPECT_DOUBLE_EQ(kReferenceSpreadTop1[2], 0.53);
  EXPECT_DOUBLE_EQ(kReferenceDeactivation[0], 0.004);
  EXPECT_DOUBLE_EQ(kReferenceDeactivation[1], 0.013);
  EXPECT_DOUBLE_EQ(kReferenceDeactivation[2], 0.070);
  // The mid K has the least overlap and the most coverage.
  EXPECT_LT(kReferenceAblation[1].overlap, kReferenceAblation[0].overlap);
  EXPECT_LT(kReferenceAblation[0].overlap, kReferenceAblation[2].overlap);
  EXPECT_GT(kReferenceAblation[1].coverage, kReferenceAblation[2].coverage);
  EXPECT_GT(kReferenceAblation[2].coverage, kReferenceAblation[0].coverage);
}

TEST(GatedActivations, KeepsSoftplusOfTheTopKPerRow) {
  Rng rng = make_rng(3);
  Eigen::MatrixXd V(200, 6);
  for (Eigen::Index i = 0; i < V.size(); ++i) V.data()[i] = normal(rng);
  for (int k : {1, 2, 6}) {
    auto A = gated_activations(V, k);
    for (Eigen::Index r = 0; r < V.rows(); ++r) {
      std::vector<std::pair<double, int>> order;
      for (int i = 0; i < 6; ++i) order.push_back({-V(r, i), i});
      std::sort(order.begin(), order.end());
      for (int pos = 0; pos < 6; ++pos) {
        const int i = order[pos].second;
        if (pos < k)
          EXPECT_DOUBLE_EQ(A(r, i), std::log1p(std::exp(V(r, i))));
        else
          EXPECT_EQ(A(r, i), 0.0);
      }
    }
  }
}

TEST(LevelFeatures, PatternsCoverExactlyTheDescendantPixels) {
  auto model = random_continuous_model(figure2_graph(NodeKind::continuous), {}, 2);
  auto data = sample(model, 300, 2);
  auto feats = level_features(model, data, {1, 2, 2}, 0.0, 2);
  ASSERT_EQ(feats.size(), 3u);
  EXPECT_EQ(feats[0].level, 1);
  EXPECT_EQ(feats[2].level, 3);
  for (const auto& f : feats) {
    for (std::size_t i = 0; i < f.nodes.size(); ++i) {
      auto want = model.descendant_pixels(f.nodes[i]);
      std::vector<int> got;
      for (int p = 0; p < model.pixels(); ++p)
        if (f.patterns(static_cast<Eigen::Index>(i), p) != 0.0) got.push_back(p);
      EXPECT_EQ(got, want) << model.graph.node(f.nodes[i]).name;
    }
    EXPECT_LT((f.features - f.activations * f.patterns).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW(level_features(model, data, {1, 2, 7}, 0.0, 2), ConfigError);
}

TEST(LatentTruthGraph, DropsTheAuxiliaryTopLevel) {
  auto g = latent_truth_graph(figure2_graph(NodeKind::continuous), 1);
  EXPECT_EQ(g.nodes.size(), 12u);
  EXPECT_EQ(g.edges.size(), 16u);
  EXPECT_TRUE(g.check().empty());
}

TEST(HierarchyExperiment, ReportCarriesProvenanceAndAllLevels) {
  const auto& r = small_report();
  EXPECT_EQ(r.config_hash, config_hash(small_config()));
  ASSERT_EQ(r.seeds.size(), 1u);
  const auto& s = r.seeds[0];
  ASSERT_EQ(s.levels.size(), 3u);
  for (const auto& l : s.levels) {
    EXPECT_EQ(l.checkpoint.size(), 16u);
    EXPECT_GE(l.match.mean_score, 0.0);
    EXPECT_LE(l.match.mean_score, 1.0);
    bool logged = false;
    for (const auto& st : s.stages) logged = logged || st.find(l.checkpoint) != std::string::npos;
    EXPECT_TRUE(logged);
  }
  EXPECT_EQ(s.levels[0].K, 1);
  EXPECT_EQ(s.levels[0].latent_dim, 4);
  EXPECT_EQ(s.levels[2].latent_dim, 6);
  EXPECT_TRUE(s.learned_graph.check().empty());
  auto j = to_json(r);
  EXPECT_EQ(j.at("schema"), kReportSchema);
  EXPECT_EQ(j.at("reference_ablation").size(), 3u);
}

TEST(HierarchyExperiment, RerunReproducesEveryNumber) {
  auto again = run_hierarchy_experiment(small_config());
  EXPECT_EQ(to_json(again).dump(), to_json(small_report()).dump());
}

TEST(SteeringStudy, ZeroStrengthIsExactAndEditsSuperpose) {
  const auto& st = small_report().seeds[0].steering;
  EXPECT_EQ(st.zero_strength_max_change, 0.0);
  EXPECT_LE(st.additivity_error, 1e-6);
  ASSERT_EQ(st.strengths.front(), 0.0);
  for (const auto& [level, curve] : st.effect_l1) EXPECT_EQ(curve.front(), 0.0) << level;
}

TEST(SteeringStudy, CoarseDescendantMasksAreLarger) {
  const auto& st = small_report().seeds[0].steering;
  EXPECT_GT(st.mask_fraction.at(1), st.mask_fraction.at(2));
  EXPECT_GT(st.mask_fraction.at(2), st.mask_fraction.at(3));
}

TEST(SteeringStudy, EffectGrowsWithStrength) {
  const auto& st = small_report().seeds[0].steering;
  for (const auto& [level, curve] : st.effect_l1)
    for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_GT(curve[i], curve[i - 1]) << level;
}

TEST(SteeringStudy, OneModelPerLevelRequired) {
  auto model = random_continuous_model(figure2_graph(NodeKind::continuous), {}, 0);
  auto feats = level_features(model, sample(model, 300, 0), {1, 2, 2}, 0.0, 0);
  EXPECT_THROW(run_steering_study(model, feats, {}, {}, {0.0, 1.0}, 10), DomainError);
}

TEST(HierarchyExperiment, WritesReportFiles) {
  auto dir = hsel::testing::scratch_dir("pipeline_report");
  write_report_files(small_report(), dir.string());
  for (const char* f : {"report.json", "levels.csv", "ablation.csv", "graph_seed0.dot"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  auto j = nlohmann::json::parse(std::ifstream(dir / "report.json"));
  EXPECT_EQ(j.at("config_hash"), small_report().config_hash);
}

TEST(HierarchyExperiment, StageFailureIsAnnotatedAndPartialReportKept) {
  auto c = small_config();
  c.seeds = {0, 3};
  c.samples = 300;
  c.sae.training_steps = 100;
  c.active_per_level = {1, 2, 7};
  auto dir = hsel::testing::scratch_dir("pipeline_partial");
  c.output_dir = dir.string();
  try {
    run_hierarchy_experiment(c);
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "features");
    EXPECT_EQ(e.seed(), 0u);
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
}

TEST(SparsityAblation, SmallSweepIsWellFormedAndDeterministic) {
  auto c = small_config();
  c.ablation.samples = 600;
  c.ablation.training_steps = 150;
  c.ablation.eval_rows = 100;
  auto a = run_sparsity_ablation(c, 1), b = run_sparsity_ablation(c, 1);
  ASSERT_EQ(a.size(), 3u);
  const int want_k[] = {2, 5, 50};
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].grid_value, c.sparsity_grid[i]);
    EXPECT_EQ(a[i].K, want_k[i]);
    EXPECT_GE(a[i].overlap, 0.0);
    EXPECT_LE(a[i].overlap, 1.0);
    EXPECT_GE(a[i].coverage, 0.0);
    EXPECT_LE(a[i].coverage, 100.0);
    EXPECT_EQ(a[i].overlap, b[i].overlap);
    EXPECT_EQ(a[i].coverage, b[i].coverage);
    EXPECT_EQ(a[i].final_loss, b[i].final_loss);
  }
}

TEST(SparsityAblation, ConceptFootprintsAreDisjointBlocks) {
  AblationSpec s;
  s.samples = 200;
  auto d = ablation_data(s, 4);
  EXPECT_EQ(d.activations.cols(), s.concepts);
  EXPECT_EQ(d.features.cols(), s.concepts * s.block);
  for (Eigen::Index r = 0; r < d.activations.rows(); ++r) EXPECT_EQ((d.activations.row(r).array() > 0.0).count(), s.active);
}
