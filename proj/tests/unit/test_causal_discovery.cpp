#include <gtest/gtest.h>

#include <boost/math/distributions/binomial.hpp>

#include "hsel/discovery/binary_fixture.hpp"
#include "hsel/discovery/pc.hpp"
#include "hsel/metrics/graph_distance.hpp"
#include "support.hpp"

using namespace hsel;

namespace {

BinaryFeatureMatrix columns_of(const std::vector<std::vector<std::uint8_t>>& cols, int level = 0) {
  BinaryFeatureMatrix b;
  for (std::size_t c = 0; c < cols.size(); ++c) b.add_column({level, static_cast<int>(c)}, cols[c]);
  return b;
}

std::vector<std::uint8_t> coin_column(Rng& rng, int n) {
  std::vector<std::uint8_t> c(n);
  for (auto& v : c) v = uniform01(rng) < 0.5;
  return c;
}

Skeleton skeleton_of(int n, const std::vector<std::pair<int, int>>& edges, const std::map<std::pair<int, int>, std::vector<int>>& sep) {
  Skeleton sk;
  sk.n = n;
  sk.adjacent.assign(n, std::vector<char>(n, 0));
  for (auto [a, b] : edges) sk.adjacent[a][b] = sk.adjacent[b][a] = 1;
  sk.sepsets = sep;
  return sk;
}

const ConceptEdge* edge_between(const ConceptGraph& g, int a, int b) {
  for (const auto& e : g.edges)
    if (std::minmax(e.from, e.to) == std::minmax(a, b)) return &e;
  return nullptr;
}

}  // namespace

TEST(Binarize, AllZeroCodesGiveAllZeroMatrix) {
  LevelCodes L{0, Eigen::MatrixXd::Zero(20, 5), "zero"};
  auto b = binarize_topk({L}, 3);
  EXPECT_EQ(b.cols(), 3);
  for (const auto& col : b.data) EXPECT_EQ(std::count(col.begin(), col.end(), 1), 0);
}

TEST(Binarize, SingleSampleDirectTopK) {
  Eigen::MatrixXd c(1, 3);
  c << 5, 1, 3;
  auto b = binarize_topk({LevelCodes{0, c, "x"}}, 2);
  ASSERT_EQ(b.cols(), 2);
  EXPECT_EQ(b.columns[0].feature, 0);
  EXPECT_EQ(b.columns[1].feature, 2);
  EXPECT_EQ(b.at(0, 0), 1);
  EXPECT_EQ(b.at(0, 1), 1);
}

TEST(Binarize, MarginalsMatchBruteForceRecount) {
  Rng rng = make_rng(17);
  std::vector<LevelCodes> levels;
  const int n = 1000;
  for (int lv : {2, 0, 1}) {
    Eigen::MatrixXd c(n, 8);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = uniform01(rng) < 0.6 ? 0.0 : uniform01(rng) * (1 + lv);
    levels.push_back({lv, c, "level " + std::to_string(lv)});
  }
  const int K = 3;
  auto b = binarize_topk(levels, K);
  ASSERT_EQ(b.cols(), 9);
  int col = 0;
  for (int lv : {0, 1, 2}) {
    const auto& codes = std::find_if(levels.begin(), levels.end(), [&](const auto& l) { return l.level == lv; })->codes;
    std::vector<std::pair<double, int>> means;
    for (int f = 0; f < 8; ++f) means.push_back({-codes.col(f).mean(), f});
    std::sort(means.begin(), means.end());
    std::vector<int> kept;
    for (int k = 0; k < K; ++k) kept.push_back(means[k].second);
    std::sort(kept.begin(), kept.end());
    std::vector<int> counts(8, 0), per_row_max(n, 0);
    for (int r = 0; r < n; ++r) {
      std::vector<std::pair<double, int>> row;
      for (int f = 0; f < 8; ++f) row.push_back({-codes(r, f), f});
      std::sort(row.begin(), row.end());
      for (int k = 0; k < K; ++k)
        if (-row[k].first > 0.0) ++counts[row[k].second];
    }
    for (int f : kept) {
      EXPECT_EQ(b.columns[col].level, lv);
      EXPECT_EQ(b.columns[col].feature, f);
      EXPECT_EQ(std::count(b.data[col].begin(), b.data[col].end(), 1), counts[f]) << "level " << lv << " feature " << f;
      ++col;
    }
  }
  for (int r = 0; r < n; ++r)
    for (int start = 0; start < 9; start += 3) {
      int ones = 0;
      for (int c = start; c < start + 3; ++c) ones += b.at(r, c);
      EXPECT_LE(ones, K);
    }
}

TEST(Binarize, KAboveLatentDimIsConfigError) {
  LevelCodes L{0, Eigen::MatrixXd::Ones(4, 3), ""};
  EXPECT_THROW(binarize_topk({L}, 4), ConfigError);
  EXPECT_THROW(binarize_topk({L}, 0), ConfigError);
}

TEST(Binarize, RowCountsMustAgree) {
  EXPECT_THROW(binarize_topk({LevelCodes{0, Eigen::MatrixXd::Ones(4, 3), ""}, LevelCodes{1, Eigen::MatrixXd::Ones(5, 3), ""}}, 2),
               DomainError);
}

TEST(PcSearch, IndependentCoinsFalsePositiveRateIsCalibrated) {
  const double alpha = 0.01;
  const int trials = 200;
  int edges = 0;
  Rng rng = make_rng(23);
  for (int t = 0; t < trials; ++t) {
    auto b = columns_of({coin_column(rng, 10000), coin_column(rng, 10000)});
    edges += pc_search(b, {alpha, 3, 100}).edge_count();
  }
  const int bound = static_cast<int>(boost::math::quantile(boost::math::binomial(trials, alpha), 0.995));
  EXPECT_LE(edges, bound) << edges << " false edges in " << trials;
}

TEST(PcSearch, CopiedColumnsKeepTheEdge) {
  Rng rng = make_rng(3);
  auto x = coin_column(rng, 10000);
  auto b = columns_of({x, x});
  auto sk = pc_search(b);
  EXPECT_EQ(sk.edge_count(), 1);
  auto d = GSquareTest(b, 0.01)(0, 1, {});
  EXPECT_LT(d.p_value, std::numeric_limits<double>::min());
  EXPECT_EQ(d.dof, 1);
}

TEST(PcSearch, ChainSeparatesEnds) {
  Rng rng = make_rng(5);
  const int n = 20000;
  std::vector<std::uint8_t> a(n), m(n), c(n);
  for (int r = 0; r < n; ++r) {
    a[r] = uniform01(rng) < 0.5;
    m[r] = uniform01(rng) < (a[r] ? 0.85 : 0.15);
    c[r] = uniform01(rng) < (m[r] ? 0.85 : 0.15);
  }
  auto sk = pc_search(columns_of({a, m, c}));
  EXPECT_TRUE(sk.adjacent[0][1]);
  EXPECT_TRUE(sk.adjacent[1][2]);
  EXPECT_FALSE(sk.adjacent[0][2]);
  EXPECT_EQ(sk.sepsets.at({0, 2}), std::vector<int>{1});
}

TEST(PcSearch, ConstantColumnIsDroppedWithWarning) {
  Rng rng = make_rng(8);
  auto b = columns_of({coin_column(rng, 500), std::vector<std::uint8_t>(500, 1), coin_column(rng, 500)});
  auto sk = pc_search(b);
  EXPECT_EQ(sk.dropped, std::vector<int>{1});
  ASSERT_EQ(sk.warnings.size(), 1u);
  EXPECT_NE(sk.warnings[0].find("L0_f1"), std::string::npos);
  EXPECT_TRUE(sk.neighbors(1).empty());
}

TEST(PcSearch, TooFewRowsIsDomainError) {
  Rng rng = make_rng(8);
  EXPECT_THROW(pc_search(columns_of({coin_column(rng, 50), coin_column(rng, 50)})), DomainError);
}

TEST(PcSearch, DeterministicAcrossRuns) {
  auto h = figure2_binary_fixture(2);
  auto b = sample_binary(h, 3000, 4);
  auto a = pc_search(b), c = pc_search(b);
  EXPECT_EQ(a.adjacent, c.adjacent);
  EXPECT_EQ(a.sepsets, c.sepsets);
  EXPECT_EQ(a.tests, c.tests);
}

TEST(PcSearch, ExactTestsRecoverFigure2SkeletonForSeveralSeeds) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto h = figure2_binary_fixture(seed);
    auto g = orient_levels(pc_search_exact(binary_exact_joint(h)), hierarchy_nodes(h.graph), false);
    auto d = graph_distance(truth_concept_graph(h.graph), g);
    EXPECT_EQ(d.shd, 0) << "seed " << seed;
  }
}

TEST(PcSearch, SampledFigure2MeetsRecallAndOrientation) {
  auto h = figure2_binary_fixture(0);
  auto b = sample_binary(h, 10000, 1);
  auto g = orient_levels(pc_search(b, {0.01, 3, 100}), nodes_from_matrix(b), false);
  auto d = graph_distance(truth_concept_graph(h.graph), g);
  EXPECT_GE(d.recall, 0.9);
  EXPECT_GE(d.oriented_precision, 0.8);
  EXPECT_TRUE(g.check().empty());
}

TEST(OrientLevels, CrossLevelEdgePointsCoarsewards) {
  auto sk = skeleton_of(2, {{0, 1}}, {});
  auto fine_first = orient_levels(sk, {{100, 0, "t100"}, {899, 0, "t899"}}, true);
  ASSERT_EQ(fine_first.edges.size(), 1u);
  EXPECT_EQ(fine_first.edges[0].from, 0);
  EXPECT_EQ(fine_first.edges[0].to, 1);
  EXPECT_EQ(fine_first.edges[0].source, EdgeSource::level_rule);
  auto small_coarse = orient_levels(sk, {{0, 0, "coarse"}, {2, 0, "fine"}}, false);
  EXPECT_EQ(small_coarse.edges[0].from, 1);
  EXPECT_EQ(small_coarse.edges[0].to, 0);
}

TEST(OrientLevels, WithinLevelCollider) {
  auto sk = skeleton_of(3, {{0, 2}, {1, 2}}, {{{0, 1}, {}}});
  auto g = orient_levels(sk, {{1, 0, "a"}, {1, 1, "b"}, {1, 2, "c"}}, false);
  for (int a : {0, 1}) {
    auto* e = edge_between(g, a, 2);
    ASSERT_NE(e, nullptr);
    EXPECT_TRUE(e->directed);
    EXPECT_EQ(e->to, 2);
    EXPECT_EQ(e->source, EdgeSource::collider_rule);
    EXPECT_TRUE(e->within_level);
  }
}

TEST(OrientLevels, NonColliderStaysUndirected) {
  auto sk = skeleton_of(3, {{0, 2}, {1, 2}}, {{{0, 1}, {2}}});
  auto g = orient_levels(sk, {{1, 0, "a"}, {1, 1, "b"}, {1, 2, "c"}}, false);
  for (const auto& e : g.edges) {
    EXPECT_FALSE(e.directed);
    EXPECT_EQ(e.source, EdgeSource::undirected);
  }
  EXPECT_TRUE(g.check().empty());
}

TEST(OrientLevels, LabelCountMustMatch) {
  EXPECT_THROW(orient_levels(skeleton_of(2, {}, {}), {{0, 0, "a"}}, false), DomainError);
}

TEST(ConceptGraphCheck, FlagsWrongCrossLevelDirection) {
  ConceptGraph g;
  g.nodes = {{0, 0, "coarse"}, {1, 0, "fine"}};
  g.edges = {{0, 1, true, EdgeSource::level_rule, false}};
  EXPECT_FALSE(g.check().empty());
  g.edges = {{1, 0, true, EdgeSource::level_rule, false}};
  EXPECT_TRUE(g.check().empty());
}

TEST(ExportGraph, EmptyGraphIsValidDot) {
  auto dot = export_graph(ConceptGraph{}, "dot");
  EXPECT_EQ(dot, "digraph concepts {\n}\n");
}

TEST(ExportGraph, OneEdgeGivesOneArrowLine) {
  ConceptGraph g;
  g.nodes = {{0, 0, "coarse"}, {1, 3, "fine"}};
  g.edges = {{1, 0, true, EdgeSource::level_rule, false}};
  auto dot = export_graph(g, "dot");
  std::istringstream in(dot);
  int arrows = 0;
  for (std::string line; std::getline(in, line);) arrows += line.find("->") != std::string::npos;
  EXPECT_EQ(arrows, 1);
  EXPECT_NE(dot.find("rank=same"), std::string::npos);
}

TEST(ExportGraph, JsonRoundTripAndDeterminism) {
  auto h = figure2_binary_fixture(1);
  auto g = orient_levels(pc_search_exact(binary_exact_joint(h)), hierarchy_nodes(h.graph), false);
  auto text = export_graph(g, "json");
  EXPECT_EQ(parse_graph_json(text), g);
  EXPECT_EQ(export_graph(parse_graph_json(text), "json"), text);
  EXPECT_EQ(export_graph(g, "dot"), export_graph(parse_graph_json(text), "dot"));
}

TEST(ExportGraph, UnknownFormatIsRejected) { EXPECT_THROW(export_graph(ConceptGraph{}, "graphml"), DomainError); }

TEST(ExportGraph, WrongSchemaIsRejected) { EXPECT_THROW(parse_graph_json(R"({"schema":"other"})"), IoError); }

TEST(PcSearch, LargerKNeverGivesFewerEdges) {
  // 25 groups of 4 features sharing a group factor; codes are sparse and positive.
  Rng rng = make_rng(29);
  const int n = 2000, groups = 25, dim = 100;
  Eigen::MatrixXd codes = Eigen::MatrixXd::Zero(n, dim);
  for (int r = 0; r < n; ++r)
    for (int g = 0; g < groups; ++g) {
      if (uniform01(rng) >= 0.3) continue;
      const double f = 0.5 + uniform01(rng);
      for (int k = 0; k < 4; ++k)
        if (uniform01(rng) < 0.8) codes(r, 4 * g + k) = f * (1.0 + 0.1 * k) + 0.2 * uniform01(rng);
    }
  int previous = -1;
  for (int K : {4, 10, 100}) {
    auto b = binarize_topk({LevelCodes{0, codes, "groups"}}, K);
    const int edges = pc_search(b).edge_count();
    EXPECT_GE(edges, previous) << "K " << K;
    previous = edges;
  }
}
