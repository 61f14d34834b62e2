#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "hsel/common/error.hpp"
#include "hsel/common/rng.hpp"
#include "hsel/conditions/condition_check.hpp"
#include "hsel/discovery/binary_fixture.hpp"
#include "hsel/discovery/binary_matrix.hpp"
#include "hsel/discovery/concept_graph.hpp"
#include "hsel/discovery/pc.hpp"
#include "hsel/metrics/graph_distance.hpp"
#include "hsel/metrics/metrics.hpp"
#include "hsel/model/continuous_model.hpp"
#include "hsel/sae/sae.hpp"

namespace hsel {

inline constexpr const char* kReportSchema = "hsel.report/1";

// Published ablation numbers at K = 4, 10, 100; used for ordering comparison only.
struct ReferenceAblation {
  int K;
  double overlap;
  double coverage;
};
inline constexpr ReferenceAblation kReferenceAblation[] = {{4, 0.108, 26.37}, {10, 0.089, 47.90}, {100, 0.235, 37.46}};

// Published per-level spread (Top1) and deactivation values, fine to coarse.
inline constexpr double kReferenceSpreadTop1[] = {0.27, 0.30, 0.53};
inline constexpr double kReferenceDeactivation[] = {0.004, 0.013, 0.070};

inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string checkpoint_id(const SAEModel& m) {
  std::string bytes;
  auto add = [&](const auto& M) {
    for (Eigen::Index i = 0; i < M.size(); ++i) {
      float f = static_cast<float>(M.data()[i]);
      bytes.append(reinterpret_cast<const char*>(&f), sizeof f);
    }
  };
  add(m.W_enc);
  add(m.b_enc);
  add(m.W_dec);
  add(m.b_dec);
  return fnv1a_hex(bytes);
}

// Wide single level with disjoint concept footprints, used for the sparsity sweep.
struct AblationSpec {
  int concepts = 24;
  int block = 4;           // input coordinates per concept
  int active = 5;          // concepts present per sample
  int latent_dim = 96;
  int samples = 4000;
  int training_steps = 3000;
  int eval_rows = 500;
};

struct ExperimentConfig {
  ContinuousSpec model;
  int samples = 4000;
  std::vector<int> active_per_level = {1, 2, 2};  // coarse to fine latent levels
  double feature_noise = 0.02;
  std::vector<int> latent_multipliers = {2, 2, 1};  // SAE width = multiplier x concepts, coarse to fine
  SAEConfig sae = [] {
    SAEConfig c;
    c.step_size = 3e-3;
    c.training_steps = 3000;
    return c;
  }();
  double alpha = 0.01;
  std::vector<int> sparsity_grid = {4, 10, 100};
  int grid_reference = 10;                        // grid value that maps onto the true active count
  AblationSpec ablation;
  bool run_ablation = true;
  std::vector<std::uint64_t> seeds = {0};
  int eval_rows = 500;
  std::vector<double> steer_strengths = {0.0, 0.1, 0.3, 1.0, 3.0, 10.0};
  std::string output_dir;

  std::vector<int> scaled_grid() const {
    std::vector<int> out;
    for (int g : sparsity_grid) out.push_back(std::max(1, static_cast<int>(std::lround(static_cast<double>(g) * ablation.active / grid_reference))));
    return out;
  }

  void validate() const {
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (samples < sae.batch_size) throw ConfigError("fewer samples than the SAE batch size");
    if (active_per_level.size() != 3) throw ConfigError("active_per_level needs one entry per latent level (3)");
    if (sparsity_grid.empty() || grid_reference < 1) throw ConfigError("empty sparsity grid");
    for (int k : scaled_grid())
      if (k > ablation.latent_dim) throw ConfigError("scaled sparsity value " + std::to_string(k) + " exceeds latent_dim");
    if (ablation.active > ablation.concepts) throw ConfigError("more active concepts than concepts");
    if (latent_multipliers.size() != active_per_level.size()) throw ConfigError("one latent multiplier per latent level required");
    for (int m : latent_multipliers)
      if (m < 1) throw ConfigError("latent multipliers must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (eval_rows < 1) throw ConfigError("eval_rows must be positive");
  }
};

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["model"] = {{"pixels_per_node", c.model.pixels_per_node}, {"weight_low", c.model.weight_low}, {"weight_high", c.model.weight_high},
                {"noise_scale", c.model.noise_scale}, {"noise", to_string(c.model.noise)}, {"squash", to_string(c.model.squash)}};
  j["samples"] = c.samples;
  j["active_per_level"] = c.active_per_level;
  j["feature_noise"] = c.feature_noise;
  j["latent_multipliers"] = c.latent_multipliers;
  j["sae"] = {{"step_size", c.sae.step_size}, {"batch_size", c.sae.batch_size}, {"training_steps", c.sae.training_steps}};
  j["alpha"] = c.alpha;
  j["sparsity_grid"] = c.sparsity_grid;
  j["grid_reference"] = c.grid_reference;
  j["ablation"] = {{"concepts", c.ablation.concepts}, {"block", c.ablation.block}, {"active", c.ablation.active},
                   {"latent_dim", c.ablation.latent_dim}, {"samples", c.ablation.samples},
                   {"training_steps", c.ablation.training_steps}, {"eval_rows", c.ablation.eval_rows}};
  j["run_ablation"] = c.run_ablation;
  j["seeds"] = c.seeds;
  j["eval_rows"] = c.eval_rows;
  j["steer_strengths"] = c.steer_strengths;
  return j;
}

inline std::string config_hash(const ExperimentConfig& c) { return fnv1a_hex(to_json(c).dump()); }

// Feature stand-in for one latent level: each active concept paints a positive
// pattern over the input coordinates its bottom-level descendants own.
struct LevelFeatures {
  int level = 0;
  std::vector<int> nodes;       // truth node ids
  Eigen::MatrixXd activations;  // samples x nodes
  Eigen::MatrixXd patterns;     // nodes x inputs
  Eigen::MatrixXd features;     // samples x inputs
};

inline double softplus(double u) { return u > 30.0 ? u : std::log1p(std::exp(u)); }

// Keeps softplus(value) on the k largest values of each row, zero elsewhere.
inline Eigen::MatrixXd gated_activations(const Eigen::MatrixXd& values, int k) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(values.rows(), values.cols());
  std::vector<int> idx;
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    Eigen::VectorXd g = values.row(r).transpose();
    Eigen::VectorXd shifted = g.array() - g.minCoeff() + 1.0;
    detail::keep_top_k(shifted, k, idx);
    for (Eigen::Index i = 0; i < values.cols(); ++i)
      if (shifted(i) != 0.0) A(r, i) = softplus(g(i));
  }
  return A;
}

inline std::vector<LevelFeatures> level_features(const ContinuousSelectionModel& m, const Dataset& data, const std::vector<int>& active,
                                                 double noise, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0xFEA7);
  std::vector<LevelFeatures> out;
  const int P = m.pixels();
  const int first = m.graph.min_level() + 1;
  for (int level = first; level <= m.bottom_level(); ++level) {
    LevelFeatures f;
    f.level = level;
    f.nodes = m.graph.level_nodes(level);
    const int k = active.at(static_cast<std::size_t>(level - first));
    if (k < 1 || k > static_cast<int>(f.nodes.size())) throw ConfigError("active count out of range on level " + std::to_string(level));
    Eigen::MatrixXd values(data.rows(), static_cast<Eigen::Index>(f.nodes.size()));
    for (std::size_t i = 0; i < f.nodes.size(); ++i) values.col(static_cast<Eigen::Index>(i)) = data.values.col(f.nodes[i]);
    f.activations = gated_activations(values, k);
    f.patterns = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(f.nodes.size()), P);
    for (std::size_t i = 0; i < f.nodes.size(); ++i)
      for (int p : m.descendant_pixels(f.nodes[i])) f.patterns(static_cast<Eigen::Index>(i), p) = 0.5 + uniform01(rng);
    f.features = f.activations * f.patterns;
    for (Eigen::Index r = 0; r < f.features.rows(); ++r)
      for (Eigen::Index c = 0; c < P; ++c) f.features(r, c) += noise * normal(rng);
    out.push_back(std::move(f));
  }
  return out;
}

struct LevelResult {
  int level = 0;
  int K = 0;
  int latent_dim = 0;
  double final_loss = 0.0;
  std::string checkpoint;
  ComponentMatch match;
  double spread_top1 = 0.0;
  double deactivation_l1 = 0.0;
  double deactivation_cosine = 1.0;
  double mean_locality = 0.0;
  double footprint = 0.0;  // mean descendant mask fraction of the level's concepts
};

struct SteeringResult {
  std::vector<double> strengths;
  std::map<int, std::vector<double>> effect_l1;  // level -> mean L1 effect per strength
  std::map<int, double> locality;                // level -> mean inside / total
  std::map<int, double> mask_fraction;           // level -> mean descendant mask size / inputs
  double zero_strength_max_change = 0.0;
  double additivity_error = 0.0;
};

struct AblationPoint {
  int grid_value = 0;
  int K = 0;
  double overlap = 0.0;
  double coverage = 0.0;
  double match = 0.0;
  double final_loss = 0.0;
};

struct SeedReport {
  std::uint64_t seed = 0;
  std::vector<LevelResult> levels;  // coarse to fine
  GraphDistance graph;
  ConceptGraph learned_graph;
  SteeringResult steering;
  std::vector<AblationPoint> ablation;
  std::vector<std::string> stages;
};

struct ExperimentReport {
  std::string config_hash;
  nlohmann::ordered_json config;
  std::vector<SeedReport> seeds;
};

namespace detail {

inline Mask attribution_mask(const Eigen::VectorXd& contribution, double threshold = 0.1) {
  Mask m(contribution.size(), 0);
  double mx = contribution.size() ? contribution.cwiseAbs().maxCoeff() : 0.0;
  if (mx <= 0.0) return m;
  for (Eigen::Index i = 0; i < contribution.size(); ++i) m[i] = std::abs(contribution(i)) > threshold * mx;
  return m;
}

inline double fraction_inside(const Eigen::VectorXd& effect, const std::vector<int>& inside) {
  double tot = effect.cwiseAbs().sum();
  if (tot <= 0.0) return 0.0;
  double in = 0.0;
  for (int p : inside) in += std::abs(effect(p));
  return in / tot;
}

}  // namespace detail

// Mean over rows of the Top1 attribution mask density: the most active feature's
// contribution, thresholded at 0.1 of its peak.
inline double spread_top1(const SAEModel& m, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z) {
  double s = 0.0;
  int n = 0;
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    Eigen::Index j;
    double a = Z.row(r).maxCoeff(&j);
    if (a <= 0.0) continue;
    auto rep = spatial_spread({{"level", {detail::attribution_mask(a * m.W_dec.col(j))}}}, {1});
    s += rep.proportion.at("level")[0];
    ++n;
  }
  return n ? s / n : 0.0;
}

// Removes each row's most active feature and measures the change of the input.
inline DeactivationEffect top_feature_deactivation(const SAEModel& m, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z) {
  Eigen::MatrixXd mod = X;
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    Eigen::Index j;
    if (Z.row(r).maxCoeff(&j) <= 0.0) continue;
    mod.row(r) = steer(m, X.row(r).transpose(), {static_cast<int>(j), 0.0, SteerMode::deactivate}).transpose();
  }
  return deactivation_effect(X, mod);
}

// Overlap and coverage of the per-sample attribution masks of the features matched
// to true concepts; features silent on a sample contribute no mask.
inline OverlapCoverage matched_overlap_coverage(const SAEModel& m, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                                                const std::vector<int>& matched) {
  double iou_sum = 0.0, cov_sum = 0.0;
  int iou_n = 0, cov_n = 0;
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    std::vector<Mask> masks;
    for (int j : matched) {
      if (j < 0 || Z(r, j) <= 0.0) continue;
      masks.push_back(detail::attribution_mask(Z(r, j) * m.W_dec.col(j)));
    }
    if (masks.empty()) continue;
    auto oc = overlap_coverage(masks);
    cov_sum += oc.coverage_percent;
    ++cov_n;
    if (masks.size() > 1) {
      iou_sum += oc.mean_iou;
      ++iou_n;
    }
  }
  return {iou_n ? iou_sum / iou_n : 0.0, cov_n ? cov_sum / cov_n : 0.0};
}

struct AblationData {
  Eigen::MatrixXd activations;
  Eigen::MatrixXd features;
};

inline AblationData ablation_data(const AblationSpec& s, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0xAB1A);
  const int P = s.concepts * s.block;
  Eigen::MatrixXd pat = Eigen::MatrixXd::Zero(s.concepts, P);
  for (int i = 0; i < s.concepts; ++i)
    for (int p = 0; p < s.block; ++p) pat(i, i * s.block + p) = 0.5 + uniform01(rng);
  Eigen::MatrixXd values(s.samples, s.concepts);
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (int i = 0; i < s.concepts; ++i) values(r, i) = normal(rng);
  AblationData d;
  d.activations = gated_activations(values, s.active);
  d.features = d.activations * pat;
  for (Eigen::Index r = 0; r < d.features.rows(); ++r)
    for (int c = 0; c < P; ++c) d.features(r, c) += 0.02 * normal(rng);
  return d;
}

inline std::vector<AblationPoint> run_sparsity_ablation(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto& s = cfg.ablation;
  auto data = ablation_data(s, seed);
  auto grid = cfg.scaled_grid();
  std::vector<AblationPoint> out;
  const Eigen::Index eval = std::min<Eigen::Index>(s.eval_rows, data.features.rows());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    SAEConfig c = cfg.sae;
    c.input_dim = static_cast<int>(data.features.cols());
    c.latent_dim = s.latent_dim;
    c.K = grid[g];
    c.training_steps = s.training_steps;
    c.seed = seed;
    auto m = train_sae(data.features, c);
    Eigen::MatrixXd Z = encode_rows(m, data.features);
    auto match = match_components(data.activations, Z);
    auto oc = matched_overlap_coverage(m, data.features.topRows(eval), Z.topRows(eval), match.permutation);
    out.push_back({cfg.sparsity_grid[g], grid[g], oc.mean_iou, oc.coverage_percent, match.mean_score, m.final_loss});
  }
  return out;
}

// Truth concept graph over the latent levels, nodes keyed by (level, node id).
inline ConceptGraph latent_truth_graph(const SelectionGraph& g, int first_level) {
  ConceptGraph c;
  c.larger_level_is_coarser = false;
  std::map<int, int> index;
  for (int v = 0; v < g.size(); ++v)
    if (g.node(v).level >= first_level) {
      index[v] = static_cast<int>(c.nodes.size());
      c.nodes.push_back({g.node(v).level, v, g.node(v).name});
    }
  for (const auto& e : g.edges())
    if (index.count(e.from) && index.count(e.to)) c.edges.push_back({index[e.from], index[e.to], true, EdgeSource::level_rule, false});
  c.sort_edges();
  return c;
}

inline SteeringResult run_steering_study(const ContinuousSelectionModel& model, const std::vector<LevelFeatures>& feats,
                                         const std::vector<SAEModel>& saes, const std::vector<ComponentMatch>& matches,
                                         const std::vector<double>& strengths, int eval_rows) {
  if (saes.size() != feats.size() || matches.size() != feats.size()) throw DomainError("one trained SAE per level required");
  SteeringResult out;
  out.strengths = strengths;
  const int P = model.pixels();
  for (std::size_t l = 0; l < feats.size(); ++l) {
    const auto& f = feats[l];
    const auto& m = saes[l];
    const Eigen::Index rows = std::min<Eigen::Index>(eval_rows, f.features.rows());
    double loc = 0.0, frac = 0.0;
    int counted = 0;
    std::vector<double> curve(strengths.size(), 0.0);
    for (std::size_t i = 0; i < f.nodes.size(); ++i) {
      int j = matches[l].permutation[i];
      if (j < 0) continue;
      auto inside = model.descendant_pixels(f.nodes[i]);
      frac += static_cast<double>(inside.size()) / P;
      for (std::size_t s = 0; s < strengths.size(); ++s) {
        double l1 = 0.0;
        for (Eigen::Index r = 0; r < rows; ++r) {
          Eigen::VectorXd x = f.features.row(r).transpose();
          Eigen::VectorXd effect = steer(m, x, {j, strengths[s], SteerMode::additive}) - x;
          if (strengths[s] == 0.0) out.zero_strength_max_change = std::max(out.zero_strength_max_change, effect.cwiseAbs().maxCoeff());
          l1 += effect.cwiseAbs().mean();
        }
        curve[s] += l1 / static_cast<double>(rows);
      }
      Eigen::VectorXd x = f.features.row(0).transpose();
      loc += detail::fraction_inside(steer(m, x, {j, 1.0, SteerMode::additive}) - x, inside);
      ++counted;
    }
    for (auto& v : curve) v /= std::max(counted, 1);
    out.effect_l1[f.level] = curve;
    out.locality[f.level] = counted ? loc / counted : 0.0;
    out.mask_fraction[f.level] = counted ? frac / counted : 0.0;
  }
  // Coarse positive plus fine negative edit against the sum of the separate edits.
  const auto& coarse = saes.front();
  const auto& fine = saes.back();
  const int jc = std::max(0, matches.front().permutation.front());
  const int jf = std::max(0, matches.back().permutation.front());
  const Eigen::Index rows = std::min<Eigen::Index>(eval_rows, feats.back().features.rows());
  for (Eigen::Index r = 0; r < rows; ++r) {
    Eigen::VectorXd x = feats.back().features.row(r).transpose();
    for (double s : strengths) {
      SteerSpec up{jc, s, SteerMode::additive}, down{jf, -s, SteerMode::additive};
      Eigen::VectorXd combined = steer(fine, steer(coarse, x, up), down);
      Eigen::VectorXd superposed = x + (steer(coarse, x, up) - x) + (steer(fine, x, down) - x);
      out.additivity_error = std::max(out.additivity_error, (combined - superposed).cwiseAbs().maxCoeff());
    }
  }
  return out;
}

// Fills rep stage by stage, so a failure leaves the finished stages in place.
inline void run_seed(const ExperimentConfig& cfg, std::uint64_t seed, SeedReport& rep) {
  rep.seed = seed;
  std::string stage = "model";
  try {
    auto model = random_continuous_model(figure2_graph(NodeKind::continuous), cfg.model, seed);
    stage = "sample";
    auto data = sample(model, cfg.samples, seed);
    stage = "features";
    auto feats = level_features(model, data, cfg.active_per_level, cfg.feature_noise, seed);
    rep.stages.push_back("features: " + std::to_string(feats.size()) + " levels, " + std::to_string(cfg.samples) + " rows");
    std::vector<SAEModel> saes;
    std::vector<ComponentMatch> matches;
    std::vector<LevelCodes> codes;
    for (std::size_t l = 0; l < feats.size(); ++l) {
      const auto& f = feats[l];
      stage = "train level " + std::to_string(f.level);
      SAEConfig c = cfg.sae;
      c.input_dim = static_cast<int>(f.features.cols());
      c.latent_dim = cfg.latent_multipliers[l] * static_cast<int>(f.nodes.size());
      c.K = cfg.active_per_level[l];
      c.seed = seed * 16 + l;
      auto m = train_sae(f.features, c);
      m.level = std::to_string(f.level);
      Eigen::MatrixXd Z = encode_rows(m, f.features);
      stage = "score level " + std::to_string(f.level);
      LevelResult lr;
      lr.level = f.level;
      lr.K = c.K;
      lr.latent_dim = c.latent_dim;
      lr.final_loss = m.final_loss;
      lr.checkpoint = checkpoint_id(m);
      lr.match = match_components(f.activations, Z);
      const Eigen::Index rows = std::min<Eigen::Index>(cfg.eval_rows, f.features.rows());
      lr.spread_top1 = spread_top1(m, f.features.topRows(rows), Z.topRows(rows));
      auto de = top_feature_deactivation(m, f.features.topRows(rows), Z.topRows(rows));
      lr.deactivation_l1 = de.mean_l1;
      lr.deactivation_cosine = de.mean_cosine;
      rep.stages.push_back("sae level " + std::to_string(f.level) + ": checkpoint " + lr.checkpoint);
      // Matched features only, relabelled by the truth node they stand for.
      Eigen::MatrixXd matched = Eigen::MatrixXd::Zero(Z.rows(), static_cast<Eigen::Index>(f.nodes.size()));
      for (std::size_t i = 0; i < f.nodes.size(); ++i)
        if (lr.match.permutation[i] >= 0) matched.col(static_cast<Eigen::Index>(i)) = Z.col(lr.match.permutation[i]);
      codes.push_back({f.level, matched, lr.checkpoint});
      rep.levels.push_back(lr);
      saes.push_back(std::move(m));
      matches.push_back(lr.match);
    }
    stage = "discover";
    BinaryFeatureMatrix bin;
    for (std::size_t l = 0; l < feats.size(); ++l)
      for (std::size_t i = 0; i < feats[l].nodes.size(); ++i) {
        std::vector<std::uint8_t> col(static_cast<std::size_t>(codes[l].codes.rows()));
        for (Eigen::Index r = 0; r < codes[l].codes.rows(); ++r) col[r] = codes[l].codes(r, static_cast<Eigen::Index>(i)) > 0.0;
        bin.add_column({feats[l].level, feats[l].nodes[i]}, std::move(col));
      }
    PcOptions po;
    po.alpha = cfg.alpha;
    auto sk = pc_search(bin, po);
    std::vector<ConceptNode> nodes;
    for (int c = 0; c < bin.cols(); ++c)
      nodes.push_back({bin.columns[c].level, bin.columns[c].feature, model.graph.node(bin.columns[c].feature).name});
    rep.learned_graph = orient_levels(sk, nodes, false);
    rep.graph = graph_distance(latent_truth_graph(model.graph, feats.front().level), rep.learned_graph);
    rep.stages.push_back("discover: " + std::to_string(sk.tests) + " tests");
    stage = "steer";
    rep.steering = run_steering_study(model, feats, saes, matches, cfg.steer_strengths, cfg.eval_rows);
    for (std::size_t l = 0; l < feats.size(); ++l) {
      rep.levels[l].mean_locality = rep.steering.locality[feats[l].level];
      rep.levels[l].footprint = rep.steering.mask_fraction[feats[l].level];
    }
    if (cfg.run_ablation) {
      stage = "ablation";
      rep.ablation = run_sparsity_ablation(cfg, seed);
    }
  } catch (const Error& e) {
    throw StageError(stage, seed, e.what());
  }
}

inline nlohmann::ordered_json to_json(const SeedReport& r) {
  nlohmann::ordered_json j;
  j["seed"] = r.seed;
  j["levels"] = nlohmann::ordered_json::array();
  for (const auto& l : r.levels)
    j["levels"].push_back({{"level", l.level},
                           {"K", l.K},
                           {"latent_dim", l.latent_dim},
                           {"final_loss", l.final_loss},
                           {"checkpoint", l.checkpoint},
                           {"match_score", l.match.mean_score},
                           {"match_scores", l.match.scores},
                           {"spread_top1", l.spread_top1},
                           {"deactivation_l1", l.deactivation_l1},
                           {"deactivation_cosine", l.deactivation_cosine},
                           {"locality", l.mean_locality},
                           {"footprint", l.footprint}});
  j["graph_distance"] = {{"shd", r.graph.shd},
                         {"precision", r.graph.precision},
                         {"recall", r.graph.recall},
                         {"oriented_precision", r.graph.oriented_precision},
                         {"truth_edges", r.graph.truth_edges},
                         {"learned_edges", r.graph.learned_edges}};
  j["graph"] = to_json(r.learned_graph);
  nlohmann::ordered_json st;
  st["strengths"] = r.steering.strengths;
  for (const auto& [level, curve] : r.steering.effect_l1) st["effect_l1"][std::to_string(level)] = curve;
  for (const auto& [level, v] : r.steering.locality) st["locality"][std::to_string(level)] = v;
  for (const auto& [level, v] : r.steering.mask_fraction) st["mask_fraction"][std::to_string(level)] = v;
  st["zero_strength_max_change"] = r.steering.zero_strength_max_change;
  st["additivity_error"] = r.steering.additivity_error;
  j["steering"] = st;
  j["ablation"] = nlohmann::ordered_json::array();
  for (const auto& a : r.ablation)
    j["ablation"].push_back({{"grid_value", a.grid_value},
                             {"K", a.K},
                             {"overlap", a.overlap},
                             {"coverage", a.coverage},
                             {"match_score", a.match},
                             {"final_loss", a.final_loss}});
  j["stages"] = r.stages;
  return j;
}

inline nlohmann::ordered_json to_json(const ExperimentReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = kReportSchema;
  j["config_hash"] = r.config_hash;
  j["config"] = r.config;
  j["seeds"] = nlohmann::ordered_json::array();
  for (const auto& s : r.seeds) j["seeds"].push_back(to_json(s));
  nlohmann::ordered_json ref = nlohmann::ordered_json::array();
  for (const auto& a : kReferenceAblation) ref.push_back({{"K", a.K}, {"overlap", a.overlap}, {"coverage", a.coverage}});
  j["reference_ablation"] = ref;
  j["reference_spread_top1"] = std::vector<double>(std::begin(kReferenceSpreadTop1), std::end(kReferenceSpreadTop1));
  j["reference_deactivation"] = std::vector<double>(std::begin(kReferenceDeactivation), std::end(kReferenceDeactivation));
  return j;
}

// Writes report.json, one DOT graph per seed and CSV tables into dir.
inline void write_report_files(const ExperimentReport& r, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(fs::path(dir) / name);
    if (!f) throw IoError("cannot write " + (fs::path(dir) / name).string());
    return f;
  };
  open("report.json") << to_json(r).dump(2) << '\n';
  auto levels = open("levels.csv");
  levels << "seed,level,K,latent_dim,final_loss,match_score,spread_top1,deactivation_l1,locality\n";
  auto abl = open("ablation.csv");
  abl << "seed,grid_value,K,overlap,coverage,match_score\n";
  for (const auto& s : r.seeds) {
    open("graph_seed" + std::to_string(s.seed) + ".dot") << export_graph(s.learned_graph, "dot");
    for (const auto& l : s.levels)
      levels << s.seed << ',' << l.level << ',' << l.K << ',' << l.latent_dim << ',' << format_real(l.final_loss) << ','
             << format_real(l.match.mean_score) << ',' << format_real(l.spread_top1) << ',' << format_real(l.deactivation_l1) << ','
             << format_real(l.mean_locality) << '\n';
    for (const auto& a : s.ablation)
      abl << s.seed << ',' << a.grid_value << ',' << a.K << ',' << format_real(a.overlap) << ',' << format_real(a.coverage) << ','
          << format_real(a.match) << '\n';
  }
}

inline ExperimentReport run_hierarchy_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentReport r;
  r.config = to_json(cfg);
  r.config_hash = config_hash(cfg);
  for (auto seed : cfg.seeds) {
    r.seeds.emplace_back();
    try {
      run_seed(cfg, seed, r.seeds.back());
    } catch (const StageError&) {
      if (!cfg.output_dir.empty()) write_report_files(r, cfg.output_dir);
      throw;
    }
  }
  if (!cfg.output_dir.empty()) write_report_files(r, cfg.output_dir);
  return r;
}

// Sparsity pivot: the same features encoded with K equal to the true number of
// active latents and with a dense code.
struct SparsityStudy {
  std::uint64_t seed = 0;
  bool conditions_pass = false;
  double matched_score = 0.0;
  double dense_score = 0.0;
  double matched_loss = 0.0;
  double dense_loss = 0.0;
};

struct SparsityStudyConfig {
  int samples = 4000;
  int active = 2;
  int input_dim = 24;
  double noise = 0.01;
  SAEConfig sae = [] {
    SAEConfig c;
    c.step_size = 3e-3;
    c.training_steps = 3000;
    return c;
  }();
};

inline SparsityStudy run_sparsity_study(std::uint64_t seed, const SparsityStudyConfig& cfg = {}) {
  SparsityStudy out;
  out.seed = seed;
  auto model = random_continuous_model(sparse_two_level_graph(), {}, seed);
  out.conditions_pass = check_continuous_conditions(model).passes({"1-i", "1-ii", "1-iii", "1-iv"});
  auto data = sample(model, cfg.samples, seed);
  auto bottom = model.bottom_nodes();
  Eigen::MatrixXd values(data.rows(), static_cast<Eigen::Index>(bottom.size()));
  for (std::size_t i = 0; i < bottom.size(); ++i) values.col(static_cast<Eigen::Index>(i)) = data.values.col(bottom[i]);
  Eigen::MatrixXd A = gated_activations(values, cfg.active);
  Rng rng = make_rng(seed, 77);
  Eigen::MatrixXd mix(cfg.input_dim, A.cols());
  for (Eigen::Index i = 0; i < mix.rows(); ++i)
    for (Eigen::Index j = 0; j < mix.cols(); ++j) mix(i, j) = normal(rng);
  Eigen::MatrixXd X = A * mix.transpose();
  for (Eigen::Index r = 0; r < X.rows(); ++r)
    for (Eigen::Index c = 0; c < X.cols(); ++c) X(r, c) += cfg.noise * normal(rng);
  SAEConfig c = cfg.sae;
  c.input_dim = cfg.input_dim;
  c.latent_dim = static_cast<int>(A.cols());
  c.seed = seed;
  c.K = cfg.active;
  auto sparse = train_sae(X, c);
  c.K = c.latent_dim;
  auto dense = train_sae(X, c);
  out.matched_score = match_components(A, encode_rows(sparse, X)).mean_score;
  out.dense_score = match_components(A, encode_rows(dense, X)).mean_score;
  out.matched_loss = sparse.final_loss;
  out.dense_loss = dense.final_loss;
  return out;
}

}  // namespace hsel
