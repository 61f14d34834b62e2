#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "hsel/common/error.hpp"
#include "hsel/common/rng.hpp"
#include "hsel/model/dataset.hpp"
#include "hsel/model/graph.hpp"

namespace hsel {

enum class NoiseFamily { gaussian, logistic, laplace };
enum class Squash { leaky_tanh, linear };

inline const char* to_string(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::gaussian: return "gaussian";
    case NoiseFamily::logistic: return "logistic";
    case NoiseFamily::laplace: return "laplace";
  }
  return "?";
}
inline NoiseFamily noise_family_from_string(const std::string& s) {
  if (s == "gaussian") return NoiseFamily::gaussian;
  if (s == "logistic") return NoiseFamily::logistic;
  if (s == "laplace") return NoiseFamily::laplace;
  throw DomainError("unknown noise family '" + s + "'");
}
inline const char* to_string(Squash s) { return s == Squash::linear ? "linear" : "leaky_tanh"; }
inline Squash squash_from_string(const std::string& s) {
  if (s == "linear") return Squash::linear;
  if (s == "leaky_tanh") return Squash::leaky_tanh;
  throw DomainError("unknown squash '" + s + "'");
}

// value = squash(sum_i weights[i] * inputs[i] + bias) + noise_scale * eps.
// inputs are the coarser concepts of the node; top-level nodes have none.
struct LevelEquation {
  std::vector<int> inputs;
  std::vector<double> weights;
  double bias = 0.0;
  Squash squash = Squash::leaky_tanh;
  double leak = 0.2;
  NoiseFamily noise = NoiseFamily::gaussian;
  double noise_scale = 1.0;
  int categories = 0;  // > 0: top-level node drawn uniformly from {0..categories-1}
};

// Bottom node v owns a block of pixels. The block's first pixel reads v alone,
// the others mix v with one private noise coordinate each, then a leaky squash.
struct ObservationMap {
  std::vector<int> owner;  // pixel -> bottom node id
  std::vector<double> gain;
  std::vector<double> noise_gain;  // 0 for the first pixel of each block
  double leak = 0.2;
};

inline double squash_value(Squash s, double u, double leak) { return s == Squash::linear ? u : std::tanh(u) + leak * u; }
inline double squash_slope(Squash s, double u, double leak) {
  if (s == Squash::linear) return 1.0;
  double t = std::tanh(u);
  return 1.0 - t * t + leak;
}

inline double noise_log_density(NoiseFamily f, double u) {
  switch (f) {
    case NoiseFamily::gaussian: return -0.5 * u * u - 0.5 * std::log(2.0 * M_PI);
    case NoiseFamily::logistic: return -u - 2.0 * std::log1p(std::exp(-u));
    case NoiseFamily::laplace: return -std::abs(u) - std::log(2.0);
  }
  return 0.0;
}

// d/du log p(u); only for families with a smooth density.
inline double noise_score(NoiseFamily f, double u) {
  switch (f) {
    case NoiseFamily::gaussian: return -u;
    case NoiseFamily::logistic: return -std::tanh(0.5 * u);
    case NoiseFamily::laplace: throw UnsupportedFamilyError("laplace noise has a non-differentiable density");
  }
  return 0.0;
}

inline double noise_draw(NoiseFamily f, Rng& rng) {
  switch (f) {
    case NoiseFamily::gaussian: return normal(rng);
    case NoiseFamily::logistic: {
      double u = std::clamp(uniform01(rng), 1e-12, 1.0 - 1e-12);
      return std::log(u / (1.0 - u));
    }
    case NoiseFamily::laplace: {
      double u = uniform01(rng) - 0.5;
      return (u < 0 ? 1.0 : -1.0) * std::log(1.0 - 2.0 * std::abs(u));
    }
  }
  return 0.0;
}

struct ContinuousSelectionModel {
  SelectionGraph graph;
  std::vector<LevelEquation> equations;  // by node id
  ObservationMap observation;

  int bottom_level() const { return graph.max_level(); }
  std::vector<int> bottom_nodes() const { return graph.level_nodes(bottom_level()); }
  int pixels() const { return static_cast<int>(observation.owner.size()); }

  double mean(int node, const std::vector<double>& values) const {
    const auto& e = equations.at(node);
    double u = e.bias;
    for (std::size_t i = 0; i < e.inputs.size(); ++i) u += e.weights[i] * values.at(e.inputs[i]);
    return squash_value(e.squash, u, e.leak);
  }

  // log p(value | coarser concept values) of one node.
  double log_density(int node, double value, const std::vector<double>& values) const {
    const auto& e = equations.at(node);
    double u = (value - mean(node, values)) / e.noise_scale;
    return noise_log_density(e.noise, u) - std::log(e.noise_scale);
  }

  double score(int node, double value, const std::vector<double>& values) const {
    const auto& e = equations.at(node);
    double u = (value - mean(node, values)) / e.noise_scale;
    return noise_score(e.noise, u) / e.noise_scale;
  }

  Eigen::VectorXd observe(const std::vector<double>& values, const Eigen::VectorXd& eps) const {
    const auto& o = observation;
    Eigen::VectorXd x(pixels());
    for (int p = 0; p < pixels(); ++p) {
      double u = o.gain[p] * values.at(o.owner[p]) + o.noise_gain[p] * eps(p);
      x(p) = squash_value(Squash::leaky_tanh, u, o.leak);
    }
    return x;
  }

  // Pixels whose owner is a bottom-level descendant of node.
  std::vector<int> descendant_pixels(int node) const {
    auto desc = graph.descendants_at(node, bottom_level());
    std::set<int> d(desc.begin(), desc.end());
    std::vector<int> out;
    for (int p = 0; p < pixels(); ++p)
      if (d.count(observation.owner[p])) out.push_back(p);
    return out;
  }
};

// Jacobian of (bottom latents, eps) -> X at a point; columns: bottom nodes then
// one column per noise-carrying pixel.
inline Eigen::MatrixXd observation_jacobian(const ContinuousSelectionModel& m, const std::vector<double>& values,
                                            const Eigen::VectorXd& eps) {
  const auto& o = m.observation;
  auto bottom = m.bottom_nodes();
  std::vector<int> noise_pixels;
  for (int p = 0; p < m.pixels(); ++p)
    if (o.noise_gain[p] != 0.0) noise_pixels.push_back(p);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m.pixels(), static_cast<Eigen::Index>(bottom.size() + noise_pixels.size()));
  for (int p = 0; p < m.pixels(); ++p) {
    double u = o.gain[p] * values.at(o.owner[p]) + o.noise_gain[p] * eps(p);
    double s = squash_slope(Squash::leaky_tanh, u, o.leak);
    auto col = std::find(bottom.begin(), bottom.end(), o.owner[p]) - bottom.begin();
    J(p, col) = s * o.gain[p];
    auto nc = std::find(noise_pixels.begin(), noise_pixels.end(), p);
    if (nc != noise_pixels.end()) J(p, static_cast<Eigen::Index>(bottom.size() + (nc - noise_pixels.begin()))) = s * o.noise_gain[p];
  }
  return J;
}

inline ValidationReport validate_model(const ContinuousSelectionModel& m) {
  ValidationReport r = validate_graph(m.graph);
  if (static_cast<int>(m.equations.size()) != m.graph.size()) {
    r.violations.push_back({"equations", "one equation per node required"});
    return r;
  }
  const int top = m.graph.min_level();
  for (int v = 0; v < m.graph.size(); ++v) {
    const auto& e = m.equations[v];
    if (m.graph.node(v).level == top) {
      if (!e.inputs.empty()) r.violations.push_back({"equations", m.graph.node(v).name + " is top-level but has inputs"});
    } else if (e.inputs != m.graph.children(v)) {
      r.violations.push_back({"equations", m.graph.node(v).name + " inputs differ from its coarser concepts"});
    }
    if (e.weights.size() != e.inputs.size()) r.violations.push_back({"equations", m.graph.node(v).name + " weight count"});
    if (!(e.noise_scale > 0.0)) r.violations.push_back({"equations", m.graph.node(v).name + " noise scale must be positive"});
  }
  const auto& o = m.observation;
  if (o.gain.size() != o.owner.size() || o.noise_gain.size() != o.owner.size()) {
    r.violations.push_back({"observation", "observation arrays differ in length"});
    return r;
  }
  auto bottom = m.bottom_nodes();
  std::set<int> b(bottom.begin(), bottom.end()), seen_first;
  for (int p = 0; p < m.pixels(); ++p) {
    if (!b.count(o.owner[p])) r.violations.push_back({"observation mask", "pixel " + std::to_string(p) + " owned by a non-bottom node"});
    if (o.gain[p] == 0.0) r.violations.push_back({"observation mask", "pixel " + std::to_string(p) + " ignores its owner"});
    if (o.noise_gain[p] == 0.0 && !seen_first.insert(o.owner[p]).second)
      r.violations.push_back({"observation", "block of " + m.graph.node(o.owner[p]).name + " has two noise-free pixels"});
  }
  for (int v : bottom)
    if (!seen_first.count(v)) r.violations.push_back({"observation mask", m.graph.node(v).name + " has no noise-free pixel"});
  return r;
}

inline void require_valid(const ContinuousSelectionModel& m) {
  auto r = validate_model(m);
  if (!r.ok()) throw ValidationError("invalid continuous model: " + r.violations.front().kind + ": " + r.violations.front().message);
}

// Smallest singular value of the observation Jacobian over random points, relative to the largest.
inline double observation_conditioning(const ContinuousSelectionModel& m, int points, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x1AC0);
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < points; ++k) {
    std::vector<double> values(m.graph.size());
    for (auto& v : values) v = normal(rng, 0.0, 2.0);
    Eigen::VectorXd eps(m.pixels());
    for (int p = 0; p < m.pixels(); ++p) eps(p) = normal(rng);
    Eigen::MatrixXd J = observation_jacobian(m, values, eps);
    if (J.rows() != J.cols()) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
    const auto& s = svd.singularValues();
    if (s.size() == 0) return 0.0;
    worst = std::min(worst, s(s.size() - 1) / s(0));
  }
  return worst;
}

// Top-down sampling. Columns: every graph node in id order, then pixels x0..x{P-1}.
inline Dataset sample(const ContinuousSelectionModel& m, int n, std::uint64_t seed) {
  require_valid(m);
  if (n < 0) throw DomainError("sample count must be nonnegative");
  Rng rng = make_rng(seed, 0xC0);
  const int N = m.graph.size(), P = m.pixels();
  Dataset d;
  d.seed = seed;
  for (const auto& node : m.graph.nodes()) {
    d.labels.push_back(node.name);
    d.levels.push_back(node.level);
  }
  for (int p = 0; p < P; ++p) {
    d.labels.push_back("x" + std::to_string(p));
    d.levels.push_back(m.bottom_level() + 1);
  }
  d.values.setZero(n, N + P);
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return m.graph.node(a).level < m.graph.node(b).level; });
  std::vector<double> values(N);
  Eigen::VectorXd eps(P);
  for (int r = 0; r < n; ++r) {
    for (int v : order) {
      const auto& e = m.equations[v];
      if (e.categories > 0)
        values[v] = uniform_int(rng, 0, e.categories - 1);
      else
        values[v] = (e.inputs.empty() ? 0.0 : m.mean(v, values)) + e.noise_scale * noise_draw(e.noise, rng);
    }
    for (int p = 0; p < P; ++p) eps(p) = normal(rng);
    Eigen::VectorXd x = m.observe(values, eps);
    for (int v = 0; v < N; ++v) d.values(r, v) = values[v];
    for (int p = 0; p < P; ++p) d.values(r, N + p) = x(p);
  }
  d.validate();
  return d;
}

struct ContinuousSpec {
  int pixels_per_node = 4;
  double weight_low = 1.0;
  double weight_high = 2.0;
  double noise_scale = 1.0;
  NoiseFamily noise = NoiseFamily::gaussian;
  Squash squash = Squash::leaky_tanh;
  int top_categories = 0;  // > 0: top nodes are discrete
};

// Random equations and observation blocks on a fixed graph.
inline ContinuousSelectionModel random_continuous_model(const SelectionGraph& g, const ContinuousSpec& spec, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0xC0DE);
  ContinuousSelectionModel m;
  m.graph = g;
  m.equations.resize(g.size());
  const int top = g.min_level();
  for (int v = 0; v < g.size(); ++v) {
    auto& e = m.equations[v];
    e.noise = spec.noise;
    e.noise_scale = spec.noise_scale;
    e.squash = spec.squash;
    if (g.node(v).level == top) {
      if (spec.top_categories > 0 && g.node(v).kind == NodeKind::discrete) e.categories = spec.top_categories;
      continue;
    }
    e.inputs = g.children(v);
    for (std::size_t i = 0; i < e.inputs.size(); ++i) {
      double w = spec.weight_low + (spec.weight_high - spec.weight_low) * uniform01(rng);
      e.weights.push_back(uniform01(rng) < 0.5 ? -w : w);
    }
    e.bias = normal(rng, 0.0, 0.3);
  }
  for (int v : m.bottom_nodes())
    for (int k = 0; k < spec.pixels_per_node; ++k) {
      m.observation.owner.push_back(v);
      m.observation.gain.push_back(0.5 + uniform01(rng));
      m.observation.noise_gain.push_back(k == 0 ? 0.0 : 0.3 + 0.5 * uniform01(rng));
    }
  require_valid(m);
  return m;
}

// Literal graph of the visual running example: D1, D2 at level 0, then Z1 (2),
// Z2 (4) and Z3 (6 bottom nodes), 19 edges from finer to coarser.
inline SelectionGraph figure2_graph(NodeKind latent_kind = NodeKind::continuous) {
  SelectionGraph g;
  g.add_node("D1", 0, NodeKind::discrete);
  g.add_node("D2", 0, NodeKind::discrete);
  for (const char* n : {"Z11", "Z12"}) g.add_node(n, 1, latent_kind);
  for (const char* n : {"Z21", "Z22", "Z23", "Z24"}) g.add_node(n, 2, latent_kind);
  for (const char* n : {"Z31", "Z32", "Z33", "Z34", "Z35", "Z36"}) g.add_node(n, 3, latent_kind);
  const std::pair<const char*, const char*> edges[] = {
      {"Z11", "D1"}, {"Z11", "D2"}, {"Z12", "D2"},  {"Z21", "Z11"}, {"Z22", "Z11"}, {"Z23", "Z11"}, {"Z22", "Z12"},
      {"Z23", "Z12"}, {"Z24", "Z12"}, {"Z31", "Z21"}, {"Z31", "Z22"}, {"Z32", "Z21"}, {"Z32", "Z22"}, {"Z33", "Z22"},
      {"Z34", "Z23"}, {"Z35", "Z22"}, {"Z35", "Z24"}, {"Z36", "Z23"}, {"Z36", "Z24"}};
  for (const auto& [a, b] : edges) g.add_edge(a, b);
  return g;
}

// Two latent levels under four auxiliary roots: every bottom node feeds a distinct
// pair of the four middle nodes, every middle node feeds its own root, so each
// latent is pinned down by the intersection of its coarser concepts' parent sets.
inline SelectionGraph sparse_two_level_graph() {
  SelectionGraph g;
  for (int i = 1; i <= 4; ++i) g.add_node("A" + std::to_string(i), 0, NodeKind::continuous);
  for (int i = 1; i <= 4; ++i) g.add_node("M" + std::to_string(i), 1, NodeKind::continuous);
  for (int i = 1; i <= 6; ++i) g.add_node("B" + std::to_string(i), 2, NodeKind::continuous);
  for (int i = 1; i <= 4; ++i) g.add_edge("M" + std::to_string(i), "A" + std::to_string(i));
  const int pairs[6][2] = {{1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}};
  for (int b = 0; b < 6; ++b)
    for (int k = 0; k < 2; ++k) g.add_edge("B" + std::to_string(b + 1), "M" + std::to_string(pairs[b][k]));
  return g;
}

}  // namespace hsel
