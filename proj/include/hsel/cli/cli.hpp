#pragma once

#include <CLI11.hpp>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hsel/common/error.hpp"
#include "hsel/conditions/condition_check.hpp"
#include "hsel/discovery/binary_fixture.hpp"
#include "hsel/discovery/binary_matrix.hpp"
#include "hsel/discovery/concept_graph.hpp"
#include "hsel/discovery/pc.hpp"
#include "hsel/ident/equivalence.hpp"
#include "hsel/ident/identify.hpp"
#include "hsel/io/serialize.hpp"
#include "hsel/metrics/graph_distance.hpp"
#include "hsel/model/continuous_model.hpp"
#include "hsel/model/dataset.hpp"
#include "hsel/model/discrete_generators.hpp"
#include "hsel/oracle/oracle.hpp"
#include "hsel/oracle/verify.hpp"
#include "hsel/pipeline/pipeline.hpp"
#include "hsel/sae/sae.hpp"

namespace hsel::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode { kOk = 0, kDomainFailure = 1, kUsage = 2 };

// Flat key -> value store. Nested config objects flatten to dotted keys;
// precedence is explicit flag > --set > config file > default.
class Settings {
 public:
  void load_file(const std::string& path) {
    auto j = read_json_file(path);
    if (!j.is_object()) throw ConfigError("config file " + path + " must hold a JSON object");
    flatten(j, "");
  }

  void set(const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    values_[assignment.substr(0, eq)] = parse_value(assignment.substr(eq + 1));
  }

  void put(const std::string& key, nlohmann::json v) { values_[key] = std::move(v); }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  template <class T>
  T get(const std::string& key, T fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      if constexpr (std::is_same_v<T, std::vector<std::uint64_t>> || std::is_same_v<T, std::vector<int>> ||
                    std::is_same_v<T, std::vector<double>>) {
        if (!it->second.is_array()) return T{it->second.get<typename T::value_type>()};
      }
      return it->second.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("setting '" + key + "' has the wrong type");
    }
  }

  void require_known(const std::set<std::string>& allowed) const {
    for (const auto& [k, _] : values_)
      if (!allowed.count(k)) throw ConfigError("unknown setting '" + k + "'");
  }

 private:
  static nlohmann::json parse_value(const std::string& text) {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
    }
    if (text.find(',') != std::string::npos) {
      nlohmann::json arr = nlohmann::json::array();
      std::stringstream ss(text);
      std::string tok;
      while (std::getline(ss, tok, ',')) arr.push_back(parse_value(tok));
      return arr;
    }
    return text;
  }

  void flatten(const nlohmann::json& j, const std::string& prefix) {
    for (const auto& [k, v] : j.items()) {
      std::string key = prefix.empty() ? k : prefix + "." + k;
      if (v.is_object())
        flatten(v, key);
      else
        values_[key] = v;
    }
  }

  std::map<std::string, nlohmann::json> values_;
};

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool json = false;
  std::string out;
};

inline void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "flat JSON config file");
  sub->add_option("--set", c.overrides, "override a setting: key=value (repeatable)");
  sub->add_option("--seed", c.seed, "random seed (default 0)");
  sub->add_flag("--json", c.json, "machine-readable output");
  sub->add_option("--out", c.out, "output path");
}

inline Settings settings_for(const Common& c) {
  Settings s;
  if (!c.config.empty()) s.load_file(c.config);
  for (const auto& o : c.overrides) s.set(o);
  return s;
}

inline void emit(std::ostream& out, const Common& c, const ojson& j, const std::vector<std::pair<std::string, std::string>>& rows) {
  if (c.json) {
    out << j.dump(2) << '\n';
    return;
  }
  std::size_t w = 0;
  for (const auto& [k, _] : rows) w = std::max(w, k.size());
  for (const auto& [k, v] : rows) out << std::left << std::setw(static_cast<int>(w) + 2) << k << v << '\n';
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

inline std::string schema_of(const nlohmann::json& j) { return j.is_object() ? j.value("schema", std::string{}) : std::string{}; }

inline ojson header(const std::string& command, const Common& c) {
  ojson j;
  j["command"] = command;
  j["seed"] = c.seed;
  return j;
}

inline int cmd_gen(const Common& c, std::ostream& out) {
  Settings s = settings_for(c);
  s.require_known({"kind", "samples", "data", "bottom_support", "pixels_per_node", "noise"});
  const std::string kind = s.get<std::string>("kind", "discrete");
  const int samples = s.get<int>("samples", 0);
  const std::string data = s.get<std::string>("data", "");
  ojson j = header("gen", c);
  j["kind"] = kind;
  ojson model;
  Dataset ds;
  if (kind == "discrete" || kind == "figure3") {
    DiscreteSelectionModel m;
    if (kind == "figure3") {
      m = figure3_model(c.seed);
    } else {
      RandomDiscreteSpec spec;
      spec.bottom_support = s.get<int>("bottom_support", spec.bottom_support);
      m = random_discrete_model(spec, c.seed);
    }
    model = to_json(m);
    if (samples > 0) ds = sample(m, samples, c.seed);
  } else if (kind == "continuous" || kind == "figure2" || kind == "sparse") {
    ContinuousSpec spec;
    spec.pixels_per_node = s.get<int>("pixels_per_node", spec.pixels_per_node);
    spec.noise = noise_family_from_string(s.get<std::string>("noise", to_string(spec.noise)));
    auto m = random_continuous_model(kind == "sparse" ? sparse_two_level_graph() : figure2_graph(NodeKind::continuous), spec, c.seed);
    model = to_json(m);
    if (samples > 0) ds = sample(m, samples, c.seed);
  } else if (kind == "binary") {
    auto h = figure2_binary_fixture(c.seed);
    model = {{"schema", "hsel.binary_fixture/1"}, {"graph", to_json(h.graph)}, {"bias", h.bias}, {"weights", h.weights}};
    if (samples > 0) ds = to_dataset(sample_binary(h, samples, c.seed), c.seed);
  } else {
    throw ConfigError("unknown model kind '" + kind + "'");
  }
  if (!c.out.empty()) write_text_file(c.out, model.dump(2) + "\n");
  if (samples > 0) {
    if (data.empty()) throw ConfigError("samples requested without a data path (--set data=...)");
    write_dataset(ds, data);
    j["data"] = {{"path", data}, {"rows", ds.rows()}, {"columns", ds.cols()}};
  }
  j["nodes"] = model.at("graph").at("nodes").size();
  j["edges"] = model.at("graph").at("edges").size();
  if (c.out.empty()) j["model"] = model;
  emit(out, c, j,
       {{"kind", kind}, {"seed", std::to_string(c.seed)}, {"nodes", std::to_string(j["nodes"].get<int>())},
        {"edges", std::to_string(j["edges"].get<int>())}, {"model", c.out.empty() ? "(stdout with --json)" : c.out}});
  if (!c.json && c.out.empty()) out << model.dump(2) << '\n';
  return kOk;
}

inline int cmd_check(const Common& c, const std::string& model_path, std::ostream& out) {
  Settings s = settings_for(c);
  s.require_known({"tolerance", "grid_points"});
  auto mj = read_json_file(model_path);
  ConditionReport rep;
  std::string kind;
  if (schema_of(mj) == kDiscreteModelSchema) {
    kind = "discrete";
    rep = check_discrete_conditions(discrete_model_from_json(mj), s.get<double>("tolerance", 1e-9));
  } else if (schema_of(mj) == kContinuousModelSchema) {
    kind = "continuous";
    ContinuousCheckOptions opt;
    opt.seed = c.seed;
    opt.grid_points = s.get<int>("grid_points", opt.grid_points);
    rep = check_continuous_conditions(continuous_model_from_json(mj), opt);
  } else {
    throw IoError(model_path + " is neither a discrete nor a continuous model file");
  }
  ojson j = header("check", c);
  j["model_kind"] = kind;
  j["report"] = to_json(rep);
  std::vector<std::pair<std::string, std::string>> rows{{"model", kind}};
  for (const auto& [id, v] : rep.verdicts) rows.push_back({id, to_string(v)});
  emit(out, c, j, rows);
  return kOk;
}

inline int cmd_identify(const Common& c, const std::string& joint_path, const std::string& truth_path, std::ostream& out) {
  Settings s = settings_for(c);
  s.require_known({"level_cap", "search_cap", "tolerance"});
  IdentifyOptions opt;
  opt.level_cap = s.get<int>("level_cap", opt.level_cap);
  opt.search_cap = s.get<int>("search_cap", opt.search_cap);
  opt.tolerance = s.get<double>("tolerance", opt.tolerance);
  auto jj = read_json_file(joint_path);
  std::optional<DiscreteSelectionModel> truth;
  JointTable joint;
  if (schema_of(jj) == kDiscreteModelSchema) {
    truth = discrete_model_from_json(jj);
    joint = exact_joint(*truth, true);
  } else {
    joint = joint_from_json(jj);
  }
  if (!truth_path.empty()) truth = discrete_model_from_json(read_json_file(truth_path));
  auto learned = identify_hierarchy(joint, opt);
  if (!c.out.empty()) write_text_file(c.out, to_json(learned).dump(2) + "\n");
  ojson j = header("identify", c);
  j["observed"] = joint.arity();
  j["learned_levels"] = learned.learned_levels;
  j["latents"] = static_cast<int>(learned.graph.size() - learned.observed().size());
  j["error"] = learned.error ? ojson(*learned.error) : ojson(nullptr);
  std::vector<std::pair<std::string, std::string>> rows{{"observed", std::to_string(joint.arity())},
                                                         {"learned levels", std::to_string(learned.learned_levels)},
                                                         {"latents", std::to_string(j["latents"].get<int>())}};
  if (learned.error) rows.push_back({"error", *learned.error});
  if (truth && !learned.error) {
    auto m = oracle::oracle_best_match(*truth, learned);
    auto eq = check_componentwise_equivalence(*truth, learned);
    j["witness"] = m.found;
    j["equivalence"] = to_json(eq);
    rows.push_back({"witness", m.found ? "found" : "none"});
    if (!m.found) rows.push_back({"closest", m.closest});
  } else {
    j["witness"] = nullptr;
  }
  if (c.out.empty()) j["learned"] = to_json(learned);
  emit(out, c, j, rows);
  return learned.error ? kDomainFailure : kOk;
}

inline Eigen::MatrixXd feature_columns(const Dataset& d, const std::string& prefix, std::vector<std::string>* labels = nullptr) {
  std::vector<int> cols;
  for (int i = 0; i < d.cols(); ++i)
    if (prefix.empty() || d.labels[i].rfind(prefix, 0) == 0) cols.push_back(i);
  if (cols.empty()) throw DomainError("no columns start with '" + prefix + "'");
  auto sel = d.select(cols);
  if (labels) *labels = sel.labels;
  return sel.values;
}

inline int cmd_train_sae(const Common& c, const std::string& data_path, std::ostream& out) {
  Settings s = settings_for(c);
  s.require_known({"columns", "K", "latent_dim", "training_steps", "step_size", "batch_size", "window", "divergence_windows"});
  auto d = read_dataset(data_path);
  Eigen::MatrixXd X = feature_columns(d, s.get<std::string>("columns", "x"));
  SAEConfig cfg;
  cfg.input_dim = static_cast<int>(X.cols());
  cfg.latent_dim = s.get<int>("latent_dim", cfg.input_dim);
  cfg.K = s.get<int>("K", std::max(1, cfg.latent_dim / 4));
  cfg.training_steps = s.get<int>("training_steps", cfg.training_steps);
  cfg.step_size = s.get<double>("step_size", 3e-3);
  cfg.batch_size = std::min(s.get<int>("batch_size", cfg.batch_size), static_cast<int>(X.rows()));
  cfg.window = s.get<int>("window", cfg.window);
  cfg.divergence_windows = s.get<int>("divergence_windows", cfg.divergence_windows);
  cfg.seed = c.seed;
  auto m = train_sae(X, cfg);
  if (!c.out.empty()) save_checkpoint(m, c.out);
  ojson j = header("train-sae", c);
  j["config"] = to_json(cfg);
  j["final_loss"] = m.final_loss;
  j["checkpoint_id"] = checkpoint_id(m);
  j["rows"] = X.rows();
  emit(out, c, j,
       {{"input_dim", std::to_string(cfg.input_dim)}, {"latent_dim", std::to_string(cfg.latent_dim)}, {"K", std::to_string(cfg.K)},
        {"final_loss", fmt(m.final_loss)}, {"checkpoint", c.out.empty() ? "(not saved)" : c.out}});
  return kOk;
}

inline int cmd_discover(const Common& c, const std::string& data_path, std::ostream& out) {
  Settings s = settings_for(c);
  s.require_known({"alpha", "max_conditioning", "samples", "exact", "format", "larger_level_is_coarser"});
  PcOptions po;
  po.alpha = s.get<double>("alpha", po.alpha);
  po.max_conditioning = s.get<int>("max_conditioning", po.max_conditioning);
  const std::string format = s.get<std::string>("format", "json");
  if (format != "json" && format != "dot") throw ConfigError("format must be json or dot");
  ojson j = header("discover", c);
  ConceptGraph g;
  std::optional<ConceptGraph> truth;
  Skeleton sk;
  if (data_path.empty()) {
    auto h = figure2_binary_fixture(c.seed);
    truth = truth_concept_graph(h.graph);
    if (s.get<bool>("exact", false)) {
      sk = pc_search_exact(binary_exact_joint(h), po);
      j["source"] = "fixture (exact CI)";
    } else {
      auto bin = sample_binary(h, s.get<int>("samples", 10000), c.seed);
      sk = pc_search(bin, po);
      j["source"] = "fixture sample";
    }
    g = orient_levels(sk, hierarchy_nodes(h.graph), false);
  } else {
    auto d = read_dataset(data_path);
    BinaryFeatureMatrix bin;
    for (int col = 0; col < d.cols(); ++col) {
      std::vector<std::uint8_t> v(static_cast<std::size_t>(d.rows()));
      for (int r = 0; r < d.rows(); ++r) {
        double x = d.values(r, col);
        if (x != 0.0 && x != 1.0) throw DomainError("column " + d.labels[col] + " is not binary");
        v[r] = static_cast<std::uint8_t>(x);
      }
      bin.add_column({d.levels[col], col}, std::move(v));
    }
    sk = pc_search(bin, po);
    std::vector<ConceptNode> nodes;
    for (int col = 0; col < d.cols(); ++col) nodes.push_back({d.levels[col], col, d.labels[col]});
    g = orient_levels(sk, nodes, s.get<bool>("larger_level_is_coarser", false));
    j["source"] = data_path;
  }
  if (!c.out.empty()) write_text_file(c.out, export_graph(g, format));
  j["tests"] = sk.tests;
  j["edges"] = g.edges.size();
  j["warnings"] = sk.warnings;
  std::vector<std::pair<std::string, std::string>> rows{{"source", j["source"].get<std::string>()},
                                                         {"edges", std::to_string(g.edges.size())},
                                                         {"tests", std::to_string(sk.tests)}};
  if (truth) {
    auto dist = graph_distance(*truth, g);
    j["distance"] = {{"shd", dist.shd}, {"precision", dist.precision}, {"recall", dist.recall}, {"oriented_precision", dist.oriented_precision}};
    rows.push_back({"shd", std::to_string(dist.shd)});
    rows.push_back({"recall", fmt(dist.recall)});
    rows.push_back({"oriented precision", fmt(dist.oriented_precision)});
  }
  j["graph"] = to_json(g);
  emit(out, c, j, rows);
  return kOk;
}

inline ExperimentConfig experiment_config(const Settings& s, const Common& c) {
  s.require_known({"samples", "seeds", "alpha", "sparsity_grid", "grid_reference", "run_ablation", "feature_noise", "eval_rows",
                   "active_per_level", "latent_multipliers", "steer_strengths", "sae.training_steps", "sae.step_size",
                   "sae.batch_size", "ablation.concepts", "ablation.block", "ablation.active", "ablation.latent_dim",
                   "ablation.samples", "ablation.training_steps", "ablation.eval_rows", "model.pixels_per_node", "model.weight_low",
                   "model.weight_high", "model.noise_scale", "model.noise", "model.squash"});
  ExperimentConfig cfg;
  cfg.samples = s.get<int>("samples", cfg.samples);
  cfg.seeds = s.get<std::vector<std::uint64_t>>("seeds", {c.seed});
  cfg.alpha = s.get<double>("alpha", cfg.alpha);
  cfg.sparsity_grid = s.get<std::vector<int>>("sparsity_grid", cfg.sparsity_grid);
  cfg.grid_reference = s.get<int>("grid_reference", cfg.grid_reference);
  cfg.run_ablation = s.get<bool>("run_ablation", cfg.run_ablation);
  cfg.feature_noise = s.get<double>("feature_noise", cfg.feature_noise);
  cfg.eval_rows = s.get<int>("eval_rows", cfg.eval_rows);
  cfg.active_per_level = s.get<std::vector<int>>("active_per_level", cfg.active_per_level);
  cfg.latent_multipliers = s.get<std::vector<int>>("latent_multipliers", cfg.latent_multipliers);
  cfg.steer_strengths = s.get<std::vector<double>>("steer_strengths", cfg.steer_strengths);
  cfg.sae.training_steps = s.get<int>("sae.training_steps", cfg.sae.training_steps);
  cfg.sae.step_size = s.get<double>("sae.step_size", cfg.sae.step_size);
  cfg.sae.batch_size = s.get<int>("sae.batch_size", cfg.sae.batch_size);
  cfg.ablation.concepts = s.get<int>("ablation.concepts", cfg.ablation.concepts);
  cfg.ablation.block = s.get<int>("ablation.block", cfg.ablation.block);
  cfg.ablation.active = s.get<int>("ablation.active", cfg.ablation.active);
  cfg.ablation.latent_dim = s.get<int>("ablation.latent_dim", cfg.ablation.latent_dim);
  cfg.ablation.samples = s.get<int>("ablation.samples", cfg.ablation.samples);
  cfg.ablation.training_steps = s.get<int>("ablation.training_steps", cfg.ablation.training_steps);
  cfg.ablation.eval_rows = s.get<int>("ablation.eval_rows", cfg.ablation.eval_rows);
  cfg.model.pixels_per_node = s.get<int>("model.pixels_per_node", cfg.model.pixels_per_node);
  cfg.model.weight_low = s.get<double>("model.weight_low", cfg.model.weight_low);
  cfg.model.weight_high = s.get<double>("model.weight_high", cfg.model.weight_high);
  cfg.model.noise_scale = s.get<double>("model.noise_scale", cfg.model.noise_scale);
  cfg.model.noise = noise_family_from_string(s.get<std::string>("model.noise", to_string(cfg.model.noise)));
  cfg.model.squash = squash_from_string(s.get<std::string>("model.squash", to_string(cfg.model.squash)));
  cfg.output_dir = c.out;
  return cfg;
}

inline int cmd_experiment(const Common& c, std::ostream& out) {
  auto cfg = experiment_config(settings_for(c), c);
  auto rep = run_hierarchy_experiment(cfg);
  ojson j = header("experiment", c);
  j["report"] = to_json(rep);
  std::vector<std::pair<std::string, std::string>> rows{{"config hash", rep.config_hash}};
  for (const auto& sr : rep.seeds) {
    std::string p = "seed " + std::to_string(sr.seed) + " ";
    for (const auto& l : sr.levels)
      rows.push_back({p + "level " + std::to_string(l.level),
                      "match " + fmt(l.match.mean_score) + "  spread " + fmt(l.spread_top1) + "  deact " + fmt(l.deactivation_l1) +
                          "  locality " + fmt(l.mean_locality)});
    rows.push_back({p + "graph", "shd " + std::to_string(sr.graph.shd) + "  recall " + fmt(sr.graph.recall)});
    for (const auto& a : sr.ablation)
      rows.push_back({p + "K=" + std::to_string(a.K), "overlap " + fmt(a.overlap) + "  coverage " + fmt(a.coverage)});
  }
  emit(out, c, j, rows);
  return kOk;
}

inline int cmd_steer(const Common& c, const std::string& checkpoint, const std::string& data_path, std::ostream& out) {
  Settings s = settings_for(c);
  ojson j = header("steer", c);
  std::vector<std::pair<std::string, std::string>> rows;
  if (checkpoint.empty()) {
    s.require_known({"samples", "steer_strengths", "sae.training_steps", "eval_rows"});
    ExperimentConfig cfg;
    cfg.seeds = {c.seed};
    cfg.run_ablation = false;
    cfg.samples = s.get<int>("samples", cfg.samples);
    cfg.eval_rows = s.get<int>("eval_rows", cfg.eval_rows);
    cfg.sae.training_steps = s.get<int>("sae.training_steps", cfg.sae.training_steps);
    cfg.steer_strengths = s.get<std::vector<double>>("steer_strengths", cfg.steer_strengths);
    auto rep = run_hierarchy_experiment(cfg);
    const auto& st = rep.seeds.front().steering;
    ojson sj;
    sj["strengths"] = st.strengths;
    for (const auto& [level, v] : st.locality) {
      sj["locality"][std::to_string(level)] = v;
      sj["mask_fraction"][std::to_string(level)] = st.mask_fraction.at(level);
      sj["effect_l1"][std::to_string(level)] = st.effect_l1.at(level);
      rows.push_back({"level " + std::to_string(level), "locality " + fmt(v) + "  mask " + fmt(st.mask_fraction.at(level))});
    }
    sj["zero_strength_max_change"] = st.zero_strength_max_change;
    sj["additivity_error"] = st.additivity_error;
    j["study"] = sj;
    rows.push_back({"zero-strength change", fmt(st.zero_strength_max_change)});
    rows.push_back({"additivity error", fmt(st.additivity_error)});
    emit(out, c, j, rows);
    return kOk;
  }
  s.require_known({"feature", "strength", "mode", "columns", "rows"});
  if (data_path.empty()) throw ConfigError("--data is required with --checkpoint");
  auto m = load_checkpoint(checkpoint);
  auto d = read_dataset(data_path);
  std::vector<std::string> labels;
  Eigen::MatrixXd X = feature_columns(d, s.get<std::string>("columns", "x"), &labels);
  if (X.cols() != m.input_dim()) throw DomainError("data has " + std::to_string(X.cols()) + " feature columns, checkpoint expects " +
                                                  std::to_string(m.input_dim()));
  const std::string mode_s = s.get<std::string>("mode", "additive");
  if (mode_s != "additive" && mode_s != "deactivate") throw ConfigError("mode must be additive or deactivate");
  SteerSpec spec{s.get<int>("feature", 0), s.get<double>("strength", 1.0), mode_s == "additive" ? SteerMode::additive : SteerMode::deactivate};
  const int rows_n = std::min(s.get<int>("rows", static_cast<int>(X.rows())), static_cast<int>(X.rows()));
  Eigen::MatrixXd Y = X.topRows(rows_n);
  for (int r = 0; r < rows_n; ++r) Y.row(r) = steer(m, X.row(r).transpose(), spec).transpose();
  auto eff = deactivation_effect(X.topRows(rows_n), Y);
  if (!c.out.empty()) write_dataset(make_dataset(Y, labels, std::vector<int>(labels.size(), 0), c.seed), c.out);
  j["feature"] = spec.feature;
  j["strength"] = spec.strength;
  j["mode"] = mode_s;
  j["rows"] = rows_n;
  j["mean_effect_l1"] = eff.mean_l1;
  j["mean_cosine"] = eff.mean_cosine;
  emit(out, c, j,
       {{"feature", std::to_string(spec.feature)}, {"strength", fmt(spec.strength)}, {"mode", mode_s}, {"mean effect L1", fmt(eff.mean_l1)}});
  return kOk;
}

inline int cmd_verify(const Common& c, const std::string& suite, std::ostream& out) {
  Settings s = settings_for(c);
  s.require_known({"set_families", "corpus_size", "products", "max_sets", "universe"});
  VerifyOptions o;
  o.seed = c.seed;
  o.set_families = s.get<int>("set_families", o.set_families);
  o.corpus_size = s.get<int>("corpus_size", o.corpus_size);
  o.products = s.get<int>("products", o.products);
  o.max_sets = s.get<int>("max_sets", o.max_sets);
  o.universe = s.get<int>("universe", o.universe);
  auto results = verify_suites(suite, o);
  ojson j = header("verify", c);
  j["suite"] = suite;
  j["results"] = ojson::array();
  std::vector<std::pair<std::string, std::string>> rows;
  bool ok = true;
  for (const auto& r : results) {
    j["results"].push_back(to_json(r));
    rows.push_back({r.name, std::to_string(r.agreed) + "/" + std::to_string(r.cases) + (r.ok() ? "  ok" : "  DISAGREE")});
    ok = ok && r.ok();
  }
  j["ok"] = ok;
  emit(out, c, j, rows);
  return ok ? kOk : kDomainFailure;
}

inline int cmd_export(const Common& c, const std::string& graph_path, const std::string& format, std::ostream& out) {
  settings_for(c).require_known({});
  if (format != "dot" && format != "json") throw ConfigError("format must be dot or json");
  auto g = concept_graph_from_json(read_json_file(graph_path));
  std::string text = export_graph(g, format);
  if (!c.out.empty()) write_text_file(c.out, text);
  if (c.json) {
    ojson j = header("export", c);
    j["format"] = format;
    j["text"] = text;
    out << j.dump(2) << '\n';
  } else if (c.out.empty()) {
    out << text;
  } else {
    out << "wrote " << c.out << '\n';
  }
  return kOk;
}

inline std::string version_text() {
  std::ostringstream os;
  os << "hsel " << kVersion << '\n';
  for (const char* s : {kDiscreteModelSchema, kContinuousModelSchema, kJointSchema, kDatasetSchema, kCheckpointSchema,
                        kConceptGraphSchema, kReportSchema})
    os << "  " << s << '\n';
  return os.str();
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical selection models: synthesis, checks, identification, discovery and experiments", "hsel"};
  app.require_subcommand(0, 1);
  bool version = false;
  app.add_flag("--version", version, "print tool and file schema versions");

  std::map<std::string, Common> common;
  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    add_common(s, common[name]);
    return s;
  };
  std::string model_path, joint_path, truth_path, data_path, checkpoint, suite = "all", graph_path, format = "dot";
  sub("gen", "synthesize a model (and optionally a dataset)");
  sub("check", "condition report for a model file")->add_option("--model", model_path, "model JSON")->required();
  auto* ident = sub("identify", "recover a discrete hierarchy from a joint or model file");
  ident->add_option("--joint", joint_path, "joint table or discrete model JSON")->required();
  ident->add_option("--truth", truth_path, "ground-truth discrete model for the witness search");
  sub("train-sae", "train a top-K sparse autoencoder on dataset columns")->add_option("--data", data_path, "dataset CSV")->required();
  sub("discover", "binary features -> PC -> level orientation -> export")->add_option("--data", data_path, "binary dataset CSV");
  sub("experiment", "end-to-end synthetic hierarchy experiment");
  auto* st = sub("steer", "feature steering with a checkpoint, or the steering study");
  st->add_option("--checkpoint", checkpoint, "SAE checkpoint");
  st->add_option("--data", data_path, "dataset CSV");
  sub("verify", "oracle cross-checks")->add_option("--suite", suite, "all|sets|nonneg|conditions|coparents|identify|discovery");
  auto* ex = sub("export", "convert a concept graph JSON to DOT or JSON");
  ex->add_option("--graph", graph_path, "concept graph JSON")->required();
  ex->add_option("--format", format, "dot|json");

  if (argc <= 1) {
    err << app.help();
    return kUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }
  if (version) {
    out << version_text();
    return kOk;
  }
  auto chosen = app.get_subcommands();
  if (chosen.empty()) {
    err << app.help();
    return kUsage;
  }
  const std::string name = chosen.front()->get_name();
  const Common& c = common[name];
  try {
    if (name == "gen") return cmd_gen(c, out);
    if (name == "check") return cmd_check(c, model_path, out);
    if (name == "identify") return cmd_identify(c, joint_path, truth_path, out);
    if (name == "train-sae") return cmd_train_sae(c, data_path, out);
    if (name == "discover") return cmd_discover(c, data_path, out);
    if (name == "experiment") return cmd_experiment(c, out);
    if (name == "steer") return cmd_steer(c, checkpoint, data_path, out);
    if (name == "verify") return cmd_verify(c, suite, out);
    if (name == "export") return cmd_export(c, graph_path, format, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << name << ": " << e.what() << '\n';
    return kDomainFailure;
  } catch (const nlohmann::json::exception& e) {
    err << name << ": malformed input: " << e.what() << '\n';
    return kDomainFailure;
  }
  err << app.help();
  return kUsage;
}

}  // namespace hsel::cli
