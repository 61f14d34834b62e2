#pragma once

#include <fstream>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "hsel/common/error.hpp"
#include "hsel/conditions/condition_check.hpp"
#include "hsel/ident/equivalence.hpp"
#include "hsel/ident/identify.hpp"
#include "hsel/model/continuous_model.hpp"
#include "hsel/model/discrete_model.hpp"
#include "hsel/model/joint_table.hpp"
#include "hsel/set_calculus/set_calculus.hpp"

namespace hsel {

inline constexpr const char* kDiscreteModelSchema = "hsel.discrete_model/1";
inline constexpr const char* kContinuousModelSchema = "hsel.continuous_model/1";
inline constexpr const char* kJointSchema = "hsel.joint/1";
inline constexpr const char* kSetFamilySchema = "hsel.set_family/1";

using ojson = nlohmann::ordered_json;

namespace detail {

inline void expect_schema(const nlohmann::json& j, const char* schema) {
  if (!j.is_object() || j.value("schema", std::string{}) != schema)
    throw IoError(std::string("expected schema ") + schema + ", got '" + (j.is_object() ? j.value("schema", std::string{}) : "") + "'");
}

inline std::string tuple_key(const Radix& r, std::uint64_t code) { return join_tuple(r.decode(code)); }

inline std::uint64_t key_code(const Radix& r, const std::string& key) {
  auto t = split_tuple(key);
  if (t.size() != r.digits()) throw IoError("tuple key '" + key + "' has wrong arity");
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] < 0 || t[i] >= r.radices()[i]) throw IoError("tuple key '" + key + "' outside supports");
  return r.encode(t);
}

inline int node_id(const SelectionGraph& g, const nlohmann::json& name) {
  int id = g.find(name.get<std::string>());
  if (id < 0) throw IoError("unknown node '" + name.get<std::string>() + "'");
  return id;
}

inline std::vector<std::string> names_of(const SelectionGraph& g, const std::vector<int>& ids) {
  std::vector<std::string> out;
  for (int v : ids) out.push_back(g.node(v).name);
  return out;
}

}  // namespace detail

inline ojson to_json(const SelectionGraph& g) {
  ojson j;
  j["nodes"] = ojson::array();
  for (const auto& n : g.nodes()) j["nodes"].push_back({{"name", n.name}, {"level", n.level}, {"kind", to_string(n.kind)}});
  j["edges"] = ojson::array();
  for (const auto& e : g.edges()) j["edges"].push_back({g.node(e.from).name, g.node(e.to).name});
  return j;
}

inline SelectionGraph graph_from_json(const nlohmann::json& j) {
  SelectionGraph g;
  for (const auto& n : j.at("nodes")) {
    std::string name = n.at("name").get<std::string>();
    if (g.find(name) >= 0) throw IoError("duplicate node '" + name + "'");
    g.add_node(name, n.at("level").get<int>(), node_kind_from_string(n.value("kind", std::string("discrete"))));
  }
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) throw IoError("edges are [from, to] name pairs");
    g.add_edge(detail::node_id(g, e[0]), detail::node_id(g, e[1]));
  }
  return g;
}

namespace detail {

inline ojson functions_json(const SelectionGraph& g, const std::vector<SelectionFunction>& fs) {
  ojson out = ojson::object();
  for (const auto& f : fs) {
    if (f.target < 0) continue;
    ojson t = ojson::object();
    Radix r = f.radix();
    for (std::uint64_t c = 0; c < f.table.size(); ++c)
      if (f.table[c] != SelectionFunction::kOutside) t[tuple_key(r, c)] = f.table[c];
    out[g.node(f.target).name] = {{"parents", names_of(g, f.parents)}, {"table", t}};
  }
  return out;
}

inline std::vector<SelectionFunction> functions_from_json(const SelectionGraph& g, const std::vector<int>& supports, const nlohmann::json& j) {
  std::vector<SelectionFunction> fs(g.size());
  for (auto& f : fs) f.target = -1;
  for (const auto& [name, fj] : j.items()) {
    int v = node_id(g, nlohmann::json(name));
    std::vector<int> parents, ps;
    for (const auto& p : fj.at("parents")) parents.push_back(node_id(g, p));
    for (int p : parents) ps.push_back(supports.at(p));
    Radix r(ps);
    std::vector<int> table(r.size(), SelectionFunction::kOutside);
    for (const auto& [key, val] : fj.at("table").items()) table[key_code(r, key)] = val.get<int>();
    fs[v] = make_selection(v, parents, ps, table);
  }
  return fs;
}

inline ojson supports_json(const SelectionGraph& g, const std::vector<int>& s) {
  ojson out = ojson::object();
  for (int v = 0; v < g.size(); ++v) out[g.node(v).name] = s.at(v);
  return out;
}

inline std::vector<int> supports_from_json(const SelectionGraph& g, const nlohmann::json& j) {
  std::vector<int> s(g.size(), 0);
  for (const auto& [name, val] : j.items()) s[node_id(g, nlohmann::json(name))] = val.get<int>();
  for (int v = 0; v < g.size(); ++v)
    if (s[v] < 1) throw IoError("missing or empty support for '" + g.node(v).name + "'");
  return s;
}

}  // namespace detail

inline ojson to_json(const DiscreteSelectionModel& m) {
  ojson j;
  j["schema"] = kDiscreteModelSchema;
  j["graph"] = to_json(m.graph);
  j["supports"] = detail::supports_json(m.graph, m.supports);
  j["functions"] = detail::functions_json(m.graph, m.functions);
  Radix top = m.level_radix(m.top_level());
  ojson prior = ojson::object();
  for (std::uint64_t c = 0; c < m.top_prior.size(); ++c)
    if (m.top_prior[c] > 0.0) prior[detail::tuple_key(top, c)] = m.top_prior[c];
  j["top_prior"] = prior;
  j["conditionals"] = ojson::array();
  for (const auto& lc : m.conditionals) {
    Radix cr = m.level_radix(lc.level), fr = m.level_radix(lc.level + 1);
    ojson rows = ojson::object();
    for (std::uint64_t c = 0; c < lc.rows.size(); ++c) {
      if (lc.rows[c].empty()) continue;
      ojson row = ojson::object();
      for (const auto& [code, p] : lc.rows[c]) row[detail::tuple_key(fr, code)] = p;
      rows[detail::tuple_key(cr, c)] = row;
    }
    j["conditionals"].push_back({{"level", lc.level}, {"rows", rows}});
  }
  return j;
}

inline DiscreteSelectionModel discrete_model_from_json(const nlohmann::json& j) {
  detail::expect_schema(j, kDiscreteModelSchema);
  DiscreteSelectionModel m;
  m.graph = graph_from_json(j.at("graph"));
  m.supports = detail::supports_from_json(m.graph, j.at("supports"));
  m.functions = detail::functions_from_json(m.graph, m.supports, j.at("functions"));
  Radix top = m.level_radix(m.top_level());
  m.top_prior.assign(top.size(), 0.0);
  for (const auto& [key, p] : j.at("top_prior").items()) m.top_prior[detail::key_code(top, key)] = p.get<double>();
  if (j.contains("conditionals") && !j.at("conditionals").empty()) {
    for (const auto& lj : j.at("conditionals")) {
      LevelConditional lc;
      lc.level = lj.at("level").get<int>();
      Radix cr = m.level_radix(lc.level), fr = m.level_radix(lc.level + 1);
      lc.rows.assign(cr.size(), {});
      for (const auto& [ck, row] : lj.at("rows").items()) {
        auto& out = lc.rows[detail::key_code(cr, ck)];
        for (const auto& [fk, p] : row.items()) out.push_back({detail::key_code(fr, fk), p.get<double>()});
        std::sort(out.begin(), out.end());
      }
      m.conditionals.push_back(std::move(lc));
    }
  } else {
    build_conditionals(m);
  }
  require_valid(m);
  return m;
}

inline ojson to_json(const LearnedDiscreteModel& m) {
  ojson j;
  j["schema"] = kDiscreteModelSchema;
  j["graph"] = to_json(m.graph);
  j["supports"] = detail::supports_json(m.graph, m.supports);
  j["functions"] = detail::functions_json(m.graph, m.functions);
  j["learned_levels"] = m.learned_levels;
  ojson prov = ojson::array();
  for (const auto& p : m.provenance)
    prov.push_back({{"latent", p.latent},
                    {"parent", p.parent},
                    {"conditioning_set", p.conditioning_set},
                    {"informative_cells", p.informative_cells},
                    {"max_rank", p.max_rank}});
  j["provenance"] = prov;
  if (m.error) j["error"] = *m.error;
  return j;
}

inline LearnedDiscreteModel learned_model_from_json(const nlohmann::json& j) {
  detail::expect_schema(j, kDiscreteModelSchema);
  LearnedDiscreteModel m;
  m.graph = graph_from_json(j.at("graph"));
  m.supports = detail::supports_from_json(m.graph, j.at("supports"));
  m.functions = detail::functions_from_json(m.graph, m.supports, j.at("functions"));
  m.learned_levels = j.value("learned_levels", 0);
  for (const auto& p : j.value("provenance", nlohmann::json::array()))
    m.provenance.push_back({p.at("latent").get<std::string>(), p.at("parent").get<std::string>(),
                            p.at("conditioning_set").get<std::vector<std::string>>(), p.at("informative_cells").get<int>(),
                            p.at("max_rank").get<int>()});
  if (j.contains("error")) m.error = j.at("error").get<std::string>();
  return m;
}

inline ojson to_json(const JointTable& t) {
  ojson j;
  j["schema"] = kJointSchema;
  j["variables"] = ojson::array();
  for (std::size_t i = 0; i < t.arity(); ++i) j["variables"].push_back({{"name", t.names()[i]}, {"support", t.supports()[i]}});
  ojson table = ojson::object();
  for (const auto& e : t.entries()) table[detail::tuple_key(t.radix(), e.code)] = e.p;
  j["table"] = table;
  return j;
}

inline JointTable joint_from_json(const nlohmann::json& j) {
  detail::expect_schema(j, kJointSchema);
  std::vector<std::string> names;
  std::vector<int> sup;
  for (const auto& v : j.at("variables")) {
    names.push_back(v.at("name").get<std::string>());
    sup.push_back(v.at("support").get<int>());
  }
  JointTable t(names, sup);
  std::vector<JointTable::Entry> es;
  for (const auto& [key, p] : j.at("table").items()) {
    double v = p.get<double>();
    if (v < 0.0) throw IoError("negative probability for '" + key + "'");
    es.push_back({detail::key_code(t.radix(), key), v});
  }
  t.assign(std::move(es));
  return t;
}

inline ojson to_json(const ContinuousSelectionModel& m) {
  ojson j;
  j["schema"] = kContinuousModelSchema;
  j["graph"] = to_json(m.graph);
  ojson eqs = ojson::object();
  for (int v = 0; v < m.graph.size(); ++v) {
    const auto& e = m.equations[v];
    eqs[m.graph.node(v).name] = {{"inputs", detail::names_of(m.graph, e.inputs)},
                                 {"weights", e.weights},
                                 {"bias", e.bias},
                                 {"squash", to_string(e.squash)},
                                 {"leak", e.leak},
                                 {"noise", to_string(e.noise)},
                                 {"noise_scale", e.noise_scale},
                                 {"categories", e.categories}};
  }
  j["equations"] = eqs;
  ojson pixels = ojson::array();
  for (int p = 0; p < m.pixels(); ++p)
    pixels.push_back({{"owner", m.graph.node(m.observation.owner[p]).name},
                      {"gain", m.observation.gain[p]},
                      {"noise_gain", m.observation.noise_gain[p]}});
  j["observation"] = {{"leak", m.observation.leak}, {"pixels", pixels}};
  return j;
}

inline ContinuousSelectionModel continuous_model_from_json(const nlohmann::json& j) {
  detail::expect_schema(j, kContinuousModelSchema);
  ContinuousSelectionModel m;
  m.graph = graph_from_json(j.at("graph"));
  m.equations.resize(m.graph.size());
  for (const auto& [name, ej] : j.at("equations").items()) {
    auto& e = m.equations[detail::node_id(m.graph, nlohmann::json(name))];
    for (const auto& in : ej.at("inputs")) e.inputs.push_back(detail::node_id(m.graph, in));
    e.weights = ej.at("weights").get<std::vector<double>>();
    e.bias = ej.at("bias").get<double>();
    e.squash = squash_from_string(ej.at("squash").get<std::string>());
    e.leak = ej.at("leak").get<double>();
    e.noise = noise_family_from_string(ej.at("noise").get<std::string>());
    e.noise_scale = ej.at("noise_scale").get<double>();
    e.categories = ej.value("categories", 0);
  }
  const auto& oj = j.at("observation");
  m.observation.leak = oj.at("leak").get<double>();
  for (const auto& p : oj.at("pixels")) {
    m.observation.owner.push_back(detail::node_id(m.graph, p.at("owner")));
    m.observation.gain.push_back(p.at("gain").get<double>());
    m.observation.noise_gain.push_back(p.at("noise_gain").get<double>());
  }
  require_valid(m);
  return m;
}

inline ojson to_json(const ConditionReport& r) {
  ojson j;
  ojson v = ojson::object();
  for (const auto& [id, verdict] : r.verdicts) v[id] = to_string(verdict);
  j["verdicts"] = v;
  ojson nodes = ojson::array();
  for (const auto& n : r.nodes)
    nodes.push_back({{"check", n.check}, {"node", n.node}, {"verdict", to_string(n.verdict)}, {"detail", n.detail}, {"evidence", n.evidence}});
  j["nodes"] = nodes;
  ojson ev = ojson::object();
  for (const auto& [k, x] : r.evidence) ev[k] = x;
  j["evidence"] = ev;
  return j;
}

inline ojson to_json(const MatchReport& r) {
  ojson j;
  j["witness"] = r.witness;
  j["matched"] = r.matched;
  j["truth_latents"] = r.truth_latents;
  j["learned_latents"] = r.learned_latents;
  ojson ms = ojson::array();
  for (const auto& m : r.matches) {
    ojson b = ojson::object();
    for (const auto& [t, l] : m.bijection) b[std::to_string(t)] = l;
    ms.push_back({{"truth", m.truth}, {"learned", m.learned}, {"bijection", b}});
  }
  j["matches"] = ms;
  j["diagnostics"] = r.diagnostics;
  return j;
}

// Subsets are keyed by their decimal bitmask.
inline ojson to_json(const SetFamily& f) {
  ojson u = ojson::object();
  for (std::uint32_t m = 1; m < f.union_card.size(); ++m) u[std::to_string(m)] = f.union_card[m];
  return {{"schema", kSetFamilySchema}, {"n", f.n}, {"unions", u}};
}

inline SetFamily set_family_from_json(const nlohmann::json& j) {
  detail::expect_schema(j, kSetFamilySchema);
  SetFamily f;
  f.n = j.at("n").get<int>();
  if (f.n < 0 || f.n > 20) throw DomainError("set count must lie in [0, 20]");
  f.union_card.assign(std::size_t{1} << f.n, 0);
  for (const auto& [k, v] : j.at("unions").items()) {
    unsigned long m = std::stoul(k);
    if (m == 0 || m >= f.union_card.size()) throw DomainError("subset mask " + k + " out of range");
    f.union_card[m] = v.get<long long>();
  }
  return f;
}

inline ojson to_json(const ParentSignaturePartition& p) {
  ojson blocks = ojson::array();
  for (const auto& b : p.blocks) blocks.push_back({{"signature", b.signature}, {"count", b.count}});
  return {{"total", p.total}, {"blocks", blocks}};
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("malformed JSON in " + path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << text;
  if (!f) throw IoError("write failed for " + path);
}

}  // namespace hsel
