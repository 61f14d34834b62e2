#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hsel/common/combinatorics.hpp"
#include "hsel/common/error.hpp"

namespace hsel {

// Exact joint distribution over finite variables. Only positive-probability
// configurations are stored; every absent configuration has probability 0.
class JointTable {
 public:
  struct Entry {
    std::uint64_t code;
    double p;
  };

  JointTable() = default;
  JointTable(std::vector<std::string> names, std::vector<int> supports)
      : names_(std::move(names)), supports_(std::move(supports)), radix_(supports_) {
    if (names_.size() != supports_.size()) throw DomainError("names/supports size mismatch");
  }

  // Accumulates duplicate codes, drops zeros, sorts by code.
  void assign(std::vector<Entry> entries) {
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.code < b.code; });
    entries_.clear();
    for (const auto& e : entries) {
      if (e.p < 0.0) throw DomainError("negative probability");
      if (!entries_.empty() && entries_.back().code == e.code)
        entries_.back().p += e.p;
      else
        entries_.push_back(e);
    }
    std::erase_if(entries_, [](const Entry& e) { return e.p == 0.0; });
  }

  void add(std::span<const int> config, double p) { pending_.push_back({radix_.encode(config), p}); }
  void finalize() {
    auto all = std::move(entries_);
    all.insert(all.end(), pending_.begin(), pending_.end());
    pending_.clear();
    assign(std::move(all));
  }

  std::size_t arity() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<int>& supports() const { return supports_; }
  const Radix& radix() const { return radix_; }
  const std::vector<Entry>& entries() const { return entries_; }

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<int>(i);
    return -1;
  }

  int value(const Entry& e, std::size_t var) const { return radix_.digit(e.code, var); }
  std::vector<int> config(const Entry& e) const { return radix_.decode(e.code); }

  double total() const {
    double s = 0.0;
    for (const auto& e : entries_) s += e.p;
    return s;
  }

  double probability(std::span<const int> config) const {
    std::uint64_t c = radix_.encode(config);
    auto it = std::lower_bound(entries_.begin(), entries_.end(), c,
                               [](const Entry& e, std::uint64_t k) { return e.code < k; });
    return (it != entries_.end() && it->code == c) ? it->p : 0.0;
  }

  // Marginal over vars, in the given order.
  JointTable marginal(std::span<const int> vars) const {
    std::vector<std::string> n;
    std::vector<int> s;
    for (int v : vars) {
      n.push_back(names_.at(v));
      s.push_back(supports_.at(v));
    }
    JointTable out(std::move(n), std::move(s));
    std::unordered_map<std::uint64_t, double> acc;
    for (const auto& e : entries_) acc[project(e.code, vars, out.radix_)] += e.p;
    std::vector<Entry> es;
    es.reserve(acc.size());
    for (const auto& [c, p] : acc) es.push_back({c, p});
    out.assign(std::move(es));
    return out;
  }

  // Code of the sub-configuration on vars under radix r.
  std::uint64_t project(std::uint64_t code, std::span<const int> vars, const Radix& r) const {
    std::uint64_t c = 0;
    for (std::size_t i = 0; i < vars.size(); ++i)
      c += static_cast<std::uint64_t>(radix_.digit(code, vars[i])) * r.stride(i);
    return c;
  }

  // Positive-mass values of one variable.
  std::vector<int> support_of(int var) const {
    std::vector<char> seen(supports_.at(var), 0);
    for (const auto& e : entries_) seen[value(e, var)] = 1;
    std::vector<int> out;
    for (int i = 0; i < supports_[var]; ++i)
      if (seen[i]) out.push_back(i);
    return out;
  }

  void check_normalized(double tol = 1e-12) const {
    double t = total();
    if (std::abs(t - 1.0) > tol) throw ValidationError("joint table sums to " + std::to_string(t));
  }

 private:
  std::vector<std::string> names_;
  std::vector<int> supports_;
  Radix radix_;
  std::vector<Entry> entries_;
  std::vector<Entry> pending_;
};

inline double mutual_information(const JointTable& j, std::span<const int> a, std::span<const int> b) {
  std::vector<int> ab(a.begin(), a.end());
  ab.insert(ab.end(), b.begin(), b.end());
  JointTable mab = j.marginal(ab), ma = j.marginal(a), mb = j.marginal(b);
  std::vector<int> ia(a.size()), ib(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ia[i] = static_cast<int>(i);
  for (std::size_t i = 0; i < b.size(); ++i) ib[i] = static_cast<int>(a.size() + i);
  double mi = 0.0;
  for (const auto& e : mab.entries()) {
    auto cfg = mab.config(e);
    std::vector<int> va(cfg.begin(), cfg.begin() + a.size()), vb(cfg.begin() + a.size(), cfg.end());
    double pa = ma.probability(va), pb = mb.probability(vb);
    mi += e.p * std::log(e.p / (pa * pb));
  }
  return std::max(mi, 0.0);
}

}  // namespace hsel
