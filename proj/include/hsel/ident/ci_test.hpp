#pragma once

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "hsel/common/error.hpp"
#include "hsel/model/joint_table.hpp"

namespace hsel {

struct CITestSpec {
  std::vector<int> A;
  std::vector<int> B;
  std::vector<int> C;
  double tolerance = 1e-9;
};

struct CIResult {
  bool independent = true;
  double max_deviation = 0.0;  // total variation between P(A,B|c) and P(A|c)P(B|c), worst cell
  int cells = 0;
  unsigned long long skipped_cells = 0;  // zero-probability conditioning cells
};

inline void check_ci_spec(const JointTable& j, const CITestSpec& s) {
  std::set<int> seen;
  for (const auto* part : {&s.A, &s.B, &s.C})
    for (int v : *part) {
      if (v < 0 || v >= static_cast<int>(j.arity())) throw DomainError("CI variable not present in joint");
      if (!seen.insert(v).second) throw DomainError("CI variable sets must be pairwise disjoint");
    }
  if (s.A.empty() || s.B.empty()) throw DomainError("CI test needs nonempty A and B");
}

inline CIResult ci_test(const JointTable& j, const CITestSpec& s) {
  check_ci_spec(j, s);
  std::vector<int> vars = s.A;
  vars.insert(vars.end(), s.B.begin(), s.B.end());
  vars.insert(vars.end(), s.C.begin(), s.C.end());
  JointTable m = j.marginal(vars);
  const std::size_t na = s.A.size(), nb = s.B.size();

  struct Cell {
    double pc = 0.0;
    std::map<std::uint64_t, double> pa, pb;
    std::map<std::pair<std::uint64_t, std::uint64_t>, double> pab;
  };
  std::map<std::uint64_t, Cell> cells;
  std::vector<int> ia(na), ib(nb), ic(s.C.size());
  for (std::size_t i = 0; i < na; ++i) ia[i] = static_cast<int>(i);
  for (std::size_t i = 0; i < nb; ++i) ib[i] = static_cast<int>(na + i);
  for (std::size_t i = 0; i < s.C.size(); ++i) ic[i] = static_cast<int>(na + nb + i);
  std::vector<int> sa, sb, sc;
  for (int v : s.A) sa.push_back(j.supports()[v]);
  for (int v : s.B) sb.push_back(j.supports()[v]);
  for (int v : s.C) sc.push_back(j.supports()[v]);
  Radix ra(sa), rb(sb), rc(sc);
  for (const auto& e : m.entries()) {
    auto a = m.project(e.code, ia, ra), b = m.project(e.code, ib, rb), c = m.project(e.code, ic, rc);
    auto& cell = cells[c];
    cell.pc += e.p;
    cell.pa[a] += e.p;
    cell.pb[b] += e.p;
    cell.pab[{a, b}] += e.p;
  }
  CIResult r;
  r.cells = static_cast<int>(cells.size());
  r.skipped_cells = rc.size() - cells.size();
  for (const auto& [c, cell] : cells) {
    double tv = 0.0;
    for (const auto& [a, pa] : cell.pa)
      for (const auto& [b, pb] : cell.pb) {
        auto it = cell.pab.find({a, b});
        double joint = it == cell.pab.end() ? 0.0 : it->second / cell.pc;
        tv += std::abs(joint - (pa / cell.pc) * (pb / cell.pc));
      }
    r.max_deviation = std::max(r.max_deviation, 0.5 * tv);
  }
  r.independent = r.max_deviation <= s.tolerance;
  return r;
}

}  // namespace hsel
