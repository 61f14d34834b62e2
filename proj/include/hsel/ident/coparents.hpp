#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "hsel/common/combinatorics.hpp"
#include "hsel/common/error.hpp"
#include "hsel/ident/nonneg_rank.hpp"
#include "hsel/model/joint_table.hpp"

namespace hsel {

namespace detail {

// Collapses proportional columns (then rows); both preserve the nonnegative rank.
inline Eigen::MatrixXd merge_proportional(const Eigen::MatrixXd& T, double tol = 1e-12) {
  auto merge_cols = [&](const Eigen::MatrixXd& M) {
    std::vector<Eigen::VectorXd> dirs;
    std::vector<double> mass;
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      double s = M.col(j).sum();
      if (s <= 0.0) continue;
      Eigen::VectorXd d = M.col(j) / s;
      bool merged = false;
      for (std::size_t k = 0; k < dirs.size() && !merged; ++k)
        if ((dirs[k] - d).cwiseAbs().maxCoeff() <= tol) {
          mass[k] += s;
          merged = true;
        }
      if (!merged) {
        dirs.push_back(d);
        mass.push_back(s);
      }
    }
    Eigen::MatrixXd out(M.rows(), static_cast<Eigen::Index>(dirs.size()));
    for (std::size_t k = 0; k < dirs.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = dirs[k] * mass[k];
    return out;
  };
  Eigen::MatrixXd c = merge_cols(T);
  Eigen::MatrixXd r = merge_cols(c.transpose());
  return r.transpose();
}

}  // namespace detail

// Nonnegative-rank bounds for tables of any width: exact shortcuts first, then the
// factorization search on the proportionality-reduced table.
inline NonnegRankEstimate nonneg_rank_bounds(const Eigen::MatrixXd& T, int p_max, const NmfOptions& opt = {}) {
  NonnegRankEstimate e;
  e.lower = linear_rank(T, opt.rank_tol);
  int nz_rows = 0, nz_cols = 0;
  for (Eigen::Index i = 0; i < T.rows(); ++i)
    if (T.row(i).maxCoeff() > 0.0) ++nz_rows;
  for (Eigen::Index j = 0; j < T.cols(); ++j)
    if (T.col(j).maxCoeff() > 0.0) ++nz_cols;
  if (e.lower <= 2 || e.lower == std::min(nz_rows, nz_cols)) {
    e.upper = e.lower;
    e.exact = true;
    return e;
  }
  Eigen::MatrixXd R = detail::merge_proportional(T);
  if (R.rows() > 32 || R.cols() > 32)
    throw IndeterminateError("table too wide for nonnegative rank search after merging proportional columns");
  return estimate_nonneg_rank(R, p_max, opt);
}

struct BottleneckResult {
  bool holds = false;
  int informative_cells = 0;
  int max_rank = 0;
  std::string detail;
};

// Tables P(d, C=c, R) per conditioning cell, rows = positive d values, cols = positive R configurations.
inline std::map<std::uint64_t, Eigen::MatrixXd> conditional_tables(const JointTable& j, int d, const std::vector<int>& C,
                                                                   const std::vector<int>& R) {
  std::vector<int> sc, sr;
  for (int v : C) sc.push_back(j.supports()[v]);
  for (int v : R) sr.push_back(j.supports()[v]);
  Radix rc(sc), rr(sr);
  const int nd = j.supports()[d];
  std::map<std::uint64_t, std::map<std::uint64_t, std::vector<double>>> acc;
  for (const auto& e : j.entries()) {
    auto& col = acc[j.project(e.code, C, rc)][j.project(e.code, R, rr)];
    if (col.empty()) col.assign(nd, 0.0);
    col[j.value(e, d)] += e.p;
  }
  std::map<std::uint64_t, Eigen::MatrixXd> out;
  for (const auto& [c, cols] : acc) {
    std::vector<int> rows;
    for (int a = 0; a < nd; ++a) {
      bool pos = false;
      for (const auto& [r, v] : cols)
        if (v[a] > 0.0) pos = true;
      if (pos) rows.push_back(a);
    }
    Eigen::MatrixXd T(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    Eigen::Index k = 0;
    for (const auto& [r, v] : cols) {
      for (std::size_t i = 0; i < rows.size(); ++i) T(static_cast<Eigen::Index>(i), k) = v[rows[i]];
      ++k;
    }
    out.emplace(c, std::move(T));
  }
  return out;
}

// d is screened off from the remainder R by C through a state bottleneck:
// every informative cell (>= 2 positive rows and columns) has nonnegative rank
// below min(rows, cols), and at least one cell still carries rank >= 2.
inline BottleneckResult bottleneck_criterion(const JointTable& j, int d, const std::vector<int>& C,
                                             const NmfOptions& opt = {}) {
  BottleneckResult res;
  std::vector<int> R;
  for (int v = 0; v < static_cast<int>(j.arity()); ++v)
    if (v != d && std::find(C.begin(), C.end(), v) == C.end()) R.push_back(v);
  if (R.empty()) {
    res.detail = "empty remainder";
    return res;
  }
  for (const auto& [c, T] : conditional_tables(j, d, C, R)) {
    const int rows = static_cast<int>(T.rows()), cols = static_cast<int>(T.cols());
    if (rows < 2 || cols < 2) continue;
    ++res.informative_cells;
    const int m = std::min(rows, cols);
    auto est = nonneg_rank_bounds(T, m - 1, opt);
    if (est.upper < m) {
      res.max_rank = std::max(res.max_rank, est.upper);
      continue;
    }
    if (est.lower >= m) {
      res.detail = "cell " + std::to_string(c) + " has full nonnegative rank " + std::to_string(est.lower);
      return res;
    }
    throw IndeterminateError("nonnegative rank bounds [" + std::to_string(est.lower) + ", " + std::to_string(est.upper) +
                             "] straddle the bottleneck threshold " + std::to_string(m));
  }
  if (res.informative_cells == 0) {
    res.detail = "no informative cell";
    return res;
  }
  if (res.max_rank < 2) {
    res.detail = "remainder independent of d in every cell";
    return res;
  }
  res.holds = true;
  return res;
}

struct CoparentResult {
  std::vector<int> set;
  BottleneckResult evidence;
  int candidates_tested = 0;
};

// Cardinality-minimal conditioning set, ties broken lexicographically by variable index.
inline CoparentResult find_coparents_detailed(const JointTable& j, int d, int search_cap, const NmfOptions& opt = {}) {
  if (d < 0 || d >= static_cast<int>(j.arity())) throw DomainError("variable index out of range");
  std::vector<int> others;
  for (int v = 0; v < static_cast<int>(j.arity()); ++v)
    if (v != d) others.push_back(v);
  CoparentResult out;
  const int max_k = std::min<int>(search_cap, static_cast<int>(others.size()) - 1);
  for (int k = 0; k <= max_k; ++k) {
    bool found = for_each_combination(others, static_cast<std::size_t>(k), [&](const std::vector<int>& C) {
      ++out.candidates_tested;
      auto b = bottleneck_criterion(j, d, C, opt);
      if (!b.holds) return false;
      out.set = C;
      out.evidence = b;
      return true;
    });
    if (found) return out;
  }
  throw NoBottleneckError("no bottleneck found for " + j.names()[d] + " within search cap " + std::to_string(search_cap));
}

inline std::vector<int> find_coparents(const JointTable& j, int d, int search_cap = 4) {
  return find_coparents_detailed(j, d, search_cap).set;
}

}  // namespace hsel
