#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "hsel/common/error.hpp"
#include "hsel/metrics/assignment.hpp"
#include "hsel/model/dataset.hpp"

namespace hsel {

// Ranks starting at 1, ties get their average rank.
inline Eigen::VectorXd average_ranks(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x(a) < x(b); });
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && x(idx[j + 1]) == x(idx[i])) ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) r(idx[k]) = avg;
    i = j + 1;
  }
  return r;
}

inline double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd x = a.array() - a.mean(), y = b.array() - b.mean();
  double d = std::sqrt(x.squaredNorm() * y.squaredNorm());
  return d > 0.0 ? x.dot(y) / d : 0.0;
}

inline bool is_constant(const Eigen::VectorXd& x) { return x.size() == 0 || x.maxCoeff() == x.minCoeff(); }

struct ComponentMatch {
  std::vector<int> permutation;  // truth column -> learned column, -1 if unmatched
  std::vector<double> scores;    // |rank correlation| of each matched pair
  double mean_score = 0.0;
  Eigen::MatrixXd association;   // |rank correlation|, truth x learned
  std::vector<std::string> warnings;
};

// Optimal one-to-one assignment of learned to true components by absolute rank correlation.
inline ComponentMatch match_components(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& learned) {
  if (truth.rows() != learned.rows()) throw AlignmentError("row counts differ");
  ComponentMatch out;
  const Eigen::Index nt = truth.cols(), nl = learned.cols();
  std::vector<Eigen::VectorXd> rt(nt), rl(nl);
  std::vector<char> ct(nt), cl(nl);
  for (Eigen::Index i = 0; i < nt; ++i) {
    ct[i] = is_constant(truth.col(i));
    if (ct[i]) out.warnings.push_back("constant truth column " + std::to_string(i));
    rt[i] = average_ranks(truth.col(i));
  }
  for (Eigen::Index j = 0; j < nl; ++j) {
    cl[j] = is_constant(learned.col(j));
    if (cl[j]) out.warnings.push_back("constant learned column " + std::to_string(j));
    rl[j] = average_ranks(learned.col(j));
  }
  out.association = Eigen::MatrixXd::Zero(nt, nl);
  for (Eigen::Index i = 0; i < nt; ++i)
    for (Eigen::Index j = 0; j < nl; ++j)
      if (!ct[i] && !cl[j]) out.association(i, j) = std::abs(pearson(rt[i], rl[j]));
  out.permutation = min_cost_assignment(-out.association);
  double sum = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < nt; ++i) {
    int j = out.permutation[i];
    double s = j >= 0 ? out.association(i, j) : 0.0;
    out.scores.push_back(s);
    if (j >= 0) {
      sum += s;
      ++count;
    }
  }
  out.mean_score = count ? sum / count : 0.0;
  return out;
}

inline ComponentMatch match_components(const Dataset& truth, const Dataset& learned) {
  return match_components(truth.values, learned.values);
}

using Mask = std::vector<char>;

struct OverlapCoverage {
  double mean_iou = 0.0;
  double coverage_percent = 0.0;
};

inline double iou(const Mask& a, const Mask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    uni += a[i] || b[i];
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

inline OverlapCoverage overlap_coverage(const std::vector<Mask>& masks) {
  if (masks.empty()) throw DomainError("overlap_coverage needs at least one mask");
  const std::size_t n = masks[0].size();
  for (const auto& m : masks)
    if (m.size() != n) throw DomainError("masks differ in shape");
  OverlapCoverage out;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < masks.size(); ++a)
    for (std::size_t b = a + 1; b < masks.size(); ++b) {
      sum += iou(masks[a], masks[b]);
      ++pairs;
    }
  out.mean_iou = pairs ? sum / static_cast<double>(pairs) : 0.0;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (const auto& m : masks) any = any || m[i];
    covered += any;
  }
  out.coverage_percent = n ? 100.0 * static_cast<double>(covered) / static_cast<double>(n) : 0.0;
  return out;
}

inline double mask_density(const Mask& m) {
  if (m.empty()) return 0.0;
  return static_cast<double>(std::count(m.begin(), m.end(), 1)) / static_cast<double>(m.size());
}

struct SpreadReport {
  std::vector<int> top_k;                                 // ascending
  std::map<std::string, std::vector<double>> proportion;  // level -> per top-k mean proportion
};

// masks_by_level: per level, masks ordered by feature importance (most important first).
inline SpreadReport spatial_spread(const std::map<std::string, std::vector<Mask>>& masks_by_level, std::vector<int> top_k) {
  std::sort(top_k.begin(), top_k.end());
  SpreadReport r;
  r.top_k = top_k;
  for (const auto& [level, masks] : masks_by_level) {
    auto& row = r.proportion[level];
    for (int k : top_k) {
      if (k < 1 || k > static_cast<int>(masks.size()))
        throw DomainError("top-k " + std::to_string(k) + " exceeds the features of level " + level);
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += mask_density(masks[i]);
      row.push_back(s / k);
    }
  }
  return r;
}

struct DeactivationEffect {
  double mean_l1 = 0.0;  // per-coordinate mean absolute difference, averaged over rows
  double mean_cosine = 1.0;
  int skipped_rows = 0;
};

inline DeactivationEffect deactivation_effect(const Eigen::MatrixXd& original, const Eigen::MatrixXd& modified) {
  if (original.rows() != modified.rows() || original.cols() != modified.cols()) throw DomainError("shapes differ");
  DeactivationEffect e;
  if (original.rows() == 0) return e;
  double l1 = 0.0, cos = 0.0;
  int counted = 0;
  for (Eigen::Index r = 0; r < original.rows(); ++r) {
    l1 += (original.row(r) - modified.row(r)).cwiseAbs().mean();
    double na = original.row(r).norm(), nb = modified.row(r).norm();
    if (na == 0.0 || nb == 0.0) {
      ++e.skipped_rows;
      continue;
    }
    cos += original.row(r).dot(modified.row(r)) / (na * nb);
    ++counted;
  }
  e.mean_l1 = l1 / static_cast<double>(original.rows());
  e.mean_cosine = counted ? cos / counted : 0.0;
  return e;
}

inline DeactivationEffect deactivation_effect(const Dataset& original, const Dataset& modified) {
  return deactivation_effect(original.values, modified.values);
}

}  // namespace hsel
