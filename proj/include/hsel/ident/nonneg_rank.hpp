#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "hsel/common/error.hpp"
#include "hsel/common/rng.hpp"

namespace hsel {

struct NonnegRankEstimate {
  int lower = 0;
  int upper = 0;
  bool exact = false;
};

struct NmfOptions {
  int restarts = 50;
  int iterations = 2000;
  int inner = 10;  // repeated multiplicative sweeps per factor and iteration
  double residual_tol = 1e-7;
  double rank_tol = 1e-9;
  std::uint64_t seed = 0x4E4D46;
};

inline int linear_rank(const Eigen::MatrixXd& T, double rel_tol = 1e-9) {
  if (T.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(T);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++r;
  return r;
}

// Relative Frobenius residual of the best multiplicative-update factorization
// with p components found across restarts.
inline double nmf_residual(const Eigen::MatrixXd& T, int p, const NmfOptions& opt) {
  const Eigen::Index m = T.rows(), n = T.cols();
  const double norm = T.norm();
  if (norm == 0.0) return 0.0;
  const double scale = T.maxCoeff();
  Rng rng = make_rng(opt.seed, static_cast<std::uint64_t>(p));
  double best = std::numeric_limits<double>::infinity();
  const double eps = 1e-300;
  for (int r = 0; r < opt.restarts && best >= opt.residual_tol; ++r) {
    Eigen::MatrixXd W(m, p), H(p, n);
    for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = (0.1 + uniform01(rng)) * std::sqrt(scale / p);
    for (Eigen::Index i = 0; i < H.size(); ++i) H.data()[i] = (0.1 + uniform01(rng)) * std::sqrt(scale / p);
    double res = 0.0;
    for (int it = 0; it < opt.iterations; ++it) {
      Eigen::MatrixXd WtT = W.transpose() * T;
      Eigen::MatrixXd WtW = W.transpose() * W;
      for (int k = 0; k < opt.inner; ++k)
        H = H.cwiseProduct(WtT.cwiseQuotient((WtW * H).array().max(eps).matrix()));
      Eigen::MatrixXd THt = T * H.transpose();
      Eigen::MatrixXd HHt = H * H.transpose();
      for (int k = 0; k < opt.inner; ++k)
        W = W.cwiseProduct(THt.cwiseQuotient((W * HHt).array().max(eps).matrix()));
      if ((it + 1) % 50 == 0 || it + 1 == opt.iterations) {
        res = (T - W * H).norm() / norm;
        if (res < opt.residual_tol) break;
      }
    }
    best = std::min(best, res);
  }
  return best;
}

// Bounds on the nonnegative rank. lower is the linear rank; upper is the
// smallest p <= p_max reaching the residual tolerance, or the trivial bound.
inline NonnegRankEstimate estimate_nonneg_rank(const Eigen::MatrixXd& T, int p_max, const NmfOptions& opt = {}) {
  if (T.rows() > 32 || T.cols() > 32) throw DomainError("nonnegative rank estimation limited to 32x32 tables");
  for (Eigen::Index i = 0; i < T.size(); ++i)
    if (T.data()[i] < 0.0 || !std::isfinite(T.data()[i])) throw DomainError("table has a negative or non-finite entry");
  NonnegRankEstimate e;
  e.lower = linear_rank(T, opt.rank_tol);
  if (e.lower == 0) {
    e.exact = true;
    return e;
  }
  int nz_rows = 0, nz_cols = 0;
  for (Eigen::Index i = 0; i < T.rows(); ++i)
    if (T.row(i).maxCoeff() > 0.0) ++nz_rows;
  for (Eigen::Index j = 0; j < T.cols(); ++j)
    if (T.col(j).maxCoeff() > 0.0) ++nz_cols;
  int trivial = std::min(nz_rows, nz_cols);
  if (e.lower <= 2 || e.lower == trivial) {
    e.upper = e.lower;
    e.exact = true;
    return e;
  }
  e.upper = trivial;
  for (int p = e.lower; p <= std::min(p_max, trivial - 1); ++p) {
    if (nmf_residual(T, p, opt) < opt.residual_tol) {
      e.upper = p;
      break;
    }
  }
  e.exact = e.lower == e.upper;
  return e;
}

}  // namespace hsel
