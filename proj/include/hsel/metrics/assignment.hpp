#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

namespace hsel {

// Minimum-cost assignment (Hungarian method with potentials). Rows <= cols is
// handled directly; otherwise the problem is transposed. Returns, for each
// row, its assigned column, or -1 for rows left unassigned.
inline std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows()), m = static_cast<int>(cost.cols());
  if (n == 0 || m == 0) return std::vector<int>(n, -1);
  if (n > m) {
    auto t = min_cost_assignment(cost.transpose());
    std::vector<int> out(n, -1);
    for (int j = 0; j < m; ++j)
      if (t[j] >= 0) out[t[j]] = j;
    return out;
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> out(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j]) out[p[j] - 1] = j - 1;
  return out;
}

}  // namespace hsel
