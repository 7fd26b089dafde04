#pragma once

#include <algorithm>
#include <limits>
#include <vector>

namespace arraydiar {

/// Maximum-weight assignment on a rectangular matrix (rows x cols) using the
/// Kuhn-Munkres potentials method. Returns, for each row, its column or -1
/// when the row is left unassigned (only possible when rows > cols).
inline std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight) {
  const std::size_t rows = weight.size();
  if (rows == 0) return {};
  const std::size_t cols = weight.front().size();
  const std::size_t n = std::max(rows, cols);
  double top = 0.0;
  for (const auto& r : weight)
    for (double w : r) top = std::max(top, w);
  // Square cost matrix, 1-indexed; padding cells cost `top` (weight 0).
  auto cost = [&](std::size_t i, std::size_t j) {
    if (i <= rows && j <= cols) return top - weight[i - 1][j - 1];
    return top;
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
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
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(rows, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] != 0 && p[j] <= rows && j <= cols) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
  }
  return row_to_col;
}

}  // namespace arraydiar
