#include "afog/hungarian.hpp"

#include <limits>

namespace afog {

std::vector<int> solve_assignment(const std::vector<double>& cost, int rows, int cols) {
  if (rows <= 0 || cols <= 0) return std::vector<int>(rows < 0 ? 0 : rows, -1);

  // Square the matrix with zero-cost dummy entries; dummies contribute a
  // constant, so the real-pair selection stays optimal.
  const int n = rows > cols ? rows : cols;
  auto at = [&](int r, int c) -> double {
    return (r < rows && c < cols) ? cost[static_cast<std::size_t>(r) * cols + c] : 0.0;
  };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
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
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> row_to_col(rows, -1);
  for (int j = 1; j <= n; ++j) {
    const int r = p[j] - 1;
    if (r >= 0 && r < rows && j - 1 < cols) row_to_col[r] = j - 1;
  }
  return row_to_col;
}

}  // namespace afog
