#include <cmath>
#include <limits>
#include <numeric>

#include "qoco/base_learners.hpp"

namespace qoco {
namespace {

// Minimum-cost assignment via the shortest augmenting path form of the
// Hungarian algorithm with row/column potentials. O(n^3).
std::vector<int> min_cost_assignment(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; index 0 is the virtual root column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match_col(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match_col[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match_col[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (reduced < minv[j]) {
          minv[j] = reduced;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match_col[j0] != 0);
    do {
      const int j1 = way[j0];
      match_col[j0] = match_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> perm(n, -1);
  for (int j = 1; j <= n; ++j) perm[match_col[j] - 1] = j - 1;
  return perm;
}

double max_weight_value(const Matrix& weights) {
  if (weights.rows() == 0) return 0.0;
  const Matrix cost = -weights;
  return assignment_weight(weights, min_cost_assignment(cost));
}

}  // namespace

double assignment_weight(const Matrix& weights, const std::vector<int>& perm) {
  double total = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) total += weights(static_cast<Eigen::Index>(i), perm[i]);
  return total;
}

std::vector<int> max_weight_assignment(const Matrix& weights) {
  if (weights.rows() != weights.cols()) throw DimensionError("assignment requires a square weight matrix");
  const int n = static_cast<int>(weights.rows());
  if (n == 0) throw DimensionError("assignment requires N >= 1");
  if (!weights.allFinite()) throw EvaluationError("non-finite matching weights");

  const double best = max_weight_value(weights);
  const double scale = std::max(1.0, weights.cwiseAbs().maxCoeff() * n);
  const double tol = 1e-12 * scale;

  // Fix rows in order, each to the smallest column that keeps the optimum.
  std::vector<int> perm(n, -1);
  std::vector<int> free_cols(n);
  std::iota(free_cols.begin(), free_cols.end(), 0);
  double fixed_weight = 0.0;
  for (int row = 0; row < n; ++row) {
    const int remaining = n - row - 1;
    bool placed = false;
    for (std::size_t c = 0; c < free_cols.size() && !placed; ++c) {
      const int col = free_cols[c];
      Matrix sub(remaining, remaining);
      for (int r = 0; r < remaining; ++r) {
        int sc = 0;
        for (int other : free_cols) {
          if (other == col) continue;
          sub(r, sc++) = weights(row + 1 + r, other);
        }
      }
      const double value = fixed_weight + weights(row, col) + max_weight_value(sub);
      if (value >= best - tol) {
        perm[row] = col;
        fixed_weight += weights(row, col);
        free_cols.erase(free_cols.begin() + static_cast<std::ptrdiff_t>(c));
        placed = true;
      }
    }
    if (!placed) throw ConsistencyError("lexicographic assignment search lost the optimum");
  }
  return perm;
}

Vector permutation_matrix(const std::vector<int>& perm) {
  const auto n = static_cast<Eigen::Index>(perm.size());
  Vector p = Vector::Zero(n * n);
  for (Eigen::Index i = 0; i < n; ++i) p[i * n + perm[static_cast<std::size_t>(i)]] = 1.0;
  return p;
}

Vector matching_oracle(const Matrix& weights) { return permutation_matrix(max_weight_assignment(weights)); }

}  // namespace qoco
