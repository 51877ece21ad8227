#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace polymeasure::assign {

// Cost matrix for one-to-one assignment. Rows are predictions, columns are
// ground truths. Rectangular inputs are padded to square with pad_cost
// (1 + max entry unless given) before solving; pairs that land on padding
// are reported as unmatched.
template <typename Scalar>
struct CostMatrix {
  Eigen::MatrixX<Scalar> costs;
  std::optional<Scalar> pad_cost;
};

template <typename Scalar>
struct Assignment {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;  // sorted by row
  std::vector<Eigen::Index> unmatched_rows;
  std::vector<Eigen::Index> unmatched_cols;
  Scalar total_cost = Scalar(0);
};

namespace detail {

// Jonker-style potentials algorithm, O(n^3). Returns column assigned to each
// row of a square matrix. Classic formulation with 1-based scratch arrays.
template <typename Scalar>
std::vector<int> min_cost_columns(const Eigen::MatrixX<Scalar>& a) {
  const int n = static_cast<int>(a.rows());
  const Scalar inf = std::numeric_limits<Scalar>::max();
  std::vector<Scalar> u(n + 1, Scalar(0)), v(n + 1, Scalar(0));
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<Scalar> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      Scalar delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const Scalar cur = a(i0 - 1, j - 1) - u[i0] - v[j];
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
  std::vector<int> col_of_row(n, -1);
  for (int j = 1; j <= n; ++j) col_of_row[p[j] - 1] = j - 1;
  return col_of_row;
}

// Minimum assignment cost, entries summed in row order.
template <typename Scalar>
Scalar min_cost(const Eigen::MatrixX<Scalar>& a) {
  if (a.rows() == 0) return Scalar(0);
  const auto cols = min_cost_columns(a);
  Scalar total = Scalar(0);
  for (int r = 0; r < a.rows(); ++r) total += a(r, cols[r]);
  return total;
}

}  // namespace detail

// Exact minimum-cost one-to-one assignment covering min(rows, cols) pairs.
// Deterministic: among equal-cost optima the lexicographically smallest pair
// list is returned. Rows are fixed in order; for each row the smallest
// column whose forced choice still reaches the optimal total is kept, which
// costs one reduced solve per candidate and is intended for the small
// matrices this project deals in.
template <typename Scalar>
Assignment<Scalar> hungarian_solve(const CostMatrix<Scalar>& input) {
  const Eigen::Index rows = input.costs.rows();
  const Eigen::Index cols = input.costs.cols();
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("hungarian_solve: empty cost matrix");
  if (!input.costs.allFinite())
    throw std::invalid_argument("hungarian_solve: costs must be finite");

  const int n = static_cast<int>(std::max(rows, cols));
  const Scalar pad = input.pad_cost.value_or(Scalar(1) + input.costs.maxCoeff());
  Eigen::MatrixX<Scalar> padded = Eigen::MatrixX<Scalar>::Constant(n, n, pad);
  padded.topLeftCorner(rows, cols) = input.costs;

  std::vector<int> col_of_row(n, -1);
  std::vector<char> col_used(n, 0);
  std::vector<int> free_cols;
  for (int r = 0; r < n; ++r) {
    free_cols.clear();
    for (int c = 0; c < n; ++c)
      if (!col_used[c]) free_cols.push_back(c);
    const int m = static_cast<int>(free_cols.size());

    Scalar best = std::numeric_limits<Scalar>::max();
    std::vector<Scalar> candidate(m);
    Eigen::MatrixX<Scalar> sub(n - r - 1, m - 1);
    for (int ci = 0; ci < m; ++ci) {
      // Cost of forcing row r onto free_cols[ci], plus the optimum of the
      // remaining (n-r-1)-row subproblem.
      int sc = 0;
      for (int cj = 0; cj < m; ++cj) {
        if (cj == ci) continue;
        for (int rr = r + 1; rr < n; ++rr)
          sub(rr - r - 1, sc) = padded(rr, free_cols[cj]);
        ++sc;
      }
      candidate[ci] = padded(r, free_cols[ci]) + detail::min_cost(sub);
      if (candidate[ci] < best) best = candidate[ci];
    }
    const Scalar eps =
        Scalar(1e-9) * std::max(Scalar(1), std::abs(best));
    for (int ci = 0; ci < m; ++ci) {
      if (candidate[ci] <= best + eps) {
        col_of_row[r] = free_cols[ci];
        col_used[free_cols[ci]] = 1;
        break;
      }
    }
  }

  Assignment<Scalar> out;
  std::vector<char> real_col_matched(cols, 0);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index c = col_of_row[static_cast<int>(r)];
    if (c < cols) {
      out.pairs.emplace_back(r, c);
      out.total_cost += input.costs(r, c);
      real_col_matched[c] = 1;
    } else {
      out.unmatched_rows.push_back(r);
    }
  }
  for (Eigen::Index c = 0; c < cols; ++c)
    if (!real_col_matched[c]) out.unmatched_cols.push_back(c);
  return out;
}

}  // namespace polymeasure::assign
