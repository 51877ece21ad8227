#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "polymeasure/geom.hpp"

namespace polymeasure::dtw {

// Monotone alignment of two ordered point sequences with steps
// {(1,0),(0,1),(1,1)} and Euclidean local cost.
struct Alignment {
  double total_cost = 0.0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> path;  // (a index, b index)
  // Smallest gap between the chosen predecessor and the runner-up along the
  // backtracked path; near-zero means the optimum is not unique.
  double min_decision_margin = std::numeric_limits<double>::max();
};

inline Alignment align(const geom::PointMatrixd& a, const geom::PointMatrixd& b) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.rows();
  if (n == 0 || m == 0) throw std::invalid_argument("dtw: empty sequence");

  Eigen::MatrixXd local(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      local(i, j) = (a.row(i) - b.row(j)).norm();

  constexpr double kInf = std::numeric_limits<double>::max();
  Eigen::MatrixXd acc(n, m);
  acc(0, 0) = local(0, 0);
  for (Eigen::Index i = 1; i < n; ++i) acc(i, 0) = acc(i - 1, 0) + local(i, 0);
  for (Eigen::Index j = 1; j < m; ++j) acc(0, j) = acc(0, j - 1) + local(0, j);
  for (Eigen::Index i = 1; i < n; ++i)
    for (Eigen::Index j = 1; j < m; ++j)
      acc(i, j) =
          local(i, j) +
          std::min({acc(i - 1, j - 1), acc(i - 1, j), acc(i, j - 1)});

  Alignment out;
  out.total_cost = acc(n - 1, m - 1);

  // Backtrack with a fixed tie preference: diagonal, then (i-1,j), then
  // (i,j-1).
  Eigen::Index i = n - 1;
  Eigen::Index j = m - 1;
  out.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    const double diag = (i > 0 && j > 0) ? acc(i - 1, j - 1) : kInf;
    const double up = i > 0 ? acc(i - 1, j) : kInf;
    const double left = j > 0 ? acc(i, j - 1) : kInf;
    std::array<double, 3> options{diag, up, left};
    std::sort(options.begin(), options.end());
    const double best = options[0];
    if (options[1] < kInf)
      out.min_decision_margin =
          std::min(out.min_decision_margin, options[1] - best);
    if (diag == best) {
      --i;
      --j;
    } else if (up == best) {
      --i;
    } else {
      --j;
    }
    out.path.emplace_back(i, j);
  }
  std::reverse(out.path.begin(), out.path.end());
  return out;
}

}  // namespace polymeasure::dtw
