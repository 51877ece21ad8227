#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "polymeasure/losses.hpp"
#include "polymeasure/rng.hpp"

namespace polymeasure::losses {

enum class LossOp { Loc, Chamfer, Length, PartLength, Focal, Dice, CrossEntropy, Dtw };

inline const char* loss_op_name(LossOp op) {
  switch (op) {
    case LossOp::Loc: return "loc";
    case LossOp::Chamfer: return "chamfer";
    case LossOp::Length: return "length";
    case LossOp::PartLength: return "part_length";
    case LossOp::Focal: return "focal";
    case LossOp::Dice: return "dice";
    case LossOp::CrossEntropy: return "cross_entropy";
    case LossOp::Dtw: return "dtw";
  }
  return "?";
}

struct GradcheckReport {
  LossOp op = LossOp::Loc;
  int trials_requested = 0;
  int trials_evaluated = 0;
  long coords_checked = 0;
  long coords_skipped = 0;
  int instances_skipped = 0;
  double max_rel_error = 0.0;
  double step = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

namespace detail {

// One randomly drawn loss evaluation set up for finite differencing:
// the flattened differentiated variables, a re-evaluation closure, the
// analytic gradient, and the non-smoothness guards.
struct CheckInstance {
  Eigen::VectorXd x;
  std::function<double(const Eigen::VectorXd&)> value;
  Eigen::VectorXd analytic;
  std::function<bool(Eigen::Index)> skip_coord;  // kink within 1e-3
  bool skip_instance = false;
};

constexpr double kKinkMargin = 1e-3;

inline geom::Polylined random_polyline(CounterRng& rng, Eigen::Index n = 3) {
  geom::Polylined p;
  p.points.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.points(i, 0) = rng.uniform(0.0, 10.0);
    p.points(i, 1) = rng.uniform(0.0, 10.0);
  }
  return p;
}

inline geom::Polylined with_coords(const geom::Polylined& base,
                                   const Eigen::VectorXd& x) {
  geom::Polylined p = base;
  for (Eigen::Index i = 0; i < p.points.rows(); ++i) {
    p.points(i, 0) = x(2 * i);
    p.points(i, 1) = x(2 * i + 1);
  }
  return p;
}

inline Eigen::VectorXd flat_coords(const geom::Polylined& p) {
  Eigen::VectorXd x(2 * p.points.rows());
  for (Eigen::Index i = 0; i < p.points.rows(); ++i) {
    x(2 * i) = p.points(i, 0);
    x(2 * i + 1) = p.points(i, 1);
  }
  return x;
}

// Smallest gap between best and second-best nearest-neighbour distance over
// both chamfer directions; tiny gaps mean an argmin could flip under the
// finite-difference step.
inline double chamfer_tie_margin(const geom::PointMatrixd& a,
                                 const geom::PointMatrixd& b) {
  double margin = std::numeric_limits<double>::max();
  auto scan = [&margin](const geom::PointMatrixd& from,
                        const geom::PointMatrixd& to) {
    if (to.rows() < 2) return;
    for (Eigen::Index j = 0; j < from.rows(); ++j) {
      double best = std::numeric_limits<double>::max();
      double second = std::numeric_limits<double>::max();
      for (Eigen::Index k = 0; k < to.rows(); ++k) {
        const double d = (from.row(j) - to.row(k)).squaredNorm();
        if (d < best) {
          second = best;
          best = d;
        } else if (d < second) {
          second = d;
        }
      }
      margin = std::min(margin, second - best);
    }
  };
  scan(a, b);
  scan(b, a);
  return margin;
}

inline double cross_entropy_unchecked(const Eigen::MatrixXd& probs,
                                      const Eigen::VectorXi& labels) {
  constexpr double kClamp = 1e-7;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i)
    sum += -std::log(std::max(probs(i, labels(i)), kClamp));
  return sum / static_cast<double>(probs.rows());
}

inline CheckInstance make_instance(LossOp op, CounterRng& rng) {
  CheckInstance inst;
  inst.skip_coord = [](Eigen::Index) { return false; };

  switch (op) {
    case LossOp::Loc: {
      const auto gt = random_polyline(rng);
      const auto pred = random_polyline(rng);
      inst.x = flat_coords(pred);
      inst.analytic = loc_loss(pred, gt).gradient;
      inst.value = [gt, pred](const Eigen::VectorXd& x) {
        return loc_loss(with_coords(pred, x), gt).value;
      };
      Eigen::VectorXd gt_flat = flat_coords(gt);
      Eigen::VectorXd x0 = inst.x;
      inst.skip_coord = [gt_flat, x0](Eigen::Index i) {
        return std::abs(x0(i) - gt_flat(i)) < kKinkMargin;
      };
      break;
    }
    case LossOp::Chamfer: {
      const auto gt = random_polyline(rng);
      const auto pred = random_polyline(rng);
      inst.x = flat_coords(pred);
      inst.analytic = chamfer_loss(pred, gt).gradient;
      inst.value = [gt, pred](const Eigen::VectorXd& x) {
        return chamfer_loss(with_coords(pred, x), gt).value;
      };
      inst.skip_instance =
          chamfer_tie_margin(gt.points, pred.points) < kKinkMargin;
      break;
    }
    case LossOp::Length: {
      const auto gt = random_polyline(rng);
      const auto pred = random_polyline(rng);
      inst.x = flat_coords(pred);
      inst.analytic = length_loss(pred, gt).gradient;
      inst.value = [gt, pred](const Eigen::VectorXd& x) {
        return length_loss(with_coords(pred, x), gt).value;
      };
      const double gap = std::abs(geom::polyline_length(pred) -
                                  geom::polyline_length(gt));
      const double seg0 = (pred.points.row(1) - pred.points.row(0)).norm();
      const double seg1 = (pred.points.row(2) - pred.points.row(1)).norm();
      inst.skip_instance =
          gap < kKinkMargin || seg0 < kKinkMargin || seg1 < kKinkMargin;
      break;
    }
    case LossOp::PartLength: {
      const auto gt = random_polyline(rng);
      const auto pred = random_polyline(rng);
      inst.x = flat_coords(pred);
      inst.analytic = part_length_loss(pred, gt).gradient;
      inst.value = [gt, pred](const Eigen::VectorXd& x) {
        return part_length_loss(with_coords(pred, x), gt).value;
      };
      auto seg = [](const geom::Polylined& p, int i, int j) {
        return (p.points.row(j) - p.points.row(i)).norm();
      };
      inst.skip_instance =
          std::abs(seg(gt, 0, 1) - seg(pred, 0, 1)) < kKinkMargin ||
          std::abs(seg(gt, 1, 2) - seg(pred, 1, 2)) < kKinkMargin ||
          seg(pred, 0, 1) < kKinkMargin || seg(pred, 1, 2) < kKinkMargin;
      break;
    }
    case LossOp::Focal: {
      const int y = rng.uniform_int(0, 1);
      const double y_hat = rng.uniform(0.05, 0.95);
      inst.x = Eigen::VectorXd::Constant(1, y_hat);
      inst.analytic = focal_loss(y, y_hat).gradient;
      inst.value = [y](const Eigen::VectorXd& x) {
        return focal_loss(y, x(0)).value;
      };
      break;
    }
    case LossOp::Dice: {
      const Eigen::Index rows = 4, cols = 5;
      Eigen::ArrayXXd pred(rows, cols), gt(rows, cols);
      for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) {
          pred(r, c) = rng.uniform(0.05, 0.95);
          gt(r, c) = rng.bernoulli(0.5) ? 1.0 : 0.0;
        }
      inst.x = pred.reshaped();
      inst.analytic = dice_loss(pred, gt).gradient;
      inst.value = [rows, cols, gt](const Eigen::VectorXd& x) {
        const Eigen::ArrayXXd p = x.reshaped(rows, cols).array();
        return dice_loss(p, gt).value;
      };
      break;
    }
    case LossOp::CrossEntropy: {
      const Eigen::Index n = 12, classes = 4;
      Eigen::MatrixXd probs(n, classes);
      Eigen::VectorXi labels(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        double sum = 0.0;
        for (Eigen::Index c = 0; c < classes; ++c) {
          probs(i, c) = rng.uniform(0.1, 1.0);
          sum += probs(i, c);
        }
        probs.row(i) /= sum;
        labels(i) = rng.uniform_int(0, static_cast<int>(classes) - 1);
      }
      inst.x = probs.reshaped();
      inst.analytic = cross_entropy_loss(probs, labels).gradient;
      // Finite differencing perturbs a single probability, which breaks the
      // row-sum precondition, so re-evaluate through the raw formula.
      inst.value = [n, classes, labels](const Eigen::VectorXd& x) {
        const Eigen::MatrixXd p = x.reshaped(n, classes);
        return cross_entropy_unchecked(p, labels);
      };
      break;
    }
    case LossOp::Dtw: {
      const Eigen::Index na = rng.uniform_int(3, 5);
      const Eigen::Index nb = rng.uniform_int(3, 5);
      const auto a = random_polyline(rng, na);
      const auto b = random_polyline(rng, nb);
      inst.x = flat_coords(a);
      inst.analytic = dtw_loss(a.points, b.points).gradient;
      inst.value = [a, b](const Eigen::VectorXd& x) {
        return dtw_loss(with_coords(a, x).points, b.points).value;
      };
      const auto alignment = dtw::align(a.points, b.points);
      bool near_kink = alignment.min_decision_margin < kKinkMargin;
      for (const auto& [i, j] : alignment.path)
        if ((a.points.row(i) - b.points.row(j)).norm() < kKinkMargin)
          near_kink = true;
      inst.skip_instance = near_kink;
      break;
    }
  }
  return inst;
}

}  // namespace detail

// Verify one loss's analytic gradient against central finite differences on
// randomly drawn non-degenerate instances. Coordinates within 1e-3 of a
// non-smooth point (absolute-value kinks, nearest-neighbour or warping-path
// ties) are skipped. The relative error is |analytic - numeric| scaled by
// max(1, |analytic|, |numeric|).
inline GradcheckReport gradcheck(LossOp op, int trials, double step,
                                 double tolerance, CounterRng rng) {
  if (trials < 1) throw std::invalid_argument("gradcheck: trials must be >= 1");
  GradcheckReport report;
  report.op = op;
  report.trials_requested = trials;
  report.step = step;
  report.tolerance = tolerance;

  const int max_attempts = 50 * trials;
  int attempts = 0;
  while (report.trials_evaluated < trials && attempts < max_attempts) {
    ++attempts;
    auto inst = detail::make_instance(op, rng);
    if (inst.skip_instance) {
      ++report.instances_skipped;
      continue;
    }
    ++report.trials_evaluated;
    for (Eigen::Index i = 0; i < inst.x.size(); ++i) {
      if (inst.skip_coord(i)) {
        ++report.coords_skipped;
        continue;
      }
      Eigen::VectorXd hi = inst.x;
      Eigen::VectorXd lo = inst.x;
      hi(i) += step;
      lo(i) -= step;
      const double numeric = (inst.value(hi) - inst.value(lo)) / (2.0 * step);
      const double analytic = inst.analytic(i);
      const double scale =
          std::max({1.0, std::abs(analytic), std::abs(numeric)});
      report.max_rel_error =
          std::max(report.max_rel_error, std::abs(analytic - numeric) / scale);
      ++report.coords_checked;
    }
  }
  report.pass = report.trials_evaluated >= trials &&
                report.max_rel_error <= tolerance;
  return report;
}

inline std::vector<GradcheckReport> gradcheck_all(int trials = 100,
                                                  double step = 1e-5,
                                                  double tolerance = 1e-4,
                                                  std::uint64_t seed = 20240901) {
  const LossOp ops[] = {LossOp::Loc,        LossOp::Chamfer,
                        LossOp::Length,     LossOp::PartLength,
                        LossOp::Focal,      LossOp::Dice,
                        LossOp::CrossEntropy, LossOp::Dtw};
  std::vector<GradcheckReport> reports;
  CounterRng root(seed);
  std::uint64_t tag = 0;
  for (const LossOp op : ops)
    reports.push_back(gradcheck(op, trials, step, tolerance, root.split(++tag)));
  return reports;
}

}  // namespace polymeasure::losses
