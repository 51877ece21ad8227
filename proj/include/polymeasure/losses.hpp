#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>

#include "polymeasure/dtw.hpp"
#include "polymeasure/geom.hpp"

namespace polymeasure::losses {

// Scalar loss plus analytic gradient. For polyline losses the gradient is
// laid out (x_s, y_s, x_m, y_m, x_e, y_e) over the prediction's points; for
// raster losses it follows Eigen's reshaped() order of the prediction.
struct LossValue {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
};

enum class SegmentMetric { Euclidean, Squared };

namespace detail {

inline void require_same_size(const geom::Polylined& pred,
                              const geom::Polylined& gt, const char* who) {
  if (pred.points.rows() != gt.points.rows())
    throw std::invalid_argument(std::string(who) +
                                ": point counts must match");
}

inline double sign_or_zero(double v) {
  if (v > 0.0) return 1.0;
  if (v < 0.0) return -1.0;
  return 0.0;
}

// d/dcoords of the Euclidean length of one segment (a - b); zero
// subgradient on degenerate segments.
inline geom::Point2d unit_or_zero(const geom::Point2d& delta) {
  const double n = delta.norm();
  return n > 0.0 ? geom::Point2d(delta / n) : geom::Point2d(0.0, 0.0);
}

}  // namespace detail

// Coordinate-wise L1 distance between prediction and ground truth.
inline LossValue loc_loss(const geom::Polylined& pred,
                          const geom::Polylined& gt) {
  detail::require_same_size(pred, gt, "loc_loss");
  const Eigen::Index n = pred.points.rows();
  LossValue out;
  out.gradient = Eigen::VectorXd::Zero(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 2; ++c) {
      const double delta = pred.points(i, c) - gt.points(i, c);
      out.value += std::abs(delta);
      out.gradient(2 * i + c) = detail::sign_or_zero(delta);
    }
  }
  return out;
}

// Symmetric chamfer distance with squared point distances; the gradient
// differentiates through the nearest-neighbour selections fixed at the
// evaluated point.
inline LossValue chamfer_loss(const geom::Polylined& pred,
                              const geom::Polylined& gt) {
  const auto& p = gt.points;    // reference set
  const auto& q = pred.points;  // differentiated set
  if (p.rows() == 0 || q.rows() == 0)
    throw std::invalid_argument("chamfer_loss: empty point set");
  LossValue out;
  out.gradient = Eigen::VectorXd::Zero(2 * q.rows());
  out.value = geom::chamfer_distance<double>(p, q);

  const double inv_p = 1.0 / static_cast<double>(p.rows());
  const double inv_q = 1.0 / static_cast<double>(q.rows());
  for (Eigen::Index j = 0; j < p.rows(); ++j) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::max();
    for (Eigen::Index k = 0; k < q.rows(); ++k) {
      const double d = (p.row(j) - q.row(k)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    out.gradient.segment<2>(2 * best) +=
        inv_p * 2.0 * (q.row(best) - p.row(j)).transpose();
  }
  for (Eigen::Index k = 0; k < q.rows(); ++k) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::max();
    for (Eigen::Index j = 0; j < p.rows(); ++j) {
      const double d = (p.row(j) - q.row(k)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    out.gradient.segment<2>(2 * k) +=
        inv_q * 2.0 * (q.row(k) - p.row(best)).transpose();
  }
  return out;
}

// Focal loss for one binary class target. The positive branch follows the
// definition -a(1-y^)^g y log(y^); the negative branch uses the symmetric
// term -(1-a) y^^g log(1-y^) so that well-classified negatives are
// down-weighted the same way.
inline LossValue focal_loss(int y, double y_hat, const FocalParams& params = {}) {
  if (y != 0 && y != 1)
    throw std::invalid_argument("focal_loss: target must be 0 or 1");
  constexpr double kClamp = 1e-7;
  const double p = std::clamp(y_hat, kClamp, 1.0 - kClamp);
  const bool clamped = y_hat < kClamp || y_hat > 1.0 - kClamp;
  const double a = params.alpha;
  const double g = params.gamma;

  LossValue out;
  out.gradient = Eigen::VectorXd::Zero(1);
  if (y == 1) {
    out.value = -a * std::pow(1.0 - p, g) * std::log(p);
    if (!clamped)
      out.gradient(0) = a * g * std::pow(1.0 - p, g - 1.0) * std::log(p) -
                        a * std::pow(1.0 - p, g) / p;
  } else {
    out.value = -(1.0 - a) * std::pow(p, g) * std::log(1.0 - p);
    if (!clamped)
      out.gradient(0) = -(1.0 - a) * g * std::pow(p, g - 1.0) * std::log(1.0 - p) +
                        (1.0 - a) * std::pow(p, g) / (1.0 - p);
  }
  return out;
}

// Absolute difference of total polyline lengths.
inline LossValue length_loss(const geom::Polylined& pred,
                             const geom::Polylined& gt) {
  const double m_gt = geom::polyline_length(gt);
  const double m_pred = geom::polyline_length(pred);
  const Eigen::Index n = pred.points.rows();

  LossValue out;
  out.value = std::abs(m_gt - m_pred);
  out.gradient = Eigen::VectorXd::Zero(2 * n);
  const double outer = detail::sign_or_zero(m_pred - m_gt);
  if (outer == 0.0) return out;

  for (Eigen::Index i = 1; i < n; ++i) {
    const geom::Point2d u = detail::unit_or_zero(
        (pred.points.row(i) - pred.points.row(i - 1)).transpose());
    out.gradient.segment<2>(2 * i) += outer * u;
    out.gradient.segment<2>(2 * (i - 1)) -= outer * u;
  }
  return out;
}

// Absolute differences of the start-middle and middle-end segment lengths.
// Euclidean by default; squared segment distances are available for
// ablation.
inline LossValue part_length_loss(const geom::Polylined& pred,
                                  const geom::Polylined& gt,
                                  SegmentMetric metric = SegmentMetric::Euclidean) {
  if (pred.points.rows() != 3 || gt.points.rows() != 3)
    throw std::invalid_argument("part_length_loss: expects 3-point polylines");

  auto seg = [&](const geom::Polylined& p, Eigen::Index i, Eigen::Index j) {
    const double d = (p.points.row(j) - p.points.row(i)).norm();
    return metric == SegmentMetric::Euclidean ? d : d * d;
  };

  LossValue out;
  out.gradient = Eigen::VectorXd::Zero(6);
  const Eigen::Index ends[2][2] = {{0, 1}, {1, 2}};
  for (const auto& [i, j] : ends) {
    const double d_gt = seg(gt, i, j);
    const double d_pred = seg(pred, i, j);
    out.value += std::abs(d_gt - d_pred);
    const double outer = detail::sign_or_zero(d_pred - d_gt);
    if (outer == 0.0) continue;
    const geom::Point2d delta =
        (pred.points.row(j) - pred.points.row(i)).transpose();
    geom::Point2d deriv;
    if (metric == SegmentMetric::Euclidean)
      deriv = detail::unit_or_zero(delta);
    else
      deriv = 2.0 * delta;
    out.gradient.segment<2>(2 * j) += outer * deriv;
    out.gradient.segment<2>(2 * i) -= outer * deriv;
  }
  return out;
}

struct DetectionWeights {
  double loc = 1.0;
  double chamfer = 1.0;
  double focal = 1.0;
  double length = 1.0;
  double part_length = 1.0;
};

struct ClassTarget {
  int y = 1;
  double y_hat = 1.0;
  FocalParams focal;
};

// Weighted sum of the five detection losses. Gradient layout: the six
// prediction coordinates followed by the predicted class probability.
inline LossValue total_detection_loss(const geom::Polylined& pred,
                                      const geom::Polylined& gt,
                                      const ClassTarget& target,
                                      const DetectionWeights& w = {}) {
  const LossValue loc = loc_loss(pred, gt);
  const LossValue cd = chamfer_loss(pred, gt);
  const LossValue focal = focal_loss(target.y, target.y_hat, target.focal);
  const LossValue len = length_loss(pred, gt);
  const LossValue part = part_length_loss(pred, gt);

  LossValue out;
  out.value = w.loc * loc.value + w.chamfer * cd.value + w.focal * focal.value +
              w.length * len.value + w.part_length * part.value;
  out.gradient = Eigen::VectorXd::Zero(7);
  out.gradient.head<6>() = w.loc * loc.gradient + w.chamfer * cd.gradient +
                           w.length * len.gradient +
                           w.part_length * part.gradient;
  out.gradient(6) = w.focal * focal.gradient(0);
  return out;
}

// Soft Dice loss over a probability raster against a binary mask.
inline LossValue dice_loss(const Eigen::ArrayXXd& pred,
                           const Eigen::ArrayXXd& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
    throw std::invalid_argument("dice_loss: shape mismatch");
  constexpr double kEps = 1e-6;
  const double intersection = (pred * gt).sum();
  const double denom = pred.sum() + gt.sum() + kEps;
  const double numer = 2.0 * intersection + kEps;

  LossValue out;
  out.value = 1.0 - numer / denom;
  const Eigen::ArrayXXd grad = (numer - 2.0 * gt * denom) / (denom * denom);
  out.gradient = grad.reshaped();
  return out;
}

// Mean negative log-likelihood of the true class. probs holds one pixel per
// row; rows must sum to 1 within 1e-6. Gradient follows probs.reshaped().
inline LossValue cross_entropy_loss(const Eigen::MatrixXd& probs,
                                    const Eigen::VectorXi& labels) {
  const Eigen::Index n = probs.rows();
  const Eigen::Index classes = probs.cols();
  if (labels.size() != n)
    throw std::invalid_argument("cross_entropy_loss: shape mismatch");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels(i) < 0 || labels(i) >= classes)
      throw std::invalid_argument("cross_entropy_loss: label out of range");
    if (std::abs(probs.row(i).sum() - 1.0) > 1e-6)
      throw std::invalid_argument(
          "cross_entropy_loss: pixel distribution does not sum to 1");
  }
  constexpr double kClamp = 1e-7;
  LossValue out;
  out.gradient = Eigen::VectorXd::Zero(n * classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = probs(i, labels(i));
    const double clamped = std::max(p, kClamp);
    out.value += -std::log(clamped);
    if (p >= kClamp)
      out.gradient(labels(i) * n + i) = -1.0 / (clamped * static_cast<double>(n));
  }
  out.value /= static_cast<double>(n);
  return out;
}

// Dynamic time warping distance between two contours, normalized by the sum
// of the sequence lengths. The gradient is taken with respect to the first
// sequence's coordinates through the optimal path fixed at the evaluated
// point.
inline LossValue dtw_loss(const geom::PointMatrixd& a,
                          const geom::PointMatrixd& b) {
  const auto alignment = dtw::align(a, b);
  const double norm = static_cast<double>(a.rows() + b.rows());

  LossValue out;
  out.value = alignment.total_cost / norm;
  out.gradient = Eigen::VectorXd::Zero(2 * a.rows());
  for (const auto& [i, j] : alignment.path) {
    const geom::Point2d delta = (a.row(i) - b.row(j)).transpose();
    out.gradient.segment<2>(2 * i) += detail::unit_or_zero(delta) / norm;
  }
  return out;
}

struct SegmentationLoss {
  double value = 0.0;
  LossValue dice;
  LossValue cross_entropy;
  std::optional<LossValue> dtw;  // absent when no contours were supplied
};

// Composite segmentation objective: Dice + cross-entropy + DTW between the
// shoulder and border contours. Without contours the DTW term is omitted
// and the result flags it by leaving `dtw` empty.
inline SegmentationLoss segmentation_loss(
    const Eigen::ArrayXXd& pred_mask, const Eigen::ArrayXXd& gt_mask,
    const Eigen::MatrixXd& probs, const Eigen::VectorXi& labels,
    const std::optional<std::pair<geom::PointMatrixd, geom::PointMatrixd>>&
        contours = std::nullopt) {
  SegmentationLoss out;
  out.dice = dice_loss(pred_mask, gt_mask);
  out.cross_entropy = cross_entropy_loss(probs, labels);
  out.value = out.dice.value + out.cross_entropy.value;
  if (contours.has_value()) {
    out.dtw = dtw_loss(contours->first, contours->second);
    out.value += out.dtw->value;
  }
  return out;
}

}  // namespace polymeasure::losses
