#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <utility>

#include "polymeasure/hungarian.hpp"

namespace polymeasure::geom {

enum class ClassLabel { Villi, Crypt };
enum class DistanceKind { ChamferSquared, EarthMover };
enum class ResamplePolicy { DuplicateEndpoint, Midpoint, SampleInterior };

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

// One point per row.
template <typename Scalar>
using PointMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>;

using Point2d = Point2<double>;
using PointMatrixd = PointMatrix<double>;

// An annotated open curve of 2-4 control points: the unit of detection and
// measurement. Coordinates are input-image pixels unless stated otherwise.
template <typename Scalar>
struct Polyline {
  PointMatrix<Scalar> points;
  ClassLabel label = ClassLabel::Villi;
  Scalar confidence = Scalar(1);

  Eigen::Index size() const { return points.rows(); }
  Point2<Scalar> point(Eigen::Index i) const {
    return points.row(i).transpose();
  }
};

using Polylined = Polyline<double>;

template <typename Scalar>
void validate_polyline(const Polyline<Scalar>& p) {
  if (p.points.rows() < 2)
    throw std::invalid_argument("polyline: needs at least 2 points");
  if (!p.points.allFinite())
    throw std::invalid_argument("polyline: points must be finite");
  if (!(p.confidence >= Scalar(0) && p.confidence <= Scalar(1)))
    throw std::invalid_argument("polyline: confidence must be in [0,1]");
}

template <typename Scalar>
Polyline<Scalar> make_polyline(
    std::initializer_list<std::pair<Scalar, Scalar>> pts,
    ClassLabel label = ClassLabel::Villi, Scalar confidence = Scalar(1)) {
  Polyline<Scalar> p;
  p.points.resize(static_cast<Eigen::Index>(pts.size()), 2);
  Eigen::Index i = 0;
  for (const auto& [x, y] : pts) {
    p.points(i, 0) = x;
    p.points(i, 1) = y;
    ++i;
  }
  p.label = label;
  p.confidence = confidence;
  validate_polyline(p);
  return p;
}

inline Polylined make_polylined(
    std::initializer_list<std::pair<double, double>> pts,
    ClassLabel label = ClassLabel::Villi, double confidence = 1.0) {
  return make_polyline<double>(pts, label, confidence);
}

// Sum of Euclidean segment lengths over consecutive points. Degenerate
// curves (all points coincident) measure 0.
template <typename Scalar>
Scalar polyline_length(const PointMatrix<Scalar>& points) {
  Scalar length = Scalar(0);
  for (Eigen::Index i = 1; i < points.rows(); ++i)
    length += (points.row(i) - points.row(i - 1)).norm();
  return length;
}

template <typename Scalar>
Scalar polyline_length(const Polyline<Scalar>& p) {
  return polyline_length<Scalar>(p.points);
}

// Cumulative arc length at each vertex; front() == 0, back() == total.
template <typename Scalar>
Eigen::VectorX<Scalar> cumulative_lengths(const PointMatrix<Scalar>& points) {
  Eigen::VectorX<Scalar> cum(points.rows());
  cum(0) = Scalar(0);
  for (Eigen::Index i = 1; i < points.rows(); ++i)
    cum(i) = cum(i - 1) + (points.row(i) - points.row(i - 1)).norm();
  return cum;
}

// Reduce or extend a 2-4 point polyline to exactly three points.
// 2-point inputs grow a third point per the policy: DuplicateEndpoint
// repeats the endpoint, Midpoint (and SampleInterior, whose arc-length
// midpoint is the same point) inserts the segment midpoint. 3-point inputs
// pass through. 4-point inputs keep start/end plus the interior vertex
// closest to the arc-length midpoint, whichever policy is asked for, since
// the other policies define no reduction.
template <typename Scalar>
Polyline<Scalar> resample_to_three(const Polyline<Scalar>& p,
                                   ResamplePolicy policy) {
  const Eigen::Index n = p.points.rows();
  if (n < 2 || n > 4)
    throw std::invalid_argument("resample_to_three: expected 2-4 points");

  Polyline<Scalar> out;
  out.label = p.label;
  out.confidence = p.confidence;
  out.points.resize(3, 2);

  if (n == 3) {
    out.points = p.points;
    return out;
  }
  if (n == 2) {
    out.points.row(0) = p.points.row(0);
    out.points.row(2) = p.points.row(1);
    if (policy == ResamplePolicy::DuplicateEndpoint)
      out.points.row(1) = p.points.row(1);
    else
      out.points.row(1) = (p.points.row(0) + p.points.row(1)) / Scalar(2);
    return out;
  }

  const Eigen::VectorX<Scalar> cum = cumulative_lengths(p.points);
  const Scalar half = cum(n - 1) / Scalar(2);
  Eigen::Index keep = 1;
  if (std::abs(cum(2) - half) < std::abs(cum(1) - half)) keep = 2;
  out.points.row(0) = p.points.row(0);
  out.points.row(1) = p.points.row(keep);
  out.points.row(2) = p.points.row(n - 1);
  return out;
}

// Symmetric chamfer distance between two point sets: mean over each set of
// the squared Euclidean distance to the nearest point of the other set,
// both directions summed. Zero iff the sets coincide.
template <typename Scalar>
Scalar chamfer_distance(const PointMatrix<Scalar>& a,
                        const PointMatrix<Scalar>& b) {
  if (a.rows() == 0 || b.rows() == 0)
    throw std::invalid_argument("chamfer_distance: empty point set");
  auto one_way = [](const PointMatrix<Scalar>& from,
                    const PointMatrix<Scalar>& to) {
    Scalar sum = Scalar(0);
    for (Eigen::Index j = 0; j < from.rows(); ++j) {
      Scalar best = std::numeric_limits<Scalar>::max();
      for (Eigen::Index k = 0; k < to.rows(); ++k) {
        const Scalar d = (from.row(j) - to.row(k)).squaredNorm();
        if (d < best) best = d;
      }
      sum += best;
    }
    return sum / Scalar(from.rows());
  };
  return one_way(a, b) + one_way(b, a);
}

template <typename Scalar>
Scalar chamfer_distance(const Polyline<Scalar>& a, const Polyline<Scalar>& b) {
  return chamfer_distance<Scalar>(a.points, b.points);
}

// Earth mover's distance between equal-size point sets with uniform
// weights: the minimum over point permutations of the mean Euclidean
// transport cost, solved exactly by assignment.
template <typename Scalar>
Scalar emd_distance(const PointMatrix<Scalar>& a, const PointMatrix<Scalar>& b) {
  if (a.rows() == 0)
    throw std::invalid_argument("emd_distance: empty point set");
  if (a.rows() != b.rows())
    throw std::invalid_argument("emd_distance: point counts must match");
  const Eigen::Index n = a.rows();
  Eigen::MatrixX<Scalar> costs(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      costs(i, j) = (a.row(i) - b.row(j)).norm();
  const auto solved = assign::hungarian_solve<Scalar>({costs, std::nullopt});
  return solved.total_cost / Scalar(n);
}

template <typename Scalar>
Scalar emd_distance(const Polyline<Scalar>& a, const Polyline<Scalar>& b) {
  return emd_distance<Scalar>(a.points, b.points);
}

template <typename Scalar>
struct NormalizeResult {
  Polyline<Scalar> polyline;
  bool clamped = false;
};

// Scale pixel coordinates into [0,1] by the image dimensions. Points
// slightly outside the frame are clamped and the result flagged, since
// annotation tools emit such points.
template <typename Scalar>
NormalizeResult<Scalar> normalize_polyline(const Polyline<Scalar>& p,
                                           int width, int height) {
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("normalize_polyline: non-positive dimensions");
  NormalizeResult<Scalar> out;
  out.polyline = p;
  for (Eigen::Index i = 0; i < p.points.rows(); ++i) {
    Scalar x = p.points(i, 0);
    Scalar y = p.points(i, 1);
    if (x < Scalar(0) || x > Scalar(width) || y < Scalar(0) ||
        y > Scalar(height)) {
      out.clamped = true;
      x = std::clamp(x, Scalar(0), Scalar(width));
      y = std::clamp(y, Scalar(0), Scalar(height));
    }
    out.polyline.points(i, 0) = x / Scalar(width);
    out.polyline.points(i, 1) = y / Scalar(height);
  }
  return out;
}

template <typename Scalar>
Polyline<Scalar> denormalize_polyline(const Polyline<Scalar>& p, int width,
                                      int height) {
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("denormalize_polyline: non-positive dimensions");
  Polyline<Scalar> out = p;
  out.points.col(0) *= Scalar(width);
  out.points.col(1) *= Scalar(height);
  return out;
}

// Nearest point on the polyline (as a chain of segments) to a query point.
template <typename Scalar>
Point2<Scalar> closest_point_on_polyline(const PointMatrix<Scalar>& points,
                                         const Point2<Scalar>& q) {
  if (points.rows() == 0)
    throw std::invalid_argument("closest_point_on_polyline: empty polyline");
  Point2<Scalar> best = points.row(0).transpose();
  Scalar best_d = (q - best).squaredNorm();
  for (Eigen::Index i = 1; i < points.rows(); ++i) {
    const Point2<Scalar> a = points.row(i - 1).transpose();
    const Point2<Scalar> b = points.row(i).transpose();
    const Point2<Scalar> ab = b - a;
    const Scalar len2 = ab.squaredNorm();
    Point2<Scalar> candidate = a;
    if (len2 > Scalar(0)) {
      const Scalar t =
          std::clamp<Scalar>((q - a).dot(ab) / len2, Scalar(0), Scalar(1));
      candidate = a + t * ab;
    }
    const Scalar d = (q - candidate).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = candidate;
    }
  }
  return best;
}

}  // namespace polymeasure::geom
