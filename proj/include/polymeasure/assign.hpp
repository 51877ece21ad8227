#pragma once

#include "polymeasure/geom.hpp"
#include "polymeasure/hungarian.hpp"

namespace polymeasure::assign {

// Matching cost between a prediction and a ground truth for set-prediction
// style target assignment: geometric distance plus a class-mismatch penalty.
// Polylines are expected in normalized [0,1] coordinates. EMD needs equal
// point counts, so mixed-size inputs are resampled to three points first.
inline double match_cost(const geom::Polylined& pred, const geom::Polylined& gt,
                         double class_weight = 1.0,
                         geom::DistanceKind distance =
                             geom::DistanceKind::ChamferSquared) {
  double geometric = 0.0;
  if (distance == geom::DistanceKind::ChamferSquared) {
    geometric = geom::chamfer_distance(pred, gt);
  } else {
    if (pred.points.rows() == gt.points.rows()) {
      geometric = geom::emd_distance(pred, gt);
    } else {
      const auto p3 = geom::resample_to_three(
          pred, geom::ResamplePolicy::DuplicateEndpoint);
      const auto g3 =
          geom::resample_to_three(gt, geom::ResamplePolicy::DuplicateEndpoint);
      geometric = geom::emd_distance(p3, g3);
    }
  }
  return geometric + (pred.label == gt.label ? 0.0 : class_weight);
}

}  // namespace polymeasure::assign
