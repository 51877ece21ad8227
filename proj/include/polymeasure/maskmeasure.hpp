#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "polymeasure/geom.hpp"

namespace polymeasure::maskmeasure {

// Pixel label ids used throughout the raster pipeline.
enum PixelLabel : std::uint8_t {
  kBackground = 0,
  kVilli = 1,
  kCrypt = 2,
  kVilliShoulder = 3,
  kCryptBorder = 4,
};
inline constexpr int kLabelCount = 5;

// Integer raster of class labels, indexed as labels(y, x).
struct LabelMap {
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> labels;

  int width() const { return static_cast<int>(labels.cols()); }
  int height() const { return static_cast<int>(labels.rows()); }

  static LabelMap zeros(int width, int height);

  std::uint8_t at(int x, int y) const { return labels(y, x); }
  void set(int x, int y, std::uint8_t value) { labels(y, x) = value; }

  bool labels_valid() const;
};

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

// Ordered curve of pixel centers; consecutive points step by at most one
// pixel in each axis.
using Contour = geom::PointMatrixd;

// 8-connected components of one label, components below min_area dropped,
// ordered by first pixel in scan order; pixels within each component are in
// scan order too.
std::vector<std::vector<Pixel>> connected_components(const LabelMap& map,
                                                     int label,
                                                     int min_area = 20);

// Zhang-Suen iterative thinning of a binary grid (nonzero = foreground).
Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> zhang_suen_thin(
    const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& grid);

// Thin a component to a one-pixel skeleton and return its longest simple
// path (farthest-pair double sweep over the skeleton graph) as an ordered
// contour. Oriented so the first point is lexicographically smaller in
// (x, y) than the last.
Contour skeletonize(const std::vector<Pixel>& component);

// Path length: 1 per axial step, sqrt(2) per diagonal step.
double skeleton_length(const Contour& contour);

struct ContourResult {
  Contour contour;   // empty when the label is absent
  bool present = false;
};

// Skeleton curve of a shoulder/border class region (largest component,
// speckle ignored), ordered left-to-right.
ContourResult extract_class_contour(const LabelMap& map, int label);

struct DepthSample {
  geom::Point2d shoulder;
  geom::Point2d border;
  double depth = 0.0;
};

// Warp the shoulder contour onto the border contour and report, for each
// shoulder point, the nearest aligned border point and its distance.
std::vector<DepthSample> crypt_depth_profile(const Contour& shoulder,
                                             const Contour& border);

struct MeasureOptions {
  int min_area = 20;
};

struct MaskMeasurements {
  std::vector<double> villi_lengths;
  std::vector<double> crypt_lengths;
  std::optional<double> mean_crypt_depth;
};

// Post-hoc measurement pipeline for a label raster: per class, connected
// components are thinned to skeletons whose path lengths are reported; the
// mean shoulder-to-border depth is added when both contour labels exist.
MaskMeasurements measure_masks(const LabelMap& map,
                               const MeasureOptions& options = {});

}  // namespace polymeasure::maskmeasure
