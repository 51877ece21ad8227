#pragma once

#include <optional>
#include <string>
#include <vector>

#include "polymeasure/geom.hpp"
#include "polymeasure/grading.hpp"
#include "polymeasure/maskmeasure.hpp"

namespace polymeasure::metrics {

// True-positive rule and distance selection for detection matching. The
// chamfer threshold applies to the squared-distance chamfer value computed
// on [0,1]-normalized coordinates, strictly below.
struct MatchConfig {
  double chamfer_threshold = 0.05;
  double confidence_threshold = 0.5;
  geom::DistanceKind distance = geom::DistanceKind::ChamferSquared;
};

struct MatchedPair {
  int pred_index = 0;
  int gt_index = 0;
  double distance = 0.0;
};

struct ImageMatches {
  std::vector<MatchedPair> matches;
  std::vector<int> false_positive_preds;
  std::vector<int> false_negative_gts;
};

// Greedy one-to-one matching for a single image. Polylines must already be
// normalized to [0,1]. Classes are compared separately; predictions are
// visited in canonical order (confidence descending, then coordinates) and
// each takes the nearest unmatched same-class ground truth with distance
// strictly below the threshold, ties by ground-truth index. Predictions
// below the confidence threshold are false positives only if kept; they are
// excluded entirely here.
ImageMatches match_image(const std::vector<geom::Polylined>& preds,
                         const std::vector<geom::Polylined>& gts,
                         const MatchConfig& cfg);

struct PrCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// Zero when the denominator is zero.
PrecisionRecall precision_recall(const PrCounts& counts);

struct ApResult {
  double ap = 0.0;
  long total_gt = 0;
  long total_pred = 0;
  bool defined = false;  // false when the class has neither GT nor predictions
};

// Average precision for one class over a dataset: all predictions ranked by
// confidence with no cutoff, swept through the one-to-one matching rule,
// area under the precision envelope. Classes with no ground truth and no
// predictions are undefined and skipped from the mean.
ApResult average_precision(
    const std::vector<std::vector<geom::Polylined>>& preds_by_image,
    const std::vector<std::vector<geom::Polylined>>& gts_by_image,
    const MatchConfig& cfg, geom::ClassLabel cls);

struct LengthPair {
  double gt = 0.0;
  double pred = 0.0;
};

// Matched-pair lengths for one image, split by class.
struct ImageMeasurements {
  std::string id;
  std::vector<LengthPair> villi;
  std::vector<LengthPair> crypt;
};

struct ImageRatio {
  std::string id;
  double gt = 0.0;
  double pred = 0.0;
};

struct MeasurementErrors {
  double mae_villi = 0.0, mre_villi = 0.0;
  double mae_crypt = 0.0, mre_crypt = 0.0;
  double mae_ratio = 0.0, mre_ratio = 0.0;
  long villi_pairs = 0, crypt_pairs = 0;
  long ratio_images = 0;
  long ratio_images_excluded = 0;
  std::vector<ImageRatio> per_image;  // images having both classes matched
};

// Length errors over matched pairs. MAE is the mean absolute difference in
// pixels, MRE the mean relative difference as a percentage of the ground
// truth. The per-image ratio is mean matched-villi length over mean
// matched-crypt length, predictions and ground truth separately; images
// missing either class are excluded from ratio aggregation and counted.
MeasurementErrors measurement_errors(
    const std::vector<ImageMeasurements>& images);

// Overlap scores for one label; (1, 1) when both masks are empty.
std::pair<double, double> dice_iou(const maskmeasure::LabelMap& pred,
                                   const maskmeasure::LabelMap& gt, int label);

struct ClassDetection {
  PrCounts counts;
  PrecisionRecall pr;
  ApResult ap;
};

struct EvalReport {
  ClassDetection villi;
  ClassDetection crypt;
  double map = 0.0;
  MeasurementErrors measurement;
  std::optional<double> dice;
  std::optional<double> iou;
  std::vector<grading::GradeResult> grades;     // from predicted ratios
  std::vector<grading::GradeResult> gt_grades;  // from ground-truth ratios
  grading::ClassificationScores binary_scores;
  grading::ClassificationScores marsh_scores;
};

}  // namespace polymeasure::metrics
