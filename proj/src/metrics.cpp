#include "polymeasure/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace polymeasure::metrics {

namespace {

double pair_distance(const geom::Polylined& pred, const geom::Polylined& gt,
                     const MatchConfig& cfg) {
  if (cfg.distance == geom::DistanceKind::ChamferSquared)
    return geom::chamfer_distance(pred, gt);
  if (pred.points.rows() == gt.points.rows())
    return geom::emd_distance(pred, gt);
  const auto p3 =
      geom::resample_to_three(pred, geom::ResamplePolicy::DuplicateEndpoint);
  const auto g3 =
      geom::resample_to_three(gt, geom::ResamplePolicy::DuplicateEndpoint);
  return geom::emd_distance(p3, g3);
}

// Canonical prediction order: confidence descending, then coordinates
// lexicographically. Independent of input order, so shuffling equally
// confident predictions cannot change match counts.
bool canonical_before(const geom::Polylined& a, const geom::Polylined& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.points.rows() != b.points.rows())
    return a.points.rows() < b.points.rows();
  for (Eigen::Index i = 0; i < a.points.rows(); ++i)
    for (int c = 0; c < 2; ++c)
      if (a.points(i, c) != b.points(i, c))
        return a.points(i, c) < b.points(i, c);
  return false;
}

std::vector<int> canonical_order(const std::vector<geom::Polylined>& preds,
                                 const std::vector<int>& subset) {
  std::vector<int> order = subset;
  std::stable_sort(order.begin(), order.end(), [&preds](int a, int b) {
    return canonical_before(preds[static_cast<std::size_t>(a)],
                            preds[static_cast<std::size_t>(b)]);
  });
  return order;
}

}  // namespace

ImageMatches match_image(const std::vector<geom::Polylined>& preds,
                         const std::vector<geom::Polylined>& gts,
                         const MatchConfig& cfg) {
  ImageMatches out;
  std::vector<bool> gt_taken(gts.size(), false);

  for (const geom::ClassLabel cls :
       {geom::ClassLabel::Villi, geom::ClassLabel::Crypt}) {
    std::vector<int> pred_idx;
    for (int i = 0; i < static_cast<int>(preds.size()); ++i)
      if (preds[static_cast<std::size_t>(i)].label == cls &&
          preds[static_cast<std::size_t>(i)].confidence >=
              cfg.confidence_threshold)
        pred_idx.push_back(i);
    pred_idx = canonical_order(preds, pred_idx);

    for (const int pi : pred_idx) {
      int best_gt = -1;
      double best_d = std::numeric_limits<double>::max();
      for (int gi = 0; gi < static_cast<int>(gts.size()); ++gi) {
        if (gt_taken[static_cast<std::size_t>(gi)]) continue;
        if (gts[static_cast<std::size_t>(gi)].label != cls) continue;
        const double d = pair_distance(preds[static_cast<std::size_t>(pi)],
                                       gts[static_cast<std::size_t>(gi)], cfg);
        if (d < best_d) {  // ties keep the lower ground-truth index
          best_d = d;
          best_gt = gi;
        }
      }
      if (best_gt >= 0 && best_d < cfg.chamfer_threshold) {
        gt_taken[static_cast<std::size_t>(best_gt)] = true;
        out.matches.push_back({pi, best_gt, best_d});
      } else {
        out.false_positive_preds.push_back(pi);
      }
    }
  }

  for (int gi = 0; gi < static_cast<int>(gts.size()); ++gi)
    if (!gt_taken[static_cast<std::size_t>(gi)])
      out.false_negative_gts.push_back(gi);

  std::sort(out.matches.begin(), out.matches.end(),
            [](const MatchedPair& a, const MatchedPair& b) {
              return a.pred_index < b.pred_index;
            });
  std::sort(out.false_positive_preds.begin(), out.false_positive_preds.end());
  return out;
}

PrecisionRecall precision_recall(const PrCounts& counts) {
  PrecisionRecall out;
  if (counts.tp + counts.fp > 0)
    out.precision = double(counts.tp) / double(counts.tp + counts.fp);
  if (counts.tp + counts.fn > 0)
    out.recall = double(counts.tp) / double(counts.tp + counts.fn);
  return out;
}

ApResult average_precision(
    const std::vector<std::vector<geom::Polylined>>& preds_by_image,
    const std::vector<std::vector<geom::Polylined>>& gts_by_image,
    const MatchConfig& cfg, geom::ClassLabel cls) {
  ApResult out;

  struct Ranked {
    int image;
    int index;
  };
  std::vector<Ranked> ranked;
  for (int img = 0; img < static_cast<int>(preds_by_image.size()); ++img) {
    const auto& preds = preds_by_image[static_cast<std::size_t>(img)];
    for (int i = 0; i < static_cast<int>(preds.size()); ++i)
      if (preds[static_cast<std::size_t>(i)].label == cls)
        ranked.push_back({img, i});
  }
  for (const auto& gts : gts_by_image)
    for (const auto& gt : gts)
      if (gt.label == cls) ++out.total_gt;
  out.total_pred = static_cast<long>(ranked.size());

  if (out.total_gt == 0 && out.total_pred == 0) return out;
  out.defined = true;
  if (out.total_gt == 0 || out.total_pred == 0) return out;  // AP stays 0

  std::stable_sort(ranked.begin(), ranked.end(),
                   [&preds_by_image](const Ranked& a, const Ranked& b) {
                     const auto& pa =
                         preds_by_image[static_cast<std::size_t>(a.image)]
                                       [static_cast<std::size_t>(a.index)];
                     const auto& pb =
                         preds_by_image[static_cast<std::size_t>(b.image)]
                                       [static_cast<std::size_t>(b.index)];
                     if (canonical_before(pa, pb)) return true;
                     if (canonical_before(pb, pa)) return false;
                     return a.image < b.image;
                   });

  std::vector<std::vector<bool>> gt_taken(gts_by_image.size());
  for (std::size_t img = 0; img < gts_by_image.size(); ++img)
    gt_taken[img].assign(gts_by_image[img].size(), false);

  std::vector<double> precisions, recalls;
  long tp = 0, fp = 0;
  for (const Ranked& r : ranked) {
    const auto& pred = preds_by_image[static_cast<std::size_t>(r.image)]
                                     [static_cast<std::size_t>(r.index)];
    const auto& gts = gts_by_image[static_cast<std::size_t>(r.image)];
    int best_gt = -1;
    double best_d = std::numeric_limits<double>::max();
    for (int gi = 0; gi < static_cast<int>(gts.size()); ++gi) {
      if (gt_taken[static_cast<std::size_t>(r.image)][static_cast<std::size_t>(gi)])
        continue;
      if (gts[static_cast<std::size_t>(gi)].label != cls) continue;
      const double d = pair_distance(pred, gts[static_cast<std::size_t>(gi)], cfg);
      if (d < best_d) {
        best_d = d;
        best_gt = gi;
      }
    }
    if (best_gt >= 0 && best_d < cfg.chamfer_threshold) {
      gt_taken[static_cast<std::size_t>(r.image)][static_cast<std::size_t>(best_gt)] =
          true;
      ++tp;
    } else {
      ++fp;
    }
    precisions.push_back(double(tp) / double(tp + fp));
    recalls.push_back(double(tp) / double(out.total_gt));
  }

  // Area under the precision envelope (all-point interpolation).
  for (int i = static_cast<int>(precisions.size()) - 2; i >= 0; --i)
    precisions[static_cast<std::size_t>(i)] =
        std::max(precisions[static_cast<std::size_t>(i)],
                 precisions[static_cast<std::size_t>(i) + 1]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < precisions.size(); ++i) {
    ap += (recalls[i] - prev_recall) * precisions[i];
    prev_recall = recalls[i];
  }
  out.ap = ap;
  return out;
}

MeasurementErrors measurement_errors(
    const std::vector<ImageMeasurements>& images) {
  MeasurementErrors out;
  double villi_abs = 0.0, villi_rel = 0.0;
  double crypt_abs = 0.0, crypt_rel = 0.0;
  long villi_rel_pairs = 0, crypt_rel_pairs = 0;
  double ratio_abs = 0.0, ratio_rel = 0.0;
  long ratio_rel_images = 0;

  for (const ImageMeasurements& image : images) {
    for (const LengthPair& pair : image.villi) {
      const double err = std::abs(pair.pred - pair.gt);
      villi_abs += err;
      ++out.villi_pairs;
      if (pair.gt > 0.0) {
        villi_rel += err / pair.gt;
        ++villi_rel_pairs;
      }
    }
    for (const LengthPair& pair : image.crypt) {
      const double err = std::abs(pair.pred - pair.gt);
      crypt_abs += err;
      ++out.crypt_pairs;
      if (pair.gt > 0.0) {
        crypt_rel += err / pair.gt;
        ++crypt_rel_pairs;
      }
    }

    if (image.villi.empty() || image.crypt.empty()) {
      ++out.ratio_images_excluded;
      continue;
    }
    auto mean_of = [](const std::vector<LengthPair>& pairs, bool pred) {
      double sum = 0.0;
      for (const LengthPair& p : pairs) sum += pred ? p.pred : p.gt;
      return sum / static_cast<double>(pairs.size());
    };
    const double crypt_gt = mean_of(image.crypt, false);
    const double crypt_pred = mean_of(image.crypt, true);
    if (crypt_gt <= 0.0 || crypt_pred <= 0.0) {
      ++out.ratio_images_excluded;
      continue;
    }
    ImageRatio ratio;
    ratio.id = image.id;
    ratio.gt = mean_of(image.villi, false) / crypt_gt;
    ratio.pred = mean_of(image.villi, true) / crypt_pred;
    out.per_image.push_back(ratio);
    ++out.ratio_images;

    const double err = std::abs(ratio.pred - ratio.gt);
    ratio_abs += err;
    if (ratio.gt > 0.0) {
      ratio_rel += err / ratio.gt;
      ++ratio_rel_images;
    }
  }

  if (out.villi_pairs > 0) out.mae_villi = villi_abs / double(out.villi_pairs);
  if (villi_rel_pairs > 0)
    out.mre_villi = 100.0 * villi_rel / double(villi_rel_pairs);
  if (out.crypt_pairs > 0) out.mae_crypt = crypt_abs / double(out.crypt_pairs);
  if (crypt_rel_pairs > 0)
    out.mre_crypt = 100.0 * crypt_rel / double(crypt_rel_pairs);
  if (out.ratio_images > 0)
    out.mae_ratio = ratio_abs / double(out.ratio_images);
  if (ratio_rel_images > 0)
    out.mre_ratio = 100.0 * ratio_rel / double(ratio_rel_images);
  return out;
}

std::pair<double, double> dice_iou(const maskmeasure::LabelMap& pred,
                                   const maskmeasure::LabelMap& gt, int label) {
  if (pred.width() != gt.width() || pred.height() != gt.height())
    throw std::invalid_argument("dice_iou: dimension mismatch");
  long a = 0, b = 0, both = 0;
  for (int y = 0; y < pred.height(); ++y)
    for (int x = 0; x < pred.width(); ++x) {
      const bool in_pred = pred.at(x, y) == label;
      const bool in_gt = gt.at(x, y) == label;
      a += in_pred;
      b += in_gt;
      both += in_pred && in_gt;
    }
  if (a + b == 0) return {1.0, 1.0};
  const double dice = 2.0 * double(both) / double(a + b);
  const double iou = double(both) / double(a + b - both);
  return {dice, iou};
}

}  // namespace polymeasure::metrics
