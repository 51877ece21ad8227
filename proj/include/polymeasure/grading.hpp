#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace polymeasure::grading {

enum class Binary { Normal, CeD };
enum class Marsh { Normal, Marsh1, Marsh2, Marsh3 };

inline const char* to_string(Binary b) {
  return b == Binary::Normal ? "normal" : "ced";
}

inline const char* to_string(Marsh m) {
  switch (m) {
    case Marsh::Normal: return "normal";
    case Marsh::Marsh1: return "marsh1";
    case Marsh::Marsh2: return "marsh2";
    case Marsh::Marsh3: return "marsh3";
  }
  return "?";
}

// Interval edges of the clinical Vd:Cd bands. Boundary convention: ratios
// exactly on an interior edge take the less severe grade (1.05 -> Marsh1,
// 0.95 -> Marsh2); normal strictly requires ratio > normal_above.
struct GradeThresholds {
  double normal_above = 3.0;
  double marsh1_min = 1.05;
  double marsh2_min = 0.95;
};

struct GradeResult {
  std::string id;
  double vd_cd = 0.0;
  Binary binary = Binary::Normal;
  Marsh marsh = Marsh::Normal;
};

inline Marsh grade_marsh(double vd_cd, const GradeThresholds& t = {}) {
  if (!std::isfinite(vd_cd) || vd_cd < 0.0)
    throw std::invalid_argument("grade: ratio must be finite and >= 0");
  if (vd_cd > t.normal_above) return Marsh::Normal;
  if (vd_cd >= t.marsh1_min) return Marsh::Marsh1;
  if (vd_cd >= t.marsh2_min) return Marsh::Marsh2;
  return Marsh::Marsh3;
}

inline Binary binary_from_marsh(Marsh m) {
  return m == Marsh::Normal ? Binary::Normal : Binary::CeD;
}

inline GradeResult grade(double vd_cd, std::string id = {},
                         const GradeThresholds& t = {}) {
  GradeResult out;
  out.id = std::move(id);
  out.vd_cd = vd_cd;
  out.marsh = grade_marsh(vd_cd, t);
  out.binary = binary_from_marsh(out.marsh);
  return out;
}

struct ClassificationScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

enum class Task { Binary, MarshGrade };

// Accuracy plus precision/recall/F1. The binary task scores the CeD class;
// the grade task macro-averages over the grades present in either list.
// Per-class ratios with zero denominators count as 0.
inline ClassificationScores classification_scores(
    const std::vector<Marsh>& predicted, const std::vector<Marsh>& truth,
    Task task) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("classification_scores: length mismatch");
  if (predicted.empty())
    throw std::invalid_argument("classification_scores: empty input");

  const auto n = predicted.size();
  ClassificationScores out;
  std::size_t correct = 0;

  if (task == Task::Binary) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool pred_pos = binary_from_marsh(predicted[i]) == Binary::CeD;
      const bool true_pos = binary_from_marsh(truth[i]) == Binary::CeD;
      if (pred_pos == true_pos) ++correct;
      if (pred_pos && true_pos) ++tp;
      if (pred_pos && !true_pos) ++fp;
      if (!pred_pos && true_pos) ++fn;
    }
    out.precision = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
    out.recall = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
  } else {
    const Marsh all[] = {Marsh::Normal, Marsh::Marsh1, Marsh::Marsh2,
                         Marsh::Marsh3};
    double precision_sum = 0.0, recall_sum = 0.0, f1_sum = 0.0;
    int class_count = 0;
    for (const Marsh cls : all) {
      long tp = 0, fp = 0, fn = 0;
      bool seen = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (predicted[i] == cls || truth[i] == cls) seen = true;
        if (predicted[i] == cls && truth[i] == cls) ++tp;
        if (predicted[i] == cls && truth[i] != cls) ++fp;
        if (predicted[i] != cls && truth[i] == cls) ++fn;
      }
      if (!seen) continue;
      ++class_count;
      const double p = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
      const double r = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
      precision_sum += p;
      recall_sum += r;
      f1_sum += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    for (std::size_t i = 0; i < n; ++i)
      if (predicted[i] == truth[i]) ++correct;
    out.precision = precision_sum / class_count;
    out.recall = recall_sum / class_count;
    out.f1 = f1_sum / class_count;
    out.accuracy = double(correct) / double(n);
    return out;
  }

  out.accuracy = double(correct) / double(n);
  out.f1 = out.precision + out.recall > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

}  // namespace polymeasure::grading
