#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "zap/error.hpp"

namespace zap {

struct CurvePoint {
  double t = 0.0;     // seconds since start
  double nauc = 0.0;  // 2 * AUC - 1
};

// Timestamps strictly increasing, nauc in [-1, 1].
using LearningCurve = std::vector<CurvePoint>;

struct AlcConfig {
  double budget = 1200.0;   // T
  double reference = 60.0;  // t0

  void validate() const {
    if (!(budget > 0.0)) throw ValidationError("ALC budget must be > 0");
    if (!(reference > 0.0)) throw ValidationError("ALC reference time must be > 0");
  }
};

inline double nauc_from_auc(double auc) {
  if (!(auc >= 0.0 && auc <= 1.0)) throw ValidationError("AUC out of [0,1]");
  return 2.0 * auc - 1.0;
}

/// Mann-Whitney estimate of ROC AUC: the fraction of (positive, negative)
/// pairs ordered correctly, ties counting one half. Computed from midranks in
/// O(n log n).
inline double binary_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
  std::size_t n_pos = 0;
  for (auto l : labels) {
    if (l != 0 && l != 1) throw ValidationError("labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(l);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ValidationError("binary AUC needs both classes present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) pos_rank_sum += midrank;
    i = j;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

/// One-vs-rest macro average of binary_auc. `scores` is row-major
/// n_samples x n_classes; classes absent from `labels` or present in every
/// sample are skipped.
inline double macro_auc(std::span<const double> scores, std::span<const int> labels, std::size_t n_classes) {
  if (n_classes < 2 || scores.size() != labels.size() * n_classes)
    throw ValidationError("scores must be n_samples x n_classes");
  double sum = 0.0;
  std::size_t used = 0;
  std::vector<double> col(labels.size());
  std::vector<int> bin(labels.size());
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      col[i] = scores[i * n_classes + c];
      bin[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
      pos += static_cast<std::size_t>(bin[i]);
    }
    if (pos == 0 || pos == labels.size()) continue;
    sum += binary_auc(col, bin);
    ++used;
  }
  if (used == 0) throw ValidationError("no class has both positive and negative samples");
  return sum / static_cast<double>(used);
}

// ln(1 + t/t0) / ln(1 + T/t0)
inline double time_transform(double t, const AlcConfig& cfg = {}) {
  cfg.validate();
  if (!(t >= 0.0 && t <= cfg.budget)) throw ValidationError("time outside [0, budget]");
  return std::log1p(t / cfg.reference) / std::log1p(cfg.budget / cfg.reference);
}

inline void validate(const LearningCurve& curve, const AlcConfig& cfg) {
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const auto& p = curve[i];
    if (!(p.t >= 0.0)) throw ValidationError("curve timestamps must be >= 0");
    if (p.t > cfg.budget) throw ValidationError("curve timestamp exceeds the budget");
    if (!(p.nauc >= -1.0 && p.nauc <= 1.0)) throw ValidationError("curve nauc out of [-1,1]");
    if (i > 0 && !(p.t > curve[i - 1].t)) throw ValidationError("curve timestamps must be strictly increasing");
  }
}

/// Area under the step learning curve in transformed time. The score is 0
/// before the first prediction and the last value is held until the budget.
inline double alc(const LearningCurve& curve, const AlcConfig& cfg = {}) {
  cfg.validate();
  validate(curve, cfg);
  double area = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double next = i + 1 < curve.size() ? curve[i + 1].t : cfg.budget;
    area += curve[i].nauc * (time_transform(next, cfg) - time_transform(curve[i].t, cfg));
  }
  return area;
}

}  // namespace zap
