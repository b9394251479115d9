#pragma once

// Forecast-deviation scoring and point-adjusted evaluation.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gta/error.hpp"
#include "gta/numerics/ops.hpp"

namespace gta::detector {

using Labels = std::vector<std::uint8_t>;

/// L = (1/M) Σ_t ‖Y(t) − Ŷ(t)‖²: divided by the sensor count only, summed over steps.
/// Both tensors are [M × n] (a rank-1 [M] is treated as n = 1).
inline Tensor mse_loss(const Tensor& predicted, const Tensor& observed) {
  if (predicted.shape() != observed.shape()) {
    throw ShapeError("mse_loss: predicted " + shape_str(predicted.shape()) + " vs observed " +
                     shape_str(observed.shape()));
  }
  const double sensors = static_cast<double>(predicted.dim(0));
  return scale(sum_squares(sub(predicted, observed)), 1.0 / sensors);
}

/// ŷ(t) = Σ_i (Y_i(t) − Ŷ_i(t))².
inline double anomaly_score(std::span<const double> predicted, std::span<const double> observed) {
  if (predicted.size() != observed.size()) throw ShapeError("anomaly_score: vector lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = observed[i] - predicted[i];
    s += d * d;
  }
  return s;
}

inline void require_binary(const Labels& labels, const char* what) {
  for (auto v : labels) {
    if (v > 1) throw DataError(std::string(what) + " must be binary (0/1)");
  }
}

/// Any hit inside a ground-truth segment marks the whole segment detected.
inline Labels point_adjust(const Labels& truth, const Labels& raw) {
  if (truth.size() != raw.size()) throw DataError("point_adjust: label series lengths differ");
  Labels adjusted = raw;
  std::size_t t = 0;
  while (t < truth.size()) {
    if (!truth[t]) {
      ++t;
      continue;
    }
    std::size_t end = t;
    bool hit = false;
    for (; end < truth.size() && truth[end]; ++end) hit = hit || raw[end];
    if (hit) std::fill(adjusted.begin() + static_cast<std::ptrdiff_t>(t), adjusted.begin() + static_cast<std::ptrdiff_t>(end), 1);
    t = end;
  }
  return adjusted;
}

enum class Operating { kBestF1, kBestRecall, kFixed };

inline std::string to_string(Operating op) {
  switch (op) {
    case Operating::kBestF1: return "best_f1";
    case Operating::kBestRecall: return "best_recall";
    case Operating::kFixed: return "fixed";
  }
  return "";
}

struct MetricsReport {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  double threshold = 0.0;
  Operating variant = Operating::kFixed;
};

/// Precision / recall / F1 from counts. Zero-denominator ratios are defined as 0.
inline MetricsReport metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  MetricsReport r{tp, fp, fn, tn};
  r.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  r.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  // Same value as 2PR/(P+R), but a single division keeps equal F1s bitwise equal for the sweep tie-breaks.
  r.f1 = tp == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  return r;
}

/// Confusion counts of `preds` against `truth`, point-adjusted first unless `adjust` is false.
inline MetricsReport compute_metrics(const Labels& truth, const Labels& preds, bool adjust = true) {
  if (truth.size() != preds.size()) throw DataError("compute_metrics: label series lengths differ");
  require_binary(truth, "ground-truth labels");
  require_binary(preds, "predicted labels");
  const Labels& p = adjust ? point_adjust(truth, preds) : preds;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (truth[t] && p[t]) ++tp;
    else if (!truth[t] && p[t]) ++fp;
    else if (truth[t] && !p[t]) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

/// ŷ(t) = 1 iff score(t) > threshold.
inline Labels apply_threshold(std::span<const double> scores, double threshold) {
  Labels out(scores.size());
  for (std::size_t t = 0; t < scores.size(); ++t) out[t] = scores[t] > threshold ? 1 : 0;
  return out;
}

struct ThresholdSweep {
  std::vector<double> thresholds;  // −∞ sentinel, then sorted distinct scores
  std::vector<MetricsReport> rows;
  MetricsReport best_f1;      // **
  MetricsReport best_recall;  // *
};

/// Evaluates every distinct score as a cut (plus −∞) under point-adjust.
/// best_f1 ties prefer higher recall, then the lower threshold; best_recall
/// ties prefer higher F1, then the higher threshold.
inline ThresholdSweep threshold_sweep(std::span<const double> scores, const Labels& truth) {
  if (scores.empty()) throw DataError("threshold_sweep: empty score series");
  if (scores.size() != truth.size()) throw DataError("threshold_sweep: scores and labels differ in length");
  require_binary(truth, "ground-truth labels");
  ThresholdSweep sweep;
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  sweep.thresholds.push_back(-std::numeric_limits<double>::infinity());
  sweep.thresholds.insert(sweep.thresholds.end(), sorted.begin(), sorted.end());
  for (double th : sweep.thresholds) {
    auto row = compute_metrics(truth, apply_threshold(scores, th), true);
    row.threshold = th;
    sweep.rows.push_back(row);
  }
  std::size_t bf = 0, br = 0;
  for (std::size_t k = 1; k < sweep.rows.size(); ++k) {
    const auto& r = sweep.rows[k];
    const auto& f = sweep.rows[bf];
    if (r.f1 > f.f1 || (r.f1 == f.f1 && r.recall > f.recall)) bf = k;
    const auto& c = sweep.rows[br];
    if (r.recall > c.recall || (r.recall == c.recall && r.f1 >= c.f1)) br = k;
  }
  sweep.best_f1 = sweep.rows[bf];
  sweep.best_f1.variant = Operating::kBestF1;
  sweep.best_recall = sweep.rows[br];
  sweep.best_recall.variant = Operating::kBestRecall;
  return sweep;
}

}  // namespace gta::detector
