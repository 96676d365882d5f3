#include "phmadv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "phmadv/error.hpp"

namespace phmadv {
namespace {

// Cumulative (fp, tp) counts after each group of tied scores, by descending score.
struct ThresholdStep {
  double threshold;
  double fp;
  double tp;
};

std::vector<ThresholdStep> threshold_steps(const ScoredSet& set) {
  if (set.scores.size() != set.positive.size()) {
    throw ContractError("scored set has " + std::to_string(set.scores.size()) + " scores but " +
                        std::to_string(set.positive.size()) + " labels");
  }
  if (set.scores.empty()) throw UndefinedMetricError("scored set is empty");
  for (double v : set.scores) {
    if (!std::isfinite(v)) throw NumericalError("scored set contains a non-finite score");
  }
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return set.scores[a] > set.scores[b]; });
  std::vector<ThresholdStep> steps;
  double fp = 0.0;
  double tp = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = set.scores[order[i]];
    while (i < order.size() && set.scores[order[i]] == s) {
      (set.positive[order[i]] ? tp : fp) += 1.0;
      ++i;
    }
    steps.push_back({s, fp, tp});
  }
  return steps;
}

}  // namespace

std::size_t ScoredSet::positives() const {
  return static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
}

double roc_auc(const ScoredSet& set) {
  const auto steps = threshold_steps(set);
  const double p = steps.back().tp;
  const double n = steps.back().fp;
  if (p == 0.0 || n == 0.0) {
    throw UndefinedMetricError("ROC AUC needs both normal and abnormal samples");
  }
  // Twice the area in count units; every term is an integer.
  double twice_area = 0.0;
  double prev_fp = 0.0;
  double prev_tp = 0.0;
  for (const ThresholdStep& s : steps) {
    twice_area += (s.fp - prev_fp) * (s.tp + prev_tp);
    prev_fp = s.fp;
    prev_tp = s.tp;
  }
  return twice_area / (2.0 * p * n);
}

double pr_auc(const ScoredSet& set) {
  const auto steps = threshold_steps(set);
  const double p = steps.back().tp;
  if (p == 0.0) throw UndefinedMetricError("PR AUC needs at least one abnormal sample");
  double area = 0.0;
  double prev_tp = 0.0;
  for (const ThresholdStep& s : steps) {
    if (s.tp > prev_tp) area += (s.tp - prev_tp) / p * (s.tp / (s.tp + s.fp));
    prev_tp = s.tp;
  }
  return area;
}

std::vector<CurvePoint> roc_curve(const ScoredSet& set) {
  const auto steps = threshold_steps(set);
  const double p = steps.back().tp;
  const double n = steps.back().fp;
  if (p == 0.0 || n == 0.0) {
    throw UndefinedMetricError("ROC curve needs both normal and abnormal samples");
  }
  std::vector<CurvePoint> curve;
  curve.reserve(steps.size() + 1);
  curve.push_back({steps.front().threshold, 0.0, 0.0});
  for (const ThresholdStep& s : steps) curve.push_back({s.threshold, s.fp / n, s.tp / p});
  return curve;
}

std::vector<CurvePoint> pr_curve(const ScoredSet& set) {
  const auto steps = threshold_steps(set);
  const double p = steps.back().tp;
  if (p == 0.0) throw UndefinedMetricError("PR curve needs at least one abnormal sample");
  std::vector<CurvePoint> curve;
  curve.reserve(steps.size());
  for (const ThresholdStep& s : steps) curve.push_back({s.threshold, s.tp / p, s.tp / (s.tp + s.fp)});
  return curve;
}

double mse(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.size() != truths.size()) {
    throw ContractError("mse: " + std::to_string(predictions.size()) + " predictions vs " +
                        std::to_string(truths.size()) + " truths");
  }
  if (predictions.empty()) throw ContractError("mse of an empty list");
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - truths[i];
    total += d * d;
  }
  return total / static_cast<double>(predictions.size());
}

}  // namespace phmadv
