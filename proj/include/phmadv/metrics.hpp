#pragma once

#include <span>
#include <vector>

namespace phmadv {

/// Detection scores with ground truth; positive = abnormal.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<bool> positive;

  std::size_t size() const { return scores.size(); }
  std::size_t positives() const;
  std::size_t negatives() const { return size() - positives(); }
};

struct CurvePoint {
  double threshold = 0.0;
  double x = 0.0;  // FPR for ROC, recall for PRC
  double y = 0.0;  // TPR for ROC, precision for PRC
};

/// Trapezoidal area under the ROC. Equal scores form one threshold step, so
/// the result equals P(s_pos > s_neg) + P(s_pos == s_neg) / 2.
/// Throws UndefinedMetricError unless both classes are present.
double roc_auc(const ScoredSet& set);

/// Step-interpolated area under precision-recall: sum over distinct
/// thresholds (descending) of (R_k - R_{k-1}) * P_k.
/// Throws UndefinedMetricError without positives.
double pr_auc(const ScoredSet& set);

/// ROC points from (0,0) to (1,1), one per distinct threshold.
std::vector<CurvePoint> roc_curve(const ScoredSet& set);

/// PR points, one per distinct threshold, in increasing recall.
std::vector<CurvePoint> pr_curve(const ScoredSet& set);

/// Mean of squared differences. Throws ContractError on length mismatch or
/// empty input.
double mse(std::span<const double> predictions, std::span<const double> truths);

}  // namespace phmadv
