#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "phmadv/data.hpp"
#include "phmadv/normality_model.hpp"
#include "phmadv/tape.hpp"

namespace phmadv {

/// Normal-data residual distribution behind the Mahalanobis scorer.
struct ResidualStats {
  Tensor mean;        // [n]
  Tensor covariance;  // [n, n], sample covariance (N-1)
  Tensor precision;   // [n, n], inverse of covariance + lambda * I
  double lambda = 0.0;

  std::size_t width() const { return mean.size(); }
};

/// actual - prediction, for a [T,n] window and [n] actual; or batched
/// [B,T,n] windows with [B,n] actuals.
ad::Var residual(const NormalityModel& model, ad::Var window, ad::Var actual);
Tensor residual(const NormalityModel& model, const Tensor& window, const Tensor& actual);

/// 1e-6 * trace(covariance) / n.
double default_regularizer(const Tensor& covariance);

/// Needs at least n+1 residual vectors. When lambda is not given the default
/// regularizer is used. Throws RegularizationError if covariance + lambda*I is
/// not positive definite.
ResidualStats fit_residual_stats(std::span<const Tensor> residuals,
                                 std::optional<double> lambda = std::nullopt);

/// sqrt((r - mean)^T precision (r - mean)). [n] -> scalar, [B,n] -> [B].
/// Differentiable through r; the gradient at r == mean is zero.
ad::Var mahalanobis_score(const ResidualStats& stats, ad::Var r);
double mahalanobis_score(const ResidualStats& stats, const Tensor& r);

/// Anomaly scores o_t of a batch: windows [B,T,n], actuals [B,n] -> [B].
ad::Var anomaly_scores(const NormalityModel& model, const ResidualStats& stats, ad::Var windows,
                       ad::Var actuals);

/// Clean scores of every sample, evaluated in fixed-size batches in order.
std::vector<double> score_samples(const NormalityModel& model, const ResidualStats& stats,
                                  std::span<const WindowedSample> samples,
                                  std::size_t batch_size = 64);

/// Residuals of every sample, batched like score_samples.
std::vector<Tensor> residual_samples(const NormalityModel& model,
                                     std::span<const WindowedSample> samples,
                                     std::size_t batch_size = 64);

struct AnomalyDecision {
  double score = 0.0;
  double threshold = 0.0;
  Status status = Status::Normal;
};

/// Abnormal iff score > threshold.
AnomalyDecision decide(double score, double threshold);

/// Linear-interpolated q-quantile of calibration scores.
double quantile_threshold(std::vector<double> scores, double q = 0.99);

}  // namespace phmadv
