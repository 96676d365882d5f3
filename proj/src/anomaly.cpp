#include "phmadv/anomaly.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "phmadv/error.hpp"
#include "phmadv/train.hpp"

namespace phmadv {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Tensor from_eigen(const RowMat& m) {
  const auto rows = static_cast<std::size_t>(m.rows());
  const auto cols = static_cast<std::size_t>(m.cols());
  return Tensor(Shape{rows, cols}, std::vector<double>(m.data(), m.data() + m.size()));
}

}  // namespace

ad::Var residual(const NormalityModel& model, ad::Var window, ad::Var actual) {
  if (window.shape().size() == 2) {
    if (actual.shape() != Shape{model.config().input_width}) {
      throw ShapeError("residual: actual " + shape_string(actual.shape()) +
                       " does not match model width " +
                       std::to_string(model.config().input_width));
    }
    return ad::sub(actual, lstm_predict(model, window));
  }
  const ad::Var pred = lstm_predict_batch(model, window);
  if (actual.shape() != pred.shape()) {
    throw ShapeError("residual: actual " + shape_string(actual.shape()) + " vs prediction " +
                     shape_string(pred.shape()));
  }
  return ad::sub(actual, pred);
}

Tensor residual(const NormalityModel& model, const Tensor& window, const Tensor& actual) {
  ad::Tape tape;
  return residual(model, tape.constant(window), tape.constant(actual)).value();
}

double default_regularizer(const Tensor& covariance) {
  const std::size_t n = covariance.dim(0);
  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) trace += covariance[i * n + i];
  return 1e-6 * trace / static_cast<double>(n);
}

ResidualStats fit_residual_stats(std::span<const Tensor> residuals, std::optional<double> lambda) {
  if (residuals.empty()) throw ContractError("no residuals to fit");
  const std::size_t n = residuals.front().size();
  if (residuals.size() < n + 1) {
    throw ContractError("need at least " + std::to_string(n + 1) + " residuals, got " +
                        std::to_string(residuals.size()));
  }
  if (lambda && !(*lambda >= 0.0)) throw ContractError("regularizer must be >= 0");

  // Mean shifted by the first residual: identical residuals give their value
  // back exactly and a covariance of exactly zero.
  ResidualStats stats;
  const Tensor& origin = residuals.front();
  Tensor shift(Shape{n});
  for (const Tensor& r : residuals) {
    if (r.size() != n) throw ShapeError("residuals differ in width");
    for (std::size_t i = 0; i < n; ++i) shift[i] += r[i] - origin[i];
  }
  const double count = static_cast<double>(residuals.size());
  stats.mean = Tensor(Shape{n});
  for (std::size_t i = 0; i < n; ++i) stats.mean[i] = origin[i] + shift[i] / count;

  RowMat cov = RowMat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Eigen::VectorXd d(static_cast<Eigen::Index>(n));
  for (const Tensor& r : residuals) {
    for (std::size_t i = 0; i < n; ++i) d[static_cast<Eigen::Index>(i)] = r[i] - stats.mean[i];
    cov.noalias() += d * d.transpose();
  }
  cov /= count - 1.0;
  // Symmetrize against rounding in the rank-1 accumulation.
  cov = (0.5 * (cov + cov.transpose())).eval();
  stats.covariance = from_eigen(cov);
  stats.lambda = lambda ? *lambda : default_regularizer(stats.covariance);

  RowMat reg = cov;
  reg.diagonal().array() += stats.lambda;
  Eigen::LLT<RowMat> llt(reg);
  const double max_diag = reg.diagonal().cwiseAbs().maxCoeff();
  bool ok = llt.info() == Eigen::Success && max_diag > 0.0;
  if (ok) {
    const Eigen::VectorXd l = RowMat(llt.matrixL()).diagonal();
    // A pivot this small relative to the largest variance means numerically singular.
    ok = l.minCoeff() * l.minCoeff() > 1e-13 * max_diag;
  }
  if (!ok) {
    throw RegularizationError(
        "residual covariance is singular; fit with a positive regularizer (lambda = " +
        format_double(stats.lambda) + ")");
  }
  RowMat precision = llt.solve(RowMat::Identity(reg.rows(), reg.cols()));
  precision = (0.5 * (precision + precision.transpose())).eval();
  stats.precision = from_eigen(precision);
  return stats;
}

ad::Var mahalanobis_score(const ResidualStats& stats, ad::Var r) {
  ad::Tape& tape = r.tape();
  const std::size_t n = stats.width();
  const Shape& s = r.shape();
  const bool single = s.size() == 1;
  if ((single && s[0] != n) || (!single && (s.size() != 2 || s[1] != n))) {
    throw ShapeError("mahalanobis_score: residual " + shape_string(s) + " does not match width " +
                     std::to_string(n));
  }
  Tensor neg_mean = stats.mean;
  for (double& v : neg_mean.data()) v = -v;
  const ad::Var rows = single ? ad::reshape(r, Shape{1, n}) : r;
  const ad::Var centered = ad::bias_add(rows, tape.constant(std::move(neg_mean)));
  const ad::Var weighted = ad::matmul(centered, tape.constant(stats.precision));
  const ad::Var quad = ad::sum_last_axis(ad::mul(weighted, centered));
  // relu absorbs tiny negative rounding of the quadratic form near the mean.
  const ad::Var score = ad::sqrt(ad::relu(quad));
  return single ? ad::reshape(score, Shape{}) : score;
}

double mahalanobis_score(const ResidualStats& stats, const Tensor& r) {
  ad::Tape tape;
  return mahalanobis_score(stats, tape.constant(r)).value().item();
}

ad::Var anomaly_scores(const NormalityModel& model, const ResidualStats& stats, ad::Var windows,
                       ad::Var actuals) {
  return mahalanobis_score(stats, residual(model, windows, actuals));
}

std::vector<double> score_samples(const NormalityModel& model, const ResidualStats& stats,
                                  std::span<const WindowedSample> samples,
                                  std::size_t batch_size) {
  if (batch_size == 0) throw ContractError("batch size must be positive");
  std::vector<double> scores;
  scores.reserve(samples.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, samples.size() - start);
    idx.resize(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = start + i;
    ad::Tape tape;
    const ad::Var out = anomaly_scores(model, stats, tape.constant(stack_windows(samples, idx)),
                                       tape.constant(stack_targets(samples, idx)));
    const auto values = out.value().data();
    scores.insert(scores.end(), values.begin(), values.end());
  }
  return scores;
}

std::vector<Tensor> residual_samples(const NormalityModel& model,
                                     std::span<const WindowedSample> samples,
                                     std::size_t batch_size) {
  if (batch_size == 0) throw ContractError("batch size must be positive");
  std::vector<Tensor> out;
  out.reserve(samples.size());
  const std::size_t n = model.config().input_width;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, samples.size() - start);
    idx.resize(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = start + i;
    ad::Tape tape;
    const ad::Var r = residual(model, tape.constant(stack_windows(samples, idx)),
                               tape.constant(stack_targets(samples, idx)));
    const Tensor& v = r.value();
    for (std::size_t i = 0; i < count; ++i) {
      out.emplace_back(Shape{n}, std::vector<double>(v.data().begin() + i * n,
                                                     v.data().begin() + (i + 1) * n));
    }
  }
  return out;
}

AnomalyDecision decide(double score, double threshold) {
  return AnomalyDecision{score, threshold, score > threshold ? Status::Abnormal : Status::Normal};
}

double quantile_threshold(std::vector<double> scores, double q) {
  if (scores.empty()) throw ContractError("no calibration scores");
  if (!(q >= 0.0 && q <= 1.0)) throw ContractError("quantile must lie in [0, 1]");
  std::sort(scores.begin(), scores.end());
  const double pos = q * static_cast<double>(scores.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, scores.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return scores[lo] + frac * (scores[hi] - scores[lo]);
}

}  // namespace phmadv
