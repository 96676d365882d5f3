#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "phmadv/anomaly.hpp"
#include "phmadv/attacks.hpp"
#include "phmadv/data.hpp"
#include "phmadv/metrics.hpp"
#include "phmadv/normality_model.hpp"
#include "phmadv/report.hpp"
#include "phmadv/rul_model.hpp"

namespace phmadv {

/// Epsilon-sweep campaign settings. Every test window is attacked on its own
/// (batched windows are independent); epsilon 0 rows skip the attack code.
struct SweepOptions {
  AttackKind attack = AttackKind::Bim;
  std::vector<double> epsilons;
  std::size_t iterations = 10;
  /// Absolute BIM step, capped at eta per epsilon. Default eta / iterations.
  std::optional<double> alpha;
  std::size_t batch_size = 32;
  /// Sample indices whose perturbed windows are kept in the outcome.
  std::vector<std::size_t> keep_examples;

  void validate() const;
};

/// Attack settings for one epsilon of a sweep.
AttackConfig attack_config_for(const SweepOptions& options, double epsilon);

struct EpsilonOutcome {
  double epsilon = 0.0;
  /// Anomaly scores (detection) or RUL predictions (prognostics), per sample.
  std::vector<double> values;
  std::vector<std::pair<std::size_t, Tensor>> kept_windows;
};

struct SweepResult {
  RobustnessReport report;
  std::vector<EpsilonOutcome> outcomes;
};

/// Pairs scores with sample statuses (abnormal = positive).
ScoredSet scored_set(std::span<const double> scores, std::span<const WindowedSample> samples);

/// Clean RUL predictions, evaluated in fixed-size batches in order.
std::vector<double> predict_rul(const RulModel& model, std::span<const WindowedSample> samples,
                                std::size_t batch_size = 32);

std::vector<double> rul_targets(std::span<const WindowedSample> samples);

SweepResult sweep_detection(const NormalityModel& model, const ResidualStats& stats,
                            std::span<const WindowedSample> samples, const SweepOptions& options);

SweepResult sweep_rul(const RulModel& model, std::span<const WindowedSample> samples,
                      const SweepOptions& options);

}  // namespace phmadv
