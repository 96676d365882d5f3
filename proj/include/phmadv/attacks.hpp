#pragma once

// White-box, non-targeted, inference-time gradient-sign attacks.
//
// The adversary maximizes an adversarial loss L(x') subject to
// max|x' - x| <= eta. FGSM takes one step of size eta along sign(grad L);
// BIM iterates
//
//   x'_0 = x,   x'_{i+1} = Clip_{x,eta}(x'_i + alpha * sign(grad L(x'_i)))
//
// with Clip the element-wise projection onto [x - eta, x + eta]. There is no
// value-range clamp: inputs are standardized sensor signals, not pixels.
// sign(0) = 0, so coordinates with zero gradient are left in place.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "phmadv/anomaly.hpp"
#include "phmadv/data.hpp"
#include "phmadv/normality_model.hpp"
#include "phmadv/rul_model.hpp"
#include "phmadv/tape.hpp"

namespace phmadv {

struct AttackConfig {
  double epsilon = 0.0;  // budget in standardized units
  double eta = 0.0;      // clip radius; equal to epsilon
  double alpha = 0.0;    // per-step size
  std::size_t iterations = 1;

  /// eta = epsilon, alpha = eta / iterations.
  static AttackConfig from_budget(double epsilon, std::size_t iterations = 10);

  /// eta >= 0, eta == epsilon, 0 < alpha <= eta and iterations >= 1. A zero
  /// budget admits alpha == 0 since every step is clipped back to x.
  void validate() const;
};

enum class AttackKind { Fgsm, Bim };

std::string to_string(AttackKind kind);
AttackKind parse_attack_kind(const std::string& text);

enum class LossKind { AnomalyScore, RegressionError };
enum class Direction { Maximize, Minimize };

/// Adversarial objective over an input tensor. `build` records the scalar loss
/// for an input variable on that variable's tape. Objectives built by the
/// factories below reference the model and stats they were made from, which
/// must outlive them.
struct AdversarialLoss {
  LossKind kind = LossKind::AnomalyScore;
  Direction direction = Direction::Maximize;
  std::vector<Status> labels;       // detection targets
  std::vector<double> rul_targets;  // regression targets
  std::function<ad::Var(ad::Var)> build;

  double evaluate(const Tensor& x) const;
};

/// +score for normal-labeled inputs, -score for abnormal-labeled inputs.
ad::Var adversarial_loss_detection(const NormalityModel& model, const ResidualStats& stats,
                                   ad::Var window, const Tensor& actual, Status true_status);

/// (prediction - true_rul)^2.
ad::Var adversarial_loss_regression(const RulModel& model, ad::Var window, double true_rul);

/// Objective for one [T,n] window (one label) or a batch of [B,T,n] windows
/// (B labels, [B,n] actuals); the batch loss is the sum of per-window losses.
AdversarialLoss detection_objective(const NormalityModel& model, const ResidualStats& stats,
                                    Tensor actual, std::vector<Status> labels);

/// Objective for one [35,21] window (one target) or a [B,35,21] batch.
AdversarialLoss regression_objective(const RulModel& model, std::vector<double> true_rul);

struct AdversarialExample {
  Tensor original;
  Tensor perturbed;
  double loss_before = 0.0;
  double loss_after = 0.0;
  AttackConfig config;
};

/// Element-wise sign with sign(0) = 0.
Tensor sign_of(const Tensor& g);

/// min(x + eta, max(x - eta, candidate)) element-wise.
Tensor clip_to_ball(const Tensor& x, const Tensor& candidate, double eta);

/// x' = x + eta * sign(grad L(x)) (descending for Direction::Minimize).
AdversarialExample fgsm(const AdversarialLoss& loss, const Tensor& x, const AttackConfig& config);

/// BIM recursion for config.iterations steps. Throws NumericalError naming the
/// step when a gradient is not finite.
AdversarialExample bim(const AdversarialLoss& loss, const Tensor& x, const AttackConfig& config);

AdversarialExample run_attack(AttackKind kind, const AdversarialLoss& loss, const Tensor& x,
                              const AttackConfig& config);

}  // namespace phmadv
