#include "phmadv/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "phmadv/error.hpp"

namespace phmadv {
namespace {

struct LossAndGradient {
  double loss;
  Tensor gradient;
};

LossAndGradient loss_gradient(const AdversarialLoss& loss, const Tensor& x) {
  ad::Tape tape;
  const ad::Var input = tape.leaf(x);
  const ad::Var out = loss.build(input);
  return {out.value().item(), tape.gradient(out, input)};
}

double direction_sign(Direction d) { return d == Direction::Maximize ? 1.0 : -1.0; }

Tensor sign_vector(const std::vector<Status>& labels) {
  Tensor signs(Shape{labels.size()});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    signs[i] = labels[i] == Status::Normal ? 1.0 : -1.0;
  }
  return signs;
}

}  // namespace

AttackConfig AttackConfig::from_budget(double epsilon, std::size_t iterations) {
  if (iterations == 0) throw ContractError("attack needs at least one iteration");
  AttackConfig c;
  c.epsilon = epsilon;
  c.eta = epsilon;
  c.alpha = epsilon / static_cast<double>(iterations);
  c.iterations = iterations;
  return c;
}

void AttackConfig::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ContractError("clip radius must be finite and >= 0");
  if (eta != epsilon) throw ContractError("clip radius must equal the budget epsilon");
  if (iterations < 1) throw ContractError("attack needs at least one iteration");
  if (!(alpha >= 0.0) || alpha > eta) throw ContractError("step size must satisfy 0 < alpha <= eta");
  if (eta > 0.0 && alpha == 0.0) throw ContractError("step size must be positive");
}

std::string to_string(AttackKind kind) { return kind == AttackKind::Fgsm ? "fgsm" : "bim"; }

AttackKind parse_attack_kind(const std::string& text) {
  if (text == "fgsm") return AttackKind::Fgsm;
  if (text == "bim") return AttackKind::Bim;
  throw ContractError("unknown attack '" + text + "' (expected fgsm or bim)");
}

double AdversarialLoss::evaluate(const Tensor& x) const {
  ad::Tape tape;
  return build(tape.constant(x)).value().item();
}

ad::Var adversarial_loss_detection(const NormalityModel& model, const ResidualStats& stats,
                                   ad::Var window, const Tensor& actual, Status true_status) {
  const ad::Var score =
      mahalanobis_score(stats, residual(model, window, window.tape().constant(actual)));
  return true_status == Status::Normal ? score : ad::scale(score, -1.0);
}

ad::Var adversarial_loss_regression(const RulModel& model, ad::Var window, double true_rul) {
  const ad::Var pred = cnn_predict(model, window);
  return ad::squared_error(pred, window.tape().constant(Tensor::scalar(true_rul)));
}

AdversarialLoss detection_objective(const NormalityModel& model, const ResidualStats& stats,
                                    Tensor actual, std::vector<Status> labels) {
  AdversarialLoss loss;
  loss.kind = LossKind::AnomalyScore;
  loss.labels = labels;
  if (actual.rank() == 1) {
    if (labels.size() != 1) throw ContractError("single-window objective needs one label");
    const Status status = labels.front();
    loss.build = [&model, &stats, actual = std::move(actual), status](ad::Var x) {
      return adversarial_loss_detection(model, stats, x, actual, status);
    };
    return loss;
  }
  if (actual.rank() != 2 || actual.dim(0) != labels.size()) {
    throw ShapeError("batched objective needs [B,n] actuals and B labels");
  }
  loss.build = [&model, &stats, actual = std::move(actual),
                signs = sign_vector(labels)](ad::Var x) {
    ad::Tape& tape = x.tape();
    const ad::Var scores = anomaly_scores(model, stats, x, tape.constant(actual));
    return ad::sum(ad::mul(scores, tape.constant(signs)));
  };
  return loss;
}

AdversarialLoss regression_objective(const RulModel& model, std::vector<double> true_rul) {
  AdversarialLoss loss;
  loss.kind = LossKind::RegressionError;
  loss.rul_targets = true_rul;
  if (true_rul.empty()) throw ContractError("regression objective needs a target");
  loss.build = [&model, targets = std::move(true_rul)](ad::Var x) {
    if (x.shape().size() == 2) {
      if (targets.size() != 1) throw ContractError("single-window objective needs one target");
      return adversarial_loss_regression(model, x, targets.front());
    }
    if (x.shape().empty() || x.shape()[0] != targets.size()) {
      throw ShapeError("batched regression objective: " + shape_string(x.shape()) + " for " +
                       std::to_string(targets.size()) + " targets");
    }
    const ad::Var pred = cnn_predict_batch(model, x);
    return ad::squared_error(pred, x.tape().constant(Tensor::vector(targets)));
  };
  return loss;
}

Tensor sign_of(const Tensor& g) {
  Tensor s(g.shape());
  for (std::size_t i = 0; i < g.size(); ++i) s[i] = g[i] > 0.0 ? 1.0 : g[i] < 0.0 ? -1.0 : 0.0;
  return s;
}

Tensor clip_to_ball(const Tensor& x, const Tensor& candidate, double eta) {
  if (x.shape() != candidate.shape()) {
    throw ShapeError("clip: " + shape_string(x.shape()) + " vs " +
                     shape_string(candidate.shape()));
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::min(x[i] + eta, std::max(x[i] - eta, candidate[i]));
  }
  return out;
}

AdversarialExample fgsm(const AdversarialLoss& loss, const Tensor& x, const AttackConfig& config) {
  config.validate();
  const LossAndGradient lg = loss_gradient(loss, x);
  if (!lg.gradient.all_finite()) {
    throw NumericalError("fgsm: non-finite gradient at step 1");
  }
  const Tensor s = sign_of(lg.gradient);
  const double dir = direction_sign(loss.direction);
  Tensor perturbed(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) perturbed[i] = x[i] + config.eta * (dir * s[i]);
  AdversarialExample ex{x, std::move(perturbed), lg.loss, 0.0, config};
  ex.loss_after = loss.evaluate(ex.perturbed);
  return ex;
}

AdversarialExample bim(const AdversarialLoss& loss, const Tensor& x, const AttackConfig& config) {
  config.validate();
  if (!x.all_finite()) throw NumericalError("bim: input contains non-finite values");
  const double dir = direction_sign(loss.direction);
  Tensor current = x;
  double before = 0.0;
  Tensor step(x.shape());
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const LossAndGradient lg = loss_gradient(loss, current);
    if (it == 0) before = lg.loss;
    if (!lg.gradient.all_finite()) {
      throw NumericalError("bim: non-finite gradient at step " + std::to_string(it + 1));
    }
    const Tensor s = sign_of(lg.gradient);
    for (std::size_t i = 0; i < x.size(); ++i) step[i] = current[i] + config.alpha * (dir * s[i]);
    current = clip_to_ball(x, step, config.eta);
  }
  AdversarialExample ex{x, std::move(current), before, 0.0, config};
  ex.loss_after = loss.evaluate(ex.perturbed);
  return ex;
}

AdversarialExample run_attack(AttackKind kind, const AdversarialLoss& loss, const Tensor& x,
                              const AttackConfig& config) {
  return kind == AttackKind::Fgsm ? fgsm(loss, x, config) : bim(loss, x, config);
}

}  // namespace phmadv
