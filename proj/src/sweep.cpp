#include "phmadv/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "phmadv/error.hpp"
#include "phmadv/parameters.hpp"
#include "phmadv/train.hpp"

namespace phmadv {
namespace {

std::string provenance(const WindowedSample& s) {
  return "run " + std::to_string(s.run_id) + ", window ending at row " +
         std::to_string(s.end_index);
}

std::vector<std::size_t> batch_indices(std::size_t start, std::size_t count) {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = start + i;
  return idx;
}

// Builds the objective for the windows at `idx`.
template <typename MakeObjective>
AdversarialExample attack_batch(const SweepOptions& options, const AttackConfig& cfg,
                                std::span<const WindowedSample> samples,
                                const std::vector<std::size_t>& idx, MakeObjective make) {
  const Tensor x = stack_windows(samples, idx);
  try {
    return run_attack(options.attack, make(idx), x, cfg);
  } catch (const NumericalError& batch_error) {
    // Re-run one window at a time to name the offending sample.
    for (std::size_t i : idx) {
      const std::vector<std::size_t> one{i};
      try {
        run_attack(options.attack, make(one), stack_windows(samples, one), cfg);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (" + provenance(samples[i]) + ")");
      }
    }
    throw;
  }
}

void keep_windows(const SweepOptions& options, const std::vector<std::size_t>& idx,
                  const Tensor& perturbed, EpsilonOutcome& outcome) {
  if (options.keep_examples.empty()) return;
  const std::size_t per = perturbed.size() / idx.size();
  const Shape window_shape(perturbed.shape().begin() + 1, perturbed.shape().end());
  for (std::size_t b = 0; b < idx.size(); ++b) {
    if (std::find(options.keep_examples.begin(), options.keep_examples.end(), idx[b]) ==
        options.keep_examples.end()) {
      continue;
    }
    const auto first = perturbed.data().begin() + static_cast<std::ptrdiff_t>(b * per);
    outcome.kept_windows.emplace_back(
        idx[b], Tensor(window_shape, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(per))));
  }
}

void check_finite(const EpsilonOutcome& outcome, std::span<const WindowedSample> samples,
                  const char* what) {
  for (std::size_t i = 0; i < outcome.values.size(); ++i) {
    if (!std::isfinite(outcome.values[i])) {
      throw NumericalError(std::string("non-finite ") + what + " at epsilon " +
                           format_double(outcome.epsilon) + " (" + provenance(samples[i]) + ")");
    }
  }
}

nlohmann::json sweep_metadata(const SweepOptions& options, const ParameterList& params,
                              std::size_t sample_count) {
  nlohmann::json m;
  m["attack"] = to_string(options.attack);
  m["iterations"] = options.attack == AttackKind::Fgsm ? 1 : options.iterations;
  m["alpha"] = options.alpha ? nlohmann::json(*options.alpha) : nlohmann::json("eta/iterations");
  m["norm"] = "inf";
  m["clip_radius"] = "eta = epsilon";
  m["model_hash"] = hash_hex(parameter_hash(params));
  m["evaluation_unit"] = "per-window";
  m["sample_count"] = sample_count;
  m["batch_size"] = options.batch_size;
  return m;
}

}  // namespace

void SweepOptions::validate() const {
  if (epsilons.empty()) throw ContractError("epsilon list is empty");
  if (epsilons.front() != 0.0) throw ContractError("epsilon list must start at 0");
  for (std::size_t i = 1; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > epsilons[i - 1])) throw ContractError("epsilons must increase strictly");
  }
  if (iterations < 1) throw ContractError("attack needs at least one iteration");
  if (alpha && !(*alpha > 0.0)) throw ContractError("alpha must be positive");
  if (batch_size < 1) throw ContractError("batch size must be positive");
}

AttackConfig attack_config_for(const SweepOptions& options, double epsilon) {
  if (options.attack == AttackKind::Fgsm) {
    AttackConfig c = AttackConfig::from_budget(epsilon, 1);
    return c;
  }
  AttackConfig c = AttackConfig::from_budget(epsilon, options.iterations);
  if (options.alpha) c.alpha = std::min(*options.alpha, c.eta);
  return c;
}

ScoredSet scored_set(std::span<const double> scores, std::span<const WindowedSample> samples) {
  if (scores.size() != samples.size()) throw ContractError("scores and samples differ in count");
  ScoredSet set;
  set.scores.assign(scores.begin(), scores.end());
  set.positive.reserve(samples.size());
  for (const WindowedSample& s : samples) set.positive.push_back(s.status == Status::Abnormal);
  return set;
}

std::vector<double> predict_rul(const RulModel& model, std::span<const WindowedSample> samples,
                                std::size_t batch_size) {
  if (batch_size == 0) throw ContractError("batch size must be positive");
  std::vector<double> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const auto idx = batch_indices(start, std::min(batch_size, samples.size() - start));
    ad::Tape tape;
    const ad::Var pred = cnn_predict_batch(model, tape.constant(stack_windows(samples, idx)));
    const auto v = pred.value().data();
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

std::vector<double> rul_targets(std::span<const WindowedSample> samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const WindowedSample& s : samples) out.push_back(s.target.item());
  return out;
}

SweepResult sweep_detection(const NormalityModel& model, const ResidualStats& stats,
                            std::span<const WindowedSample> samples, const SweepOptions& options) {
  options.validate();
  SweepResult result;
  result.report.task = Task::Detection;
  result.report.metadata = sweep_metadata(options, model.parameters(), samples.size());

  for (double eps : options.epsilons) {
    EpsilonOutcome outcome;
    outcome.epsilon = eps;
    if (eps == 0.0) {
      outcome.values = score_samples(model, stats, samples, options.batch_size);
    } else {
      const AttackConfig cfg = attack_config_for(options, eps);
      outcome.values.reserve(samples.size());
      for (std::size_t start = 0; start < samples.size(); start += options.batch_size) {
        const auto idx = batch_indices(start, std::min(options.batch_size, samples.size() - start));
        auto make = [&](const std::vector<std::size_t>& which) {
          std::vector<Status> labels;
          for (std::size_t i : which) labels.push_back(samples[i].status);
          return detection_objective(model, stats, stack_targets(samples, which), std::move(labels));
        };
        const AdversarialExample ex = attack_batch(options, cfg, samples, idx, make);
        ad::Tape tape;
        const ad::Var scores = anomaly_scores(model, stats, tape.constant(ex.perturbed),
                                              tape.constant(stack_targets(samples, idx)));
        const auto v = scores.value().data();
        outcome.values.insert(outcome.values.end(), v.begin(), v.end());
        keep_windows(options, idx, ex.perturbed, outcome);
      }
    }
    check_finite(outcome, samples, "anomaly score");
    const ScoredSet set = scored_set(outcome.values, samples);
    ReportRow row;
    row.epsilon = eps;
    row.auc_roc = roc_auc(set);
    row.auc_prc = pr_auc(set);
    result.report.rows.push_back(row);
    result.outcomes.push_back(std::move(outcome));
  }
  result.report.validate();
  return result;
}

SweepResult sweep_rul(const RulModel& model, std::span<const WindowedSample> samples,
                      const SweepOptions& options) {
  options.validate();
  SweepResult result;
  result.report.task = Task::Prognostics;
  result.report.metadata = sweep_metadata(options, model.parameters(), samples.size());
  const std::vector<double> truth = rul_targets(samples);

  for (double eps : options.epsilons) {
    EpsilonOutcome outcome;
    outcome.epsilon = eps;
    if (eps == 0.0) {
      outcome.values = predict_rul(model, samples, options.batch_size);
    } else {
      const AttackConfig cfg = attack_config_for(options, eps);
      outcome.values.reserve(samples.size());
      for (std::size_t start = 0; start < samples.size(); start += options.batch_size) {
        const auto idx = batch_indices(start, std::min(options.batch_size, samples.size() - start));
        auto make = [&](const std::vector<std::size_t>& which) {
          std::vector<double> targets;
          for (std::size_t i : which) targets.push_back(truth[i]);
          return regression_objective(model, std::move(targets));
        };
        const AdversarialExample ex = attack_batch(options, cfg, samples, idx, make);
        ad::Tape tape;
        const ad::Var pred = cnn_predict_batch(model, tape.constant(ex.perturbed));
        const auto v = pred.value().data();
        outcome.values.insert(outcome.values.end(), v.begin(), v.end());
        keep_windows(options, idx, ex.perturbed, outcome);
      }
    }
    check_finite(outcome, samples, "RUL prediction");
    ReportRow row;
    row.epsilon = eps;
    row.mse = mse(outcome.values, truth);
    result.report.rows.push_back(row);
    result.outcomes.push_back(std::move(outcome));
  }
  result.report.validate();
  return result;
}

}  // namespace phmadv
