#include "phmadv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "phmadv/error.hpp"

namespace phmadv {
namespace {

constexpr std::size_t kBurnIn = 50;

std::mt19937_64 run_rng(std::uint64_t seed, std::size_t run) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32)};
  return std::mt19937_64(seq);
}

struct ArProcess {
  std::vector<double> a1, a2, coupling, innovation_sd, offset, scale;
};

ArProcess make_process(std::size_t n, std::uint64_t process_seed) {
  std::mt19937_64 rng(process_seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  ArProcess p;
  for (std::size_t c = 0; c < n; ++c) {
    // Row sums of |coefficients| stay below 0.95, which keeps the VAR(2) stable.
    p.a1.push_back(0.30 + 0.35 * u01(rng));
    p.a2.push_back(-0.20 + 0.30 * u01(rng));
    p.coupling.push_back(-0.10 + 0.20 * u01(rng));
    p.innovation_sd.push_back(0.5 + u01(rng));
    p.offset.push_back(-50.0 + 100.0 * u01(rng));
    p.scale.push_back(0.5 + 19.5 * u01(rng));
  }
  return p;
}

std::vector<double> fault_pattern(std::size_t n, int label, const DetectionSynthOptions& o) {
  // +1 / -1 marks a disturbed channel and the direction of its shift.
  std::vector<double> pattern(n, 0.0);
  if (label <= 0) return pattern;
  std::mt19937_64 rng(o.process_seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(label)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t k =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(o.affected_fraction * n)));
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < std::min(k, n); ++i) pattern[order[i]] = coin(rng) ? 1.0 : -1.0;
  return pattern;
}

}  // namespace

std::vector<RunRecord> synth_detection(std::size_t n_runs, std::uint64_t seed,
                                       const DetectionSynthOptions& options) {
  if (n_runs == 0) throw ContractError("synthetic generation needs at least one run");
  if (options.channels == 0 || options.length == 0) {
    throw ContractError("synthetic runs need positive channel count and length");
  }
  if (options.label < 0 || options.label > 20) {
    throw ContractError("synthetic label must be 0 or a fault class 1..20");
  }
  const std::size_t n = options.channels;
  const ArProcess proc = make_process(n, options.process_seed);
  const std::vector<double> pattern = fault_pattern(n, options.label, options);

  std::vector<RunRecord> runs;
  runs.reserve(n_runs);
  for (std::size_t r = 0; r < n_runs; ++r) {
    std::mt19937_64 rng = run_rng(seed, r);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> prev(n, 0.0), prev2(n, 0.0), cur(n, 0.0), noise(n, 0.0);
    RunRecord run;
    run.run_id = static_cast<int>(r + 1);
    run.label = options.label;
    run.sampling_period_minutes = kTepSamplingMinutes;
    if (options.label > 0) run.fault_onset = options.fault_onset;
    run.samples = Tensor(Shape{options.length, n});
    run.time.resize(options.length);

    for (std::size_t step = 0; step < kBurnIn + options.length; ++step) {
      for (std::size_t c = 0; c < n; ++c) noise[c] = gauss(rng);
      const bool faulty = step >= kBurnIn && options.label > 0 &&
                          step - kBurnIn >= options.fault_onset;
      for (std::size_t c = 0; c < n; ++c) {
        double e = proc.innovation_sd[c] * noise[c];
        if (faulty && pattern[c] != 0.0) {
          e = options.variance_inflation * e +
              pattern[c] * options.mean_shift * proc.innovation_sd[c];
        }
        cur[c] = proc.a1[c] * prev[c] + proc.a2[c] * prev2[c] +
                 proc.coupling[c] * prev[(c + 1) % n] + e;
      }
      prev2 = prev;
      prev = cur;
      if (step >= kBurnIn) {
        const std::size_t row = step - kBurnIn;
        run.time[row] = static_cast<double>(row + 1);
        for (std::size_t c = 0; c < n; ++c) {
          run.samples[row * n + c] = proc.offset[c] + proc.scale[c] * cur[c];
        }
      }
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

std::vector<RunRecord> synth_prognostics(std::size_t n_runs, std::uint64_t seed,
                                         const PrognosticsSynthOptions& options) {
  if (n_runs == 0) throw ContractError("synthetic generation needs at least one run");
  if (options.min_length < 2 || options.max_length < options.min_length) {
    throw ContractError("invalid synthetic run length range");
  }
  constexpr std::size_t n = kCmapssSensors;
  // Channel roles: 14 degrade, 2 are pure noise, 5 are constant.
  std::mt19937_64 prng(options.process_seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> base(n), scale(n), slope(n), noise_sd(n);
  for (std::size_t c = 0; c < n; ++c) {
    base[c] = 10.0 + 2000.0 * u01(prng);
    scale[c] = 0.01 + 5.0 * u01(prng);
    const double direction = u01(prng) < 0.5 ? -1.0 : 1.0;
    if (c < 14) {
      slope[c] = direction * (1.5 + 1.5 * u01(prng));
      noise_sd[c] = options.noise;
    } else if (c < 16) {
      slope[c] = 0.0;
      noise_sd[c] = options.noise;
    } else {
      slope[c] = 0.0;
      noise_sd[c] = 0.0;
    }
  }
  const double setting_base[kCmapssSettings] = {0.0, 0.0, 100.0};

  std::vector<RunRecord> runs;
  runs.reserve(n_runs);
  for (std::size_t r = 0; r < n_runs; ++r) {
    std::mt19937_64 rng = run_rng(seed, r);
    std::uniform_int_distribution<std::size_t> length_dist(options.min_length, options.max_length);
    std::uniform_real_distribution<double> rate_dist(2.5, 5.0);
    std::uniform_real_distribution<double> wear_dist(0.0, 0.1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t len = length_dist(rng);
    const double rate = rate_dist(rng);
    const double wear0 = wear_dist(rng);

    RunRecord run;
    run.run_id = static_cast<int>(r + 1);
    run.samples = Tensor(Shape{len, n});
    run.settings = Tensor(Shape{len, kCmapssSettings});
    run.time.resize(len);
    const double norm = std::expm1(rate);
    for (std::size_t t = 0; t < len; ++t) {
      const double life = static_cast<double>(t + 1) / static_cast<double>(len);
      const double health = wear0 + (1.0 - wear0) * std::expm1(rate * life) / norm;
      run.time[t] = static_cast<double>(t + 1);
      for (std::size_t s = 0; s < kCmapssSettings; ++s) {
        run.settings[t * kCmapssSettings + s] = setting_base[s] + 1e-4 * gauss(rng);
      }
      for (std::size_t c = 0; c < n; ++c) {
        const double z = gauss(rng);
        run.samples[t * n + c] = base[c] + scale[c] * (slope[c] * health + noise_sd[c] * z);
      }
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

std::vector<RunRecord> synth_generate(Task kind, std::size_t n_runs, std::uint64_t seed) {
  if (kind == Task::Detection) return synth_detection(n_runs, seed);
  return synth_prognostics(n_runs, seed);
}

}  // namespace phmadv
