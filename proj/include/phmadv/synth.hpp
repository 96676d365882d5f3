#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "phmadv/data.hpp"

namespace phmadv {

/// Multichannel AR(2) process with cross-channel coupling, standing in for
/// TEP-style plant data. The process itself (coefficients, channel scales)
/// comes from `process_seed`, so training and testing sets generated with
/// different run seeds share the same dynamics.
struct DetectionSynthOptions {
  std::size_t channels = kTepChannels;
  std::size_t length = 500;
  /// 0 = normal; 1..20 selects which channels a fault disturbs.
  int label = 0;
  /// Defaults to the TEP training onset.
  std::size_t fault_onset = kTepTrainingOnset;
  /// Fault disturbance on the innovations of affected channels, in units of
  /// the innovation standard deviation.
  double mean_shift = 1.0;
  double variance_inflation = 2.0;
  /// Fraction of channels a fault disturbs.
  double affected_fraction = 0.25;
  std::uint64_t process_seed = 0x5eedULL;
};

/// Run-to-failure degradation: 21 sensors drift monotonically along an
/// exponential health trend plus noise; 3 near-constant operating settings.
struct PrognosticsSynthOptions {
  std::size_t min_length = 150;
  std::size_t max_length = 300;
  double noise = 0.35;
  std::uint64_t process_seed = 0x5eedULL;
};

std::vector<RunRecord> synth_detection(std::size_t n_runs, std::uint64_t seed,
                                       const DetectionSynthOptions& options = {});

std::vector<RunRecord> synth_prognostics(std::size_t n_runs, std::uint64_t seed,
                                         const PrognosticsSynthOptions& options = {});

/// Default-sized surrogate of either kind (detection runs are normal).
std::vector<RunRecord> synth_generate(Task kind, std::size_t n_runs, std::uint64_t seed);

}  // namespace phmadv
