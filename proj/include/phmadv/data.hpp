#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phmadv/tensor.hpp"

namespace phmadv {

enum class Status { Normal, Abnormal };

enum class Task { Detection, Prognostics };

std::string to_string(Status status);
std::string to_string(Task task);
Task parse_task(const std::string& text);

/// One time-ordered multichannel run.
struct RunRecord {
  int run_id = 0;
  /// 0 = normal, 1..20 = fault class; empty for run-to-failure prognostics data.
  std::optional<int> label;
  Tensor samples;             // [rows, channels]
  Tensor settings;            // [rows, 3] operating settings (C-MAPSS), else empty
  std::vector<double> time;   // cycle number or sample index per row, strictly increasing
  double sampling_period_minutes = 0.0;
  /// First faulty row for fault runs.
  std::optional<std::size_t> fault_onset;

  std::size_t length() const { return samples.rank() == 2 ? samples.dim(0) : 0; }
  std::size_t width() const { return samples.rank() == 2 ? samples.dim(1) : 0; }

  /// Ground-truth status of a row: abnormal from the fault onset onwards.
  Status status_at(std::size_t row) const;
};

/// A model input window and its target.
struct WindowedSample {
  Tensor window;  // [T, channels]
  /// Next sample [channels] for detection; scalar RUL in cycles for prognostics.
  Tensor target;
  int run_id = 0;
  std::size_t end_index = 0;  // 0-based row of the window's last sample
  Status status = Status::Normal;
};

// C-MAPSS: whitespace-delimited, 26 columns, no header:
//   engine id, cycle, 3 operating settings, 21 sensors.
constexpr std::size_t kCmapssColumns = 26;
constexpr std::size_t kCmapssSettings = 3;
constexpr std::size_t kCmapssSensors = 21;

/// Runs grouped by engine id in ascending id order. Cycles must increase
/// strictly within an engine.
std::vector<RunRecord> read_cmapss(const std::filesystem::path& path);
void write_cmapss(const std::filesystem::path& path, std::span<const RunRecord> runs);

// TEP-style CSV: header `run,t,m1,...,m52`, then one row per sample.
constexpr std::size_t kTepChannels = 52;
constexpr double kTepSamplingMinutes = 3.0;
constexpr std::size_t kTepTrainingOnset = 20;   // 1 hour at 3-minute sampling
constexpr std::size_t kTepTestingOnset = 160;   // 8 hours

enum class TepSplit { Training, Testing };

/// Runs in order of first appearance. Fault runs (label > 0) get the onset
/// that matches the split.
std::vector<RunRecord> read_tep_csv(const std::filesystem::path& path, int label,
                                    TepSplit split = TepSplit::Training);
void write_tep_csv(const std::filesystem::path& path, std::span<const RunRecord> runs);

/// Per-channel z-scoring with sample (N-1) standard deviations. Channels
/// with sigma below 1e-8 use sigma = 1.
class Standardizer {
 public:
  static constexpr double kMinSigma = 1e-8;

  Standardizer() = default;
  Standardizer(Tensor mean, Tensor stddev);

  static Standardizer fit(std::span<const RunRecord> runs);

  const Tensor& mean() const { return mean_; }
  const Tensor& stddev() const { return stddev_; }
  std::size_t width() const { return mean_.size(); }

  /// rows: [N, channels].
  Tensor apply(const Tensor& rows) const;
  Tensor invert(const Tensor& rows) const;
  RunRecord apply(const RunRecord& run) const;
  std::vector<RunRecord> apply(std::span<const RunRecord> runs) const;

 private:
  Tensor mean_;
  Tensor stddev_;
};

constexpr double kDefaultRulCap = 130.0;

/// Stride-1 windows of length T.
///   detection:   windows end at rows T-1 .. len-2, target = row end+1
///   prognostics: windows end at rows T-1 .. len-1,
///                target = min(len - (end+1), rul_cap)
/// Runs with len <= T yield no windows.
std::vector<WindowedSample> make_windows(const RunRecord& run, std::size_t window, Task task,
                                         double rul_cap = kDefaultRulCap);

std::vector<WindowedSample> make_windows(std::span<const RunRecord> runs, std::size_t window,
                                         Task task, double rul_cap = kDefaultRulCap);

/// Keeps every k-th sample (k >= 1), starting with the first.
std::vector<WindowedSample> every_kth(std::vector<WindowedSample> samples, std::size_t k);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace phmadv
