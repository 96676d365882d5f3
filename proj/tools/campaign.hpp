#pragma once
// Workflows behind the phmadv subcommands: dataset assembly, training and
// calibration, and epsilon sweeps with their output files.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "phmadv/data.hpp"
#include "phmadv/normality_model.hpp"
#include "phmadv/report.hpp"
#include "phmadv/sweep.hpp"
#include "phmadv/train.hpp"

namespace phmadv::cli {

/// Where runs come from: a dataset directory or file, or the synthetic
/// surrogate generated in memory.
struct DataSpec {
  std::optional<std::filesystem::path> path;
  bool synth = false;
  std::size_t runs = 0;        // training runs; 0 = task default
  std::size_t test_runs = 0;   // normal test runs (engines for rul); 0 = runs
  std::size_t fault_runs = 0;  // detection fault test runs; 0 = test runs
  std::size_t length = 500;    // detection run length
  std::uint64_t seed = 0;

  void validate() const;
};

std::size_t default_runs(Task task);

/// Runs of one dataset file with the label they are read under.
struct LabeledRuns {
  std::string file;
  int label = 0;
  std::vector<RunRecord> runs;
};

std::vector<LabeledRuns> synth_training(Task task, const DataSpec& spec);
std::vector<LabeledRuns> synth_testing(Task task, const DataSpec& spec);

/// Writes the files in the canonical formats; returns their names.
std::vector<std::string> write_dataset(Task task, const std::vector<LabeledRuns>& files,
                                       const std::filesystem::path& dir);

/// Runs ready for windowing. final_rul is set for truncated C-MAPSS test
/// engines that come with a RUL file.
struct RunSet {
  std::vector<RunRecord> runs;
  std::vector<double> final_rul;
  nlohmann::json source;
};

RunSet training_runs(Task task, const DataSpec& spec);
RunSet testing_runs(Task task, const DataSpec& spec);

/// Windows of every run; RUL targets are offset by final_rul when present.
std::vector<WindowedSample> windows_for(const RunSet& set, std::size_t window, Task task,
                                        double rul_cap);

/// Keep every k-th window, k = round(1 / fraction).
std::size_t stride_for_fraction(double fraction);

std::uint64_t fnv1a(const std::string& bytes);
std::string config_hash(const nlohmann::json& config);

struct TrainOptions {
  Task task = Task::Detection;
  DataSpec data;
  NormalityModel::Config lstm;
  TrainConfig train;
  double sample_fraction = 1.0;
  double holdout = 0.25;
  double quantile = 0.99;
  double rul_cap = kDefaultRulCap;
  std::filesystem::path out;
  nlohmann::json config = nlohmann::json::object();
};

struct TrainOutcome {
  std::vector<double> loss_history;
  std::vector<std::string> files;
};

/// Writes model.json, stats.json (detection), loss_history.csv and manifest.json.
TrainOutcome run_train(const TrainOptions& options, std::ostream* log);

struct EvalOptions {
  std::filesystem::path model;
  std::optional<std::filesystem::path> stats;  // default: stats.json next to the model
  std::optional<Task> task;
  DataSpec data;
  SweepOptions sweep;  // empty epsilons = the task's default grid
  double sample_fraction = 1.0;
  double rul_cap = kDefaultRulCap;
  std::size_t dump_signals = 0;
  bool raw_units = false;
  bool dump_curves = false;
  std::filesystem::path out;
  nlohmann::json config = nlohmann::json::object();
};

std::vector<double> default_epsilons(Task task);

/// Writes report.csv, report.json, manifest.json and the requested dumps.
RobustnessReport run_attack_eval(const EvalOptions& options, std::ostream* log);

/// Writes manifest.json listing the files with their content hashes.
void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    const nlohmann::json& config, std::uint64_t seed,
                    const std::vector<std::string>& files);

}  // namespace phmadv::cli
