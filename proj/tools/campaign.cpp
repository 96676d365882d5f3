#include "campaign.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "phmadv/anomaly.hpp"
#include "phmadv/error.hpp"
#include "phmadv/parameters.hpp"
#include "phmadv/serialize.hpp"
#include "phmadv/synth.hpp"

namespace fs = std::filesystem;

namespace phmadv::cli {
namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void say(std::ostream* log, const std::string& line) {
  if (log) *log << line << '\n' << std::flush;
}

std::string tep_name(int label, bool testing) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "d%02d%s.csv", label, testing ? "_te" : "");
  return buf;
}

void require_exists(const fs::path& p) {
  if (!fs::exists(p)) throw DataError("data path does not exist: " + p.string());
}

std::uint64_t hash_runs(const std::vector<RunRecord>& runs) {
  std::string bytes;
  for (const RunRecord& r : runs) {
    bytes += std::to_string(r.run_id) + ":" + std::to_string(r.label.value_or(-1)) + ":";
    const auto v = r.samples.data();
    bytes.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  return fnv1a(bytes);
}

// Fault files share run numbering with the normal file; keep ids unique.
void offset_run_ids(std::vector<RunRecord>& runs, int label) {
  for (RunRecord& r : runs) r.run_id += 1000 * label;
}

RunSet assemble(std::vector<LabeledRuns> files, const std::string& kind) {
  RunSet set;
  nlohmann::json names = nlohmann::json::array();
  for (LabeledRuns& f : files) {
    names.push_back(f.file);
    offset_run_ids(f.runs, f.label);
    for (RunRecord& r : f.runs) set.runs.push_back(std::move(r));
  }
  set.source = {{"kind", kind}, {"files", names}, {"runs", set.runs.size()},
                {"content_hash", hash_hex(hash_runs(set.runs))}};
  return set;
}

std::optional<fs::path> find_prefixed(const fs::path& dir, const std::string& prefix) {
  std::vector<fs::path> hits;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind(prefix, 0) == 0 && entry.path().extension() == ".txt") {
      hits.push_back(entry.path());
    }
  }
  if (hits.empty()) return std::nullopt;
  std::sort(hits.begin(), hits.end());
  return hits.front();
}

std::vector<double> read_rul_file(const fs::path& path, std::size_t engines) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    double v = 0.0;
    if (!(fields >> v) || !std::isfinite(v) || v < 0.0) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected a RUL value");
    }
    out.push_back(v);
  }
  if (out.size() != engines) {
    throw SchemaError(path.string() + ": " + std::to_string(out.size()) + " RUL values for " +
                      std::to_string(engines) + " engines");
  }
  return out;
}

RunSet cmapss_set(const fs::path& file, std::optional<fs::path> rul_file) {
  LabeledRuns f{file.filename().string(), 0, read_cmapss(file)};
  RunSet set = assemble({std::move(f)}, "cmapss");
  if (rul_file) {
    set.final_rul = read_rul_file(*rul_file, set.runs.size());
    set.source["rul_file"] = rul_file->filename().string();
  }
  return set;
}

std::string csv_number(double v) { return format_double(v); }

std::string eps_tag(double eps) { return "eps_" + format_double(eps); }

nlohmann::json with_provenance(nlohmann::json metadata, const nlohmann::json& config,
                               std::uint64_t seed) {
  metadata["seed"] = seed;
  metadata["config_hash"] = config_hash(config);
  metadata["tool_version"] = PHMADV_VERSION;
  return metadata;
}

void write_signal_dump(const fs::path& path, const WindowedSample& sample, const Tensor& perturbed,
                       const std::optional<Standardizer>& raw) {
  Tensor clean = sample.window;
  Tensor moved = perturbed;
  if (raw) {
    clean = raw->invert(clean);
    moved = raw->invert(moved);
  }
  const std::size_t rows = clean.dim(0);
  const std::size_t width = clean.dim(1);
  std::ostringstream out;
  out << "row";
  for (std::size_t c = 1; c <= width; ++c) out << ",clean_" << c;
  for (std::size_t c = 1; c <= width; ++c) out << ",perturbed_" << c;
  out << '\n';
  const std::size_t first_row = sample.end_index + 1 - rows;
  for (std::size_t r = 0; r < rows; ++r) {
    out << first_row + r;
    for (std::size_t c = 0; c < width; ++c) out << ',' << csv_number(clean[r * width + c]);
    for (std::size_t c = 0; c < width; ++c) out << ',' << csv_number(moved[r * width + c]);
    out << '\n';
  }
  write_text(path, out.str());
}

std::vector<std::size_t> spread_indices(std::size_t count, std::size_t total) {
  std::vector<std::size_t> out;
  count = std::min(count, total);
  for (std::size_t i = 0; i < count; ++i) out.push_back(i * total / count);
  return out;
}

}  // namespace

void DataSpec::validate() const {
  if (path && synth) throw ContractError("give either a data path or --synth, not both");
  if (!path && !synth) throw ContractError("no data: give --data PATH or --synth");
}

std::size_t default_runs(Task task) { return task == Task::Detection ? 20 : 40; }

std::vector<LabeledRuns> synth_training(Task task, const DataSpec& spec) {
  const std::size_t n = spec.runs ? spec.runs : default_runs(task);
  if (task == Task::Prognostics) {
    return {{"train_synth.txt", 0, synth_prognostics(n, derive_seed(spec.seed, 1))}};
  }
  DetectionSynthOptions o;
  o.length = spec.length;
  return {{tep_name(0, false), 0, synth_detection(n, derive_seed(spec.seed, 1), o)}};
}

std::vector<LabeledRuns> synth_testing(Task task, const DataSpec& spec) {
  const std::size_t n = spec.test_runs ? spec.test_runs : (spec.runs ? spec.runs : default_runs(task));
  if (task == Task::Prognostics) {
    return {{"test_synth.txt", 0, synth_prognostics(n, derive_seed(spec.seed, 2))}};
  }
  if (spec.length <= kTepTestingOnset) {
    throw ContractError("detection test runs need length > " + std::to_string(kTepTestingOnset) +
                        " to contain the fault onset");
  }
  DetectionSynthOptions o;
  o.length = spec.length;
  std::vector<LabeledRuns> files{{tep_name(0, true), 0, synth_detection(n, derive_seed(spec.seed, 2), o)}};
  const std::size_t faults = spec.fault_runs ? spec.fault_runs : n;
  std::map<int, std::size_t> per_label;
  for (std::size_t i = 0; i < faults; ++i) ++per_label[1 + static_cast<int>(i % 20)];
  o.fault_onset = kTepTestingOnset;
  for (const auto& [label, count] : per_label) {
    o.label = label;
    files.push_back({tep_name(label, true), label,
                     synth_detection(count, derive_seed(spec.seed, 100 + label), o)});
  }
  return files;
}

std::vector<std::string> write_dataset(Task task, const std::vector<LabeledRuns>& files,
                                       const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<std::string> names;
  for (const LabeledRuns& f : files) {
    if (task == Task::Prognostics) {
      write_cmapss(dir / f.file, f.runs);
    } else {
      write_tep_csv(dir / f.file, f.runs);
    }
    names.push_back(f.file);
  }
  return names;
}

RunSet training_runs(Task task, const DataSpec& spec) {
  spec.validate();
  if (spec.synth) return assemble(synth_training(task, spec), "synthetic");
  const fs::path p = *spec.path;
  require_exists(p);
  if (task == Task::Prognostics) {
    if (fs::is_directory(p)) {
      const auto file = find_prefixed(p, "train_");
      if (!file) throw DataError("no train_*.txt file in " + p.string());
      return cmapss_set(*file, std::nullopt);
    }
    return cmapss_set(p, std::nullopt);
  }
  const fs::path file = fs::is_directory(p) ? p / tep_name(0, false) : p;
  require_exists(file);
  return assemble({{file.filename().string(), 0, read_tep_csv(file, 0, TepSplit::Training)}}, "tep");
}

RunSet testing_runs(Task task, const DataSpec& spec) {
  spec.validate();
  if (spec.synth) return assemble(synth_testing(task, spec), "synthetic");
  const fs::path p = *spec.path;
  require_exists(p);
  if (task == Task::Prognostics) {
    if (!fs::is_directory(p)) return cmapss_set(p, std::nullopt);
    const auto file = find_prefixed(p, "test_");
    if (!file) throw DataError("no test_*.txt file in " + p.string());
    const std::string suffix = file->filename().string().substr(5);
    const fs::path rul = p / ("RUL_" + suffix);
    return cmapss_set(*file, fs::exists(rul) ? std::optional<fs::path>(rul) : std::nullopt);
  }
  if (!fs::is_directory(p)) {
    throw DataError("detection evaluation needs a dataset directory with d00_te.csv and dNN_te.csv files: " +
                    p.string());
  }
  const fs::path normal = p / tep_name(0, true);
  require_exists(normal);
  std::vector<LabeledRuns> files{{normal.filename().string(), 0, read_tep_csv(normal, 0, TepSplit::Testing)}};
  for (int label = 1; label <= 20; ++label) {
    const fs::path f = p / tep_name(label, true);
    if (fs::exists(f)) files.push_back({f.filename().string(), label, read_tep_csv(f, label, TepSplit::Testing)});
  }
  if (files.size() == 1) throw DataError("no fault files (dNN_te.csv) in " + p.string());
  return assemble(std::move(files), "tep");
}

std::vector<WindowedSample> windows_for(const RunSet& set, std::size_t window, Task task,
                                        double rul_cap) {
  if (set.final_rul.empty()) return make_windows(set.runs, window, task, rul_cap);
  std::vector<WindowedSample> out;
  for (std::size_t i = 0; i < set.runs.size(); ++i) {
    auto w = make_windows(set.runs[i], window, task, std::numeric_limits<double>::infinity());
    for (WindowedSample& s : w) {
      s.target = Tensor::scalar(std::min(s.target.item() + set.final_rul[i], rul_cap));
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::size_t stride_for_fraction(double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ContractError("sample fraction must be in (0, 1]");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(1.0 / fraction)));
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const nlohmann::json& config) { return hash_hex(fnv1a(config.dump())); }

void write_manifest(const fs::path& dir, const std::string& command, const nlohmann::json& config,
                    std::uint64_t seed, const std::vector<std::string>& files) {
  nlohmann::json listed = nlohmann::json::array();
  for (const std::string& f : files) {
    listed.push_back({{"name", f}, {"content_hash", hash_hex(fnv1a(read_text(dir / f)))}});
  }
  nlohmann::json m;
  m["format"] = "phmadv.manifest";
  m["command"] = command;
  m["tool_version"] = PHMADV_VERSION;
  m["model_format_version"] = kFormatVersion;
  m["report_format_version"] = kReportFormatVersion;
  m["seed"] = seed;
  m["config_hash"] = config_hash(config);
  m["config"] = config;
  m["files"] = listed;
  save_json(dir / "manifest.json", m);
}

TrainOutcome run_train(const TrainOptions& options, std::ostream* log) {
  options.train.validate();
  const std::size_t stride = stride_for_fraction(options.sample_fraction);
  if (!(options.holdout >= 0.0 && options.holdout < 1.0)) throw ContractError("holdout must be in [0, 1)");
  if (!(options.quantile > 0.0 && options.quantile < 1.0)) throw ContractError("quantile must be in (0, 1)");
  if (!(options.rul_cap > 0.0)) throw ContractError("RUL cap must be positive");

  RunSet set = training_runs(options.task, options.data);
  say(log, "loaded " + std::to_string(set.runs.size()) + " training runs");
  fs::create_directories(options.out);
  const auto on_epoch = [log](std::size_t epoch, double loss) {
    say(log, "epoch " + std::to_string(epoch) + " loss " + format_double(loss));
  };
  const nlohmann::json base_meta = with_provenance(
      {{"task", to_string(options.task)}, {"data", set.source}, {"window_stride", stride}},
      options.config, options.data.seed);

  TrainOutcome outcome;
  if (options.task == Task::Detection) {
    std::vector<RunRecord> normal;
    for (RunRecord& r : set.runs) {
      if (r.label.value_or(0) == 0) normal.push_back(std::move(r));
    }
    if (normal.empty()) throw DataError("no normal runs to train the detector on");
    std::size_t n_cal = 0;
    if (normal.size() >= 2 && options.holdout > 0.0) {
      n_cal = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::llround(options.holdout * static_cast<double>(normal.size()))), 1,
          normal.size() - 1);
    }
    const std::vector<RunRecord> fit_runs(normal.begin(), normal.end() - static_cast<std::ptrdiff_t>(n_cal));
    const std::vector<RunRecord> cal_runs =
        n_cal ? std::vector<RunRecord>(normal.end() - static_cast<std::ptrdiff_t>(n_cal), normal.end()) : fit_runs;

    const Standardizer st = Standardizer::fit(fit_runs);
    NormalityModel::Config cfg = options.lstm;
    cfg.input_width = st.width();
    const auto train_windows = every_kth(make_windows(st.apply(fit_runs), cfg.window, Task::Detection), stride);
    if (train_windows.empty()) throw DataError("training runs are too short for window " + std::to_string(cfg.window));
    say(log, "training on " + std::to_string(train_windows.size()) + " windows");
    auto result = train(NormalityModel::initialize(cfg, options.data.seed), train_windows, options.train, on_epoch);

    const auto cal_windows = every_kth(make_windows(st.apply(cal_runs), cfg.window, Task::Detection), stride);
    if (cal_windows.size() <= cfg.input_width) {
      throw DataError("calibration needs more than " + std::to_string(cfg.input_width) + " windows, got " +
                      std::to_string(cal_windows.size()));
    }
    const auto residuals = residual_samples(result.model, cal_windows, options.train.batch_size);
    StatsFile stats{fit_residual_stats(residuals), 0.0, {}};
    stats.threshold = quantile_threshold(score_samples(result.model, stats.stats, cal_windows,
                                                       options.train.batch_size),
                                         options.quantile);
    say(log, "calibrated on " + std::to_string(cal_windows.size()) + " windows, threshold " +
                 format_double(stats.threshold));

    nlohmann::json meta = base_meta;
    meta["training_runs"] = fit_runs.size();
    meta["training_windows"] = train_windows.size();
    meta["final_loss"] = result.loss_history.empty() ? nlohmann::json(nullptr)
                                                     : nlohmann::json(result.loss_history.back());
    const std::string model_hash = hash_hex(parameter_hash(result.model.parameters()));
    meta["model_hash"] = model_hash;
    save_json(options.out / "model.json", model_to_json({result.model, st, meta}));

    nlohmann::json stats_meta = with_provenance(
        {{"calibration_runs", n_cal ? n_cal : fit_runs.size()},
         {"calibration_windows", cal_windows.size()},
         {"calibration_source", n_cal ? "held-out normal runs" : "training runs"},
         {"quantile", options.quantile},
         {"model_hash", model_hash}},
        options.config, options.data.seed);
    stats.metadata = stats_meta;
    save_json(options.out / "stats.json", stats_to_json(stats));
    outcome.loss_history = result.loss_history;
    outcome.files = {"model.json", "stats.json"};
  } else {
    const Standardizer st = Standardizer::fit(set.runs);
    const auto train_windows =
        every_kth(windows_for(RunSet{st.apply(set.runs), {}, {}}, RulModel::kWindow, Task::Prognostics,
                              options.rul_cap),
                  stride);
    if (train_windows.empty()) throw DataError("training engines are too short for window 35");
    say(log, "training on " + std::to_string(train_windows.size()) + " windows");
    auto result = train(RulModel::initialize(options.data.seed), train_windows, options.train, on_epoch);
    nlohmann::json meta = base_meta;
    meta["training_runs"] = set.runs.size();
    meta["training_windows"] = train_windows.size();
    meta["rul_cap"] = options.rul_cap;
    meta["final_loss"] = result.loss_history.empty() ? nlohmann::json(nullptr)
                                                     : nlohmann::json(result.loss_history.back());
    meta["model_hash"] = hash_hex(parameter_hash(result.model.parameters()));
    save_json(options.out / "model.json", model_to_json({result.model, st, meta}));
    outcome.loss_history = result.loss_history;
    outcome.files = {"model.json"};
  }

  std::ostringstream csv;
  csv << "epoch,loss\n";
  for (std::size_t e = 0; e < outcome.loss_history.size(); ++e) {
    csv << e + 1 << ',' << format_double(outcome.loss_history[e]) << '\n';
  }
  write_text(options.out / "loss_history.csv", csv.str());
  outcome.files.push_back("loss_history.csv");
  write_manifest(options.out, "train", options.config, options.data.seed, outcome.files);
  return outcome;
}

std::vector<double> default_epsilons(Task task) {
  if (task == Task::Detection) return {0.0, 0.00025, 0.00825, 0.035};
  return {0.0, 0.025, 0.045, 0.065};
}

RobustnessReport run_attack_eval(const EvalOptions& options, std::ostream* log) {
  const std::size_t stride = stride_for_fraction(options.sample_fraction);
  const ModelFile file = model_from_json(load_json(options.model));
  const Task task = std::holds_alternative<NormalityModel>(file.model) ? Task::Detection : Task::Prognostics;
  if (options.task && *options.task != task) {
    throw ContractError("--task " + to_string(*options.task) + " does not match the " + to_string(task) +
                        " model in " + options.model.string());
  }
  if (!file.standardizer) throw SchemaError(options.model.string() + " carries no standardizer");
  const Standardizer& st = *file.standardizer;

  SweepOptions sweep = options.sweep;
  if (sweep.epsilons.empty()) sweep.epsilons = default_epsilons(task);

  RunSet set = testing_runs(task, options.data);
  if (set.runs.empty()) throw DataError("test set is empty");
  if (set.runs.front().width() != st.width()) {
    throw DataError("model expects " + std::to_string(st.width()) + " channels, test data has " +
                    std::to_string(set.runs.front().width()));
  }
  say(log, "loaded " + std::to_string(set.runs.size()) + " test runs");
  RunSet standardized{st.apply(set.runs), set.final_rul, set.source};

  SweepResult result;
  std::vector<WindowedSample> samples;
  if (task == Task::Detection) {
    const auto& model = std::get<NormalityModel>(file.model);
    const fs::path stats_path = options.stats ? *options.stats : options.model.parent_path() / "stats.json";
    require_exists(stats_path);
    const StatsFile stats = stats_from_json(load_json(stats_path));
    if (stats.stats.width() != model.config().input_width) {
      throw DataError("stats width " + std::to_string(stats.stats.width()) + " does not match model width " +
                      std::to_string(model.config().input_width));
    }
    samples = every_kth(windows_for(standardized, model.config().window, task, options.rul_cap), stride);
    if (samples.empty()) throw DataError("test runs are too short for window " + std::to_string(model.config().window));
    sweep.keep_examples = spread_indices(options.dump_signals, samples.size());
    say(log, "attacking " + std::to_string(samples.size()) + " windows at " +
                 std::to_string(sweep.epsilons.size() - 1) + " nonzero epsilons");
    result = sweep_detection(model, stats.stats, samples, sweep);
    std::size_t abnormal = 0;
    for (const auto& s : samples) abnormal += s.status == Status::Abnormal;
    result.report.metadata["abnormal_windows"] = abnormal;
    result.report.metadata["threshold"] = stats.threshold;
  } else {
    const auto& model = std::get<RulModel>(file.model);
    samples = every_kth(windows_for(standardized, RulModel::kWindow, task, options.rul_cap), stride);
    if (samples.empty()) throw DataError("test engines are too short for window 35");
    sweep.keep_examples = spread_indices(options.dump_signals, samples.size());
    say(log, "attacking " + std::to_string(samples.size()) + " windows at " +
                 std::to_string(sweep.epsilons.size() - 1) + " nonzero epsilons");
    result = sweep_rul(model, samples, sweep);
    result.report.metadata["rul_cap"] = options.rul_cap;
  }
  RobustnessReport& report = result.report;
  report.metadata["data"] = set.source;
  report.metadata["window_stride"] = stride;
  report.metadata["perturbation_space"] = "standardized";
  report.metadata = with_provenance(report.metadata, options.config, options.data.seed);

  fs::create_directories(options.out);
  std::vector<std::string> files{"report.csv", "report.json"};
  write_text(options.out / "report.csv", report.to_csv());
  save_json(options.out / "report.json", report.to_json());

  if (options.dump_curves) {
    fs::create_directories(options.out / "curves");
    for (const EpsilonOutcome& o : result.outcomes) {
      if (task == Task::Detection) {
        const ScoredSet scored = scored_set(o.values, samples);
        const std::string roc = "curves/roc_" + eps_tag(o.epsilon) + ".csv";
        const std::string pr = "curves/pr_" + eps_tag(o.epsilon) + ".csv";
        write_text(options.out / roc, curve_csv(roc_curve(scored), "fpr", "tpr"));
        write_text(options.out / pr, curve_csv(pr_curve(scored), "recall", "precision"));
        files.push_back(roc);
        files.push_back(pr);
      } else {
        std::ostringstream csv;
        csv << "run,end_row,true_rul,predicted_rul\n";
        for (std::size_t i = 0; i < samples.size(); ++i) {
          csv << samples[i].run_id << ',' << samples[i].end_index << ','
              << format_double(samples[i].target.item()) << ',' << format_double(o.values[i]) << '\n';
        }
        const std::string name = "curves/rul_" + eps_tag(o.epsilon) + ".csv";
        write_text(options.out / name, csv.str());
        files.push_back(name);
      }
    }
  }
  if (options.dump_signals > 0) {
    fs::create_directories(options.out / "signals");
    const std::optional<Standardizer> raw = options.raw_units ? std::optional<Standardizer>(st) : std::nullopt;
    for (const EpsilonOutcome& o : result.outcomes) {
      for (const auto& [idx, perturbed] : o.kept_windows) {
        const WindowedSample& s = samples[idx];
        const std::string name = "signals/" + eps_tag(o.epsilon) + "_run" + std::to_string(s.run_id) + "_end" +
                                 std::to_string(s.end_index) + ".csv";
        write_signal_dump(options.out / name, s, perturbed, raw);
        files.push_back(name);
      }
    }
  }
  write_manifest(options.out, "attack-eval", options.config, options.data.seed, files);
  say(log, report.to_table());
  return report;
}

}  // namespace phmadv::cli
