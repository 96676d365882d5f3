// phmadv command-line front end: synth, train, attack-eval, report.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "campaign.hpp"
#include "phmadv/error.hpp"
#include "phmadv/serialize.hpp"

namespace fs = std::filesystem;
using namespace phmadv;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

// JSON config files for CLI11. Keys name long flags, with '_' read as '-';
// `target` and `epsilon_list` are accepted for --task and --epsilons. Keys
// that belong to another subcommand are skipped so one campaign file can
// serve every step.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(CLI::App* root) : root_(root) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConfigError("config must be a JSON object");
    const auto selected = root_->get_subcommands();
    if (selected.empty()) throw CLI::ConfigError("--config needs a subcommand");
    CLI::App* sub = selected.front();

    std::vector<CLI::ConfigItem> items;
    for (const auto& [raw_key, value] : j.items()) {
      std::string key = raw_key;
      for (char& c : key) {
        if (c == '_') c = '-';
      }
      if (key == "target") key = "task";
      if (key == "epsilon-list") key = "epsilons";
      if (key == "config") throw CLI::ConfigError("config files cannot include other config files");
      if (!sub->get_option_no_throw("--" + key)) {
        if (known_elsewhere(key)) continue;
        throw CLI::ConfigError("unknown config key '" + raw_key + "'");
      }
      CLI::ConfigItem item;
      item.parents = {sub->get_name()};
      item.name = key;
      if (value.is_object()) throw CLI::ConfigError("config key '" + raw_key + "' must be a scalar or a list");
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(text(v, raw_key));
      } else {
        item.inputs.push_back(text(value, raw_key));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  static std::string text(const nlohmann::json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_number_float()) return format_double(v.get<double>());
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    throw CLI::ConfigError("config key '" + key + "' has an unsupported value");
  }

  bool known_elsewhere(const std::string& key) const {
    for (const CLI::App* sub : root_->get_subcommands({})) {
      if (sub->get_option_no_throw("--" + key)) return true;
    }
    return false;
  }

  CLI::App* root_;
};

std::string version_text() {
  return std::string("phmadv ") + PHMADV_VERSION + "\nmodel/stats format version " +
         std::to_string(kFormatVersion) + "\nreport format version " + std::to_string(kReportFormatVersion);
}

const CLI::Validator kAtLeastOne(
    [](std::string& input) -> std::string {
      try {
        std::size_t pos = 0;
        const long long v = std::stoll(input, &pos);
        if (pos == input.size() && v >= 1) return {};
      } catch (const std::exception&) {
      }
      return "must be an integer >= 1, got '" + input + "'";
    },
    "INT>=1");

struct Common {
  std::uint64_t seed = 0;
  bool quiet = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Seed for synthetic data, initialization and shuffling")
      ->capture_default_str();
  sub->add_flag("--quiet", c.quiet, "Suppress progress output on stderr");
}

void add_data(CLI::App* sub, std::string& data, bool& synth) {
  sub->add_option("--data", data,
                  "Dataset file or directory. Detection directories hold d00.csv (training) and "
                  "d00_te.csv plus dNN_te.csv (testing); rul directories hold train_*.txt, test_*.txt "
                  "and optionally RUL_*.txt");
  sub->add_flag("--synth", synth, "Use the synthetic surrogate generated from --seed instead of --data");
}

std::optional<fs::path> path_or_none(const std::string& s) {
  return s.empty() ? std::nullopt : std::optional<fs::path>(s);
}

int run_synth(Task task, cli::DataSpec spec, const fs::path& out, bool quiet) {
  nlohmann::json config = {{"command", "synth"},      {"task", to_string(task)},
                           {"runs", spec.runs},        {"test_runs", spec.test_runs},
                           {"fault_runs", spec.fault_runs}, {"length", spec.length},
                           {"seed", spec.seed}};
  auto files = cli::synth_training(task, spec);
  auto testing = cli::synth_testing(task, spec);
  files.insert(files.end(), std::make_move_iterator(testing.begin()), std::make_move_iterator(testing.end()));
  const auto names = cli::write_dataset(task, files, out);
  cli::write_manifest(out, "synth", config, spec.seed, names);
  if (!quiet) {
    for (const auto& n : names) std::cerr << "wrote " << (out / n).string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Gradient-sign adversarial attacks against time-series anomaly detection and "
               "remaining-useful-life models, with epsilon-sweep robustness reports.\n"
               "Exit codes: 0 success, 2 usage or config error, 3 data error, 4 numerical failure.",
               "phmadv");
  app.set_version_flag("--version", version_text(), "Print the tool version and artifact format versions");
  app.set_config("--config", "", "JSON file of option values; flags given on the command line win");
  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.require_subcommand(1);

  // synth
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset in the canonical file formats");
  Common synth_common;
  std::string synth_task = "detection";
  cli::DataSpec synth_spec;
  std::string synth_out;
  synth->fallthrough();
  add_common(synth, synth_common);
  synth->add_option("--task", synth_task, "Dataset kind: detection (TEP-style CSV) or rul (C-MAPSS text)")
      ->check(CLI::IsMember({"detection", "rul", "prognostics"}))
      ->capture_default_str();
  synth->add_option("--runs", synth_spec.runs, "Training runs (default 20 for detection, 40 for rul)")
      ->check(kAtLeastOne);
  synth->add_option("--test-runs", synth_spec.test_runs, "Normal test runs, or test engines for rul (default: --runs)")
      ->check(kAtLeastOne);
  synth->add_option("--fault-runs", synth_spec.fault_runs,
                    "Detection fault test runs, spread over labels 1..20 (default: --test-runs)")
      ->check(kAtLeastOne);
  synth->add_option("--length", synth_spec.length, "Detection run length in samples")
      ->check(kAtLeastOne)
      ->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();

  // train
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model; detection also calibrates residual statistics");
  Common train_common;
  std::string train_task;
  std::string train_data;
  std::string train_out;
  cli::TrainOptions topt;
  train_cmd->fallthrough();
  add_common(train_cmd, train_common);
  train_cmd->add_option("--task", train_task, "detection or rul")
      ->check(CLI::IsMember({"detection", "rul", "prognostics"}))
      ->required();
  add_data(train_cmd, train_data, topt.data.synth);
  train_cmd->add_option("--runs", topt.data.runs, "Synthetic training runs (default 20 detection, 40 rul)")
      ->check(kAtLeastOne);
  train_cmd->add_option("--length", topt.data.length, "Synthetic detection run length")
      ->check(kAtLeastOne)
      ->capture_default_str();
  train_cmd->add_option("--window", topt.lstm.window, "Detection window length T (rul uses 35)")
      ->check(kAtLeastOne)
      ->capture_default_str();
  train_cmd->add_option("--hidden", topt.lstm.hidden, "LSTM hidden units")
      ->check(kAtLeastOne)
      ->capture_default_str();
  train_cmd->add_option("--layers", topt.lstm.layers, "Stacked LSTM layers")
      ->check(kAtLeastOne)
      ->capture_default_str();
  train_cmd->add_option("--epochs", topt.train.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--batch-size", topt.train.batch_size, "Minibatch size")
      ->check(kAtLeastOne)
      ->capture_default_str();
  train_cmd->add_option("--lr", topt.train.step_size, "Adam step size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--sample-fraction", topt.sample_fraction,
                        "Keep every round(1/f)-th training window")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  train_cmd->add_option("--holdout", topt.holdout,
                        "Fraction of normal runs held out to fit residual statistics (detection)")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  train_cmd->add_option("--quantile", topt.quantile, "Calibration score quantile used as the alarm threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  train_cmd->add_option("--rul-cap", topt.rul_cap, "Cap on RUL targets in cycles")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--out", train_out, "Output directory")->required();

  // attack-eval
  CLI::App* eval_cmd = app.add_subcommand("attack-eval", "Attack every test window over an epsilon grid and report metrics");
  Common eval_common;
  std::string eval_task;
  std::string eval_data;
  std::string eval_model;
  std::string eval_stats;
  std::string eval_out;
  std::string eval_attack = "bim";
  double eval_alpha = 0.0;
  std::size_t eval_runs = 0;
  cli::EvalOptions eopt;
  eval_cmd->fallthrough();
  add_common(eval_cmd, eval_common);
  eval_cmd->add_option("--task", eval_task, "detection or rul; must match the model when given")
      ->check(CLI::IsMember({"detection", "rul", "prognostics"}));
  eval_cmd->add_option("--model", eval_model, "model.json written by train")->required();
  eval_cmd->add_option("--stats", eval_stats, "stats.json for detection (default: next to the model)");
  add_data(eval_cmd, eval_data, eopt.data.synth);
  eval_cmd->add_option("--runs", eval_runs, "Synthetic normal test runs, or test engines for rul (default 20 / 40)")
      ->check(kAtLeastOne);
  eval_cmd->add_option("--fault-runs", eopt.data.fault_runs, "Synthetic detection fault runs (default: --runs)")
      ->check(kAtLeastOne);
  eval_cmd->add_option("--length", eopt.data.length, "Synthetic detection run length")
      ->check(kAtLeastOne)
      ->capture_default_str();
  eval_cmd->add_option("--attack", eval_attack, "fgsm or bim")
      ->check(CLI::IsMember({"fgsm", "bim"}))
      ->capture_default_str();
  eval_cmd->add_option("--epsilons", eopt.sweep.epsilons,
                       "Comma-separated budgets starting at 0 (default 0,0.00025,0.00825,0.035 for "
                       "detection and 0,0.025,0.045,0.065 for rul)")
      ->delimiter(',');
  eval_cmd->add_option("--iterations", eopt.sweep.iterations, "BIM iterations")
      ->check(kAtLeastOne)
      ->capture_default_str();
  eval_cmd->add_option("--alpha", eval_alpha, "BIM step size, capped at epsilon (default epsilon / iterations)")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--batch-size", eopt.sweep.batch_size, "Windows per attack batch")
      ->check(kAtLeastOne)
      ->capture_default_str();
  eval_cmd->add_option("--sample-fraction", eopt.sample_fraction, "Keep every round(1/f)-th test window")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  eval_cmd->add_option("--rul-cap", eopt.rul_cap, "Cap on RUL targets in cycles")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval_cmd->add_flag("--dump-curves", eopt.dump_curves,
                     "Write ROC and PR points (detection) or true and predicted RUL per window (rul) for each epsilon");
  eval_cmd->add_option("--dump-signals", eopt.dump_signals,
                       "Write clean and perturbed series of this many evenly spaced test windows per epsilon");
  eval_cmd->add_flag("--raw-units", eopt.raw_units, "Write signal dumps de-standardized to sensor units");
  eval_cmd->add_option("--out", eval_out, "Output directory")->required();

  // report
  CLI::App* report_cmd = app.add_subcommand("report", "Render a saved report.json");
  std::string report_input;
  std::string report_format = "table";
  std::string report_output;
  report_cmd->fallthrough();
  report_cmd->add_option("--input", report_input, "report.json, or a directory containing one")->required();
  report_cmd->add_option("--format", report_format, "table, csv or json")
      ->check(CLI::IsMember({"table", "csv", "json"}))
      ->capture_default_str();
  report_cmd->add_option("--output", report_output, "Write here instead of stdout");

  for (CLI::App* sub : {synth, train_cmd, eval_cmd, report_cmd}) {
    sub->footer("Options may also come from --config FILE.json (keys are flag names; flags win).");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      synth_spec.seed = synth_common.seed;
      return run_synth(parse_task(synth_task), synth_spec, synth_out, synth_common.quiet);
    }
    if (train_cmd->parsed()) {
      topt.task = parse_task(train_task);
      topt.data.path = path_or_none(train_data);
      topt.data.seed = train_common.seed;
      topt.train.seed = train_common.seed;
      topt.out = train_out;
      topt.data.validate();
      topt.config = {{"command", "train"},
                     {"task", to_string(topt.task)},
                     {"synth", topt.data.synth},
                     {"runs", topt.data.runs},
                     {"length", topt.data.length},
                     {"window", topt.lstm.window},
                     {"hidden", topt.lstm.hidden},
                     {"layers", topt.lstm.layers},
                     {"epochs", topt.train.epochs},
                     {"batch_size", topt.train.batch_size},
                     {"lr", topt.train.step_size},
                     {"sample_fraction", topt.sample_fraction},
                     {"holdout", topt.holdout},
                     {"quantile", topt.quantile},
                     {"rul_cap", topt.rul_cap},
                     {"seed", train_common.seed}};
      cli::run_train(topt, train_common.quiet ? nullptr : &std::cerr);
      return 0;
    }
    if (eval_cmd->parsed()) {
      eopt.model = eval_model;
      eopt.stats = path_or_none(eval_stats);
      if (!eval_task.empty()) eopt.task = parse_task(eval_task);
      eopt.data.path = path_or_none(eval_data);
      eopt.data.seed = eval_common.seed;
      eopt.data.test_runs = eval_runs;
      eopt.sweep.attack = parse_attack_kind(eval_attack);
      if (eval_cmd->count("--alpha")) eopt.sweep.alpha = eval_alpha;
      eopt.out = eval_out;
      eopt.data.validate();
      if (!eopt.sweep.epsilons.empty()) eopt.sweep.validate();
      eopt.config = {{"command", "attack-eval"},
                     {"task", eopt.task ? nlohmann::json(to_string(*eopt.task)) : nlohmann::json(nullptr)},
                     {"synth", eopt.data.synth},
                     {"runs", eval_runs},
                     {"fault_runs", eopt.data.fault_runs},
                     {"length", eopt.data.length},
                     {"attack", eval_attack},
                     {"epsilons", eopt.sweep.epsilons},
                     {"iterations", eopt.sweep.iterations},
                     {"alpha", eopt.sweep.alpha ? nlohmann::json(*eopt.sweep.alpha) : nlohmann::json(nullptr)},
                     {"batch_size", eopt.sweep.batch_size},
                     {"sample_fraction", eopt.sample_fraction},
                     {"rul_cap", eopt.rul_cap},
                     {"dump_curves", eopt.dump_curves},
                     {"dump_signals", eopt.dump_signals},
                     {"raw_units", eopt.raw_units},
                     {"seed", eval_common.seed}};
      cli::run_attack_eval(eopt, eval_common.quiet ? nullptr : &std::cerr);
      return 0;
    }
    if (report_cmd->parsed()) {
      fs::path input = report_input;
      if (fs::is_directory(input)) input /= "report.json";
      const RobustnessReport r = RobustnessReport::from_json(load_json(input));
      r.validate();
      std::string text;
      if (report_format == "csv") text = r.to_csv();
      else if (report_format == "json") text = r.to_json().dump(2) + "\n";
      else text = r.to_table();
      if (report_output.empty()) std::cout << text;
      else write_text(report_output, text);
      return 0;
    }
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const UndefinedMetricError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const RegularizationError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}
