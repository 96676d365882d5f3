#include "phmadv/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "phmadv/error.hpp"

namespace phmadv {
namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

bool parse_number(std::string_view text, double& out) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma - start);
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back()))) {
      field.remove_suffix(1);
    }
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front()))) {
      field.remove_prefix(1);
    }
    fields.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

int to_run_id(double v, const std::filesystem::path& path, std::size_t line) {
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw ParseError(where(path, line) + "run id must be an integer");
  }
  return static_cast<int>(v);
}

// Accumulates rows for one run before they are packed into tensors.
struct RunBuilder {
  int id = 0;
  std::vector<double> time;
  std::vector<double> settings;
  std::vector<double> samples;
};

}  // namespace

std::string to_string(Status status) {
  return status == Status::Normal ? "normal" : "abnormal";
}

std::string to_string(Task task) { return task == Task::Detection ? "detection" : "rul"; }

Task parse_task(const std::string& text) {
  if (text == "detection") return Task::Detection;
  if (text == "rul" || text == "prognostics") return Task::Prognostics;
  throw ContractError("unknown task '" + text + "' (expected detection or rul)");
}

Status RunRecord::status_at(std::size_t row) const {
  if (label.value_or(0) > 0 && fault_onset && row >= *fault_onset) return Status::Abnormal;
  return Status::Normal;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf, ptr);
}

std::vector<RunRecord> read_cmapss(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::map<int, RunBuilder> runs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto fields = split_whitespace(line);
    if (fields.size() != kCmapssColumns) {
      throw ParseError(where(path, line_no) + "expected " + std::to_string(kCmapssColumns) +
                       " fields, got " + std::to_string(fields.size()));
    }
    double values[kCmapssColumns];
    for (std::size_t i = 0; i < kCmapssColumns; ++i) {
      if (!parse_number(fields[i], values[i])) {
        throw ParseError(where(path, line_no) + "field " + std::to_string(i + 1) +
                         " is not a number: '" + std::string(fields[i]) + "'");
      }
    }
    const int id = to_run_id(values[0], path, line_no);
    RunBuilder& run = runs[id];
    run.id = id;
    if (!run.time.empty() && values[1] <= run.time.back()) {
      throw OrderingError(where(path, line_no) + "cycle " + format_double(values[1]) +
                          " of engine " + std::to_string(id) + " does not follow cycle " +
                          format_double(run.time.back()));
    }
    run.time.push_back(values[1]);
    run.settings.insert(run.settings.end(), values + 2, values + 2 + kCmapssSettings);
    run.samples.insert(run.samples.end(), values + 2 + kCmapssSettings, values + kCmapssColumns);
  }

  std::vector<RunRecord> out;
  out.reserve(runs.size());
  for (auto& [id, b] : runs) {
    RunRecord r;
    r.run_id = id;
    const std::size_t rows = b.time.size();
    r.samples = Tensor(Shape{rows, kCmapssSensors}, std::move(b.samples));
    r.settings = Tensor(Shape{rows, kCmapssSettings}, std::move(b.settings));
    r.time = std::move(b.time);
    out.push_back(std::move(r));
  }
  return out;
}

void write_cmapss(const std::filesystem::path& path, std::span<const RunRecord> runs) {
  std::ofstream out = open_output(path);
  for (const RunRecord& run : runs) {
    if (run.width() != kCmapssSensors) {
      throw SchemaError("C-MAPSS export needs 21 sensor channels, run " +
                        std::to_string(run.run_id) + " has " + std::to_string(run.width()));
    }
    const bool has_settings = run.settings.rank() == 2 && run.settings.dim(0) == run.length();
    for (std::size_t r = 0; r < run.length(); ++r) {
      out << run.run_id << ' '
          << format_double(r < run.time.size() ? run.time[r] : static_cast<double>(r + 1));
      for (std::size_t s = 0; s < kCmapssSettings; ++s) {
        out << ' ' << format_double(has_settings ? run.settings[r * kCmapssSettings + s] : 0.0);
      }
      for (std::size_t c = 0; c < kCmapssSensors; ++c) {
        out << ' ' << format_double(run.samples[r * kCmapssSensors + c]);
      }
      out << '\n';
    }
  }
}

std::vector<RunRecord> read_tep_csv(const std::filesystem::path& path, int label, TepSplit split) {
  if (label < 0 || label > 20) {
    throw ContractError("TEP label must be 0 (normal) or a fault class 1..20");
  }
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path.string() + ": missing header row");
  const auto header = split_commas(line);
  if (header.size() < 2 || header[0] != "run" || header[1] != "t") {
    throw SchemaError(path.string() + ": missing header row `run,t,m1..m52`");
  }
  for (std::size_t i = 2; i < header.size(); ++i) {
    if (header[i] != "m" + std::to_string(i - 1)) {
      throw SchemaError(path.string() + ": header column " + std::to_string(i + 1) + " is '" +
                        std::string(header[i]) + "', expected m" + std::to_string(i - 1));
    }
  }
  const std::size_t width = header.size() - 2;
  if (width != kTepChannels) {
    throw SchemaError(path.string() + ": expected 52 measurement columns, header has " +
                      std::to_string(width));
  }

  std::vector<RunBuilder> runs;
  std::map<int, std::size_t> index;
  std::size_t line_no = 1;
  std::vector<double> values(header.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto fields = split_commas(line);
    if (fields.size() != header.size()) {
      throw SchemaError(where(path, line_no) + "expected " + std::to_string(header.size()) +
                        " columns, got " + std::to_string(fields.size()));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (!parse_number(fields[i], values[i])) {
        throw ParseError(where(path, line_no) + "column " + std::to_string(i + 1) +
                         " is not a number: '" + std::string(fields[i]) + "'");
      }
    }
    const int id = to_run_id(values[0], path, line_no);
    auto [it, inserted] = index.emplace(id, runs.size());
    if (inserted) runs.push_back(RunBuilder{id, {}, {}, {}});
    RunBuilder& run = runs[it->second];
    if (!run.time.empty() && values[1] <= run.time.back()) {
      throw OrderingError(where(path, line_no) + "sample index of run " + std::to_string(id) +
                          " is not increasing");
    }
    run.time.push_back(values[1]);
    run.samples.insert(run.samples.end(), values.begin() + 2, values.end());
  }

  std::vector<RunRecord> out;
  out.reserve(runs.size());
  for (RunBuilder& b : runs) {
    RunRecord r;
    r.run_id = b.id;
    r.label = label;
    r.samples = Tensor(Shape{b.time.size(), width}, std::move(b.samples));
    r.time = std::move(b.time);
    r.sampling_period_minutes = kTepSamplingMinutes;
    if (label > 0) {
      r.fault_onset = split == TepSplit::Training ? kTepTrainingOnset : kTepTestingOnset;
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_tep_csv(const std::filesystem::path& path, std::span<const RunRecord> runs) {
  std::ofstream out = open_output(path);
  out << "run,t";
  for (std::size_t c = 1; c <= kTepChannels; ++c) out << ",m" << c;
  out << '\n';
  for (const RunRecord& run : runs) {
    if (run.width() != kTepChannels) {
      throw SchemaError("TEP export needs 52 channels, run " + std::to_string(run.run_id) +
                        " has " + std::to_string(run.width()));
    }
    for (std::size_t r = 0; r < run.length(); ++r) {
      out << run.run_id << ','
          << format_double(r < run.time.size() ? run.time[r] : static_cast<double>(r + 1));
      for (std::size_t c = 0; c < kTepChannels; ++c) {
        out << ',' << format_double(run.samples[r * kTepChannels + c]);
      }
      out << '\n';
    }
  }
}

Standardizer::Standardizer(Tensor mean, Tensor stddev)
    : mean_(std::move(mean)), stddev_(std::move(stddev)) {
  if (mean_.rank() != 1 || mean_.shape() != stddev_.shape()) {
    throw ShapeError("standardizer needs equal-length mean and stddev vectors");
  }
}

Standardizer Standardizer::fit(std::span<const RunRecord> runs) {
  if (runs.empty()) throw ContractError("standardizer needs at least one run");
  const std::size_t width = runs.front().width();
  std::size_t count = 0;
  Tensor mean(Shape{width});
  for (const RunRecord& run : runs) {
    if (run.width() != width) throw ShapeError("runs have differing channel counts");
    for (std::size_t r = 0; r < run.length(); ++r) {
      for (std::size_t c = 0; c < width; ++c) mean[c] += run.samples[r * width + c];
    }
    count += run.length();
  }
  if (count == 0) throw ContractError("standardizer needs at least one sample");
  for (double& v : mean.data()) v /= static_cast<double>(count);

  Tensor sd(Shape{width});
  for (const RunRecord& run : runs) {
    for (std::size_t r = 0; r < run.length(); ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        const double d = run.samples[r * width + c] - mean[c];
        sd[c] += d * d;
      }
    }
  }
  for (double& v : sd.data()) {
    v = count > 1 ? std::sqrt(v / static_cast<double>(count - 1)) : 0.0;
    if (!(v >= kMinSigma)) v = 1.0;
  }
  return Standardizer(std::move(mean), std::move(sd));
}

Tensor Standardizer::apply(const Tensor& rows) const {
  if (rows.rank() != 2 || rows.dim(1) != width()) {
    throw ShapeError("standardizer of width " + std::to_string(width()) + " applied to " +
                     shape_string(rows.shape()));
  }
  Tensor out(rows.shape());
  const std::size_t w = width();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out[i] = (rows[i] - mean_[i % w]) / stddev_[i % w];
  }
  return out;
}

Tensor Standardizer::invert(const Tensor& rows) const {
  if (rows.rank() != 2 || rows.dim(1) != width()) {
    throw ShapeError("standardizer of width " + std::to_string(width()) + " inverted on " +
                     shape_string(rows.shape()));
  }
  Tensor out(rows.shape());
  const std::size_t w = width();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out[i] = rows[i] * stddev_[i % w] + mean_[i % w];
  }
  return out;
}

RunRecord Standardizer::apply(const RunRecord& run) const {
  RunRecord out = run;
  out.samples = apply(run.samples);
  return out;
}

std::vector<RunRecord> Standardizer::apply(std::span<const RunRecord> runs) const {
  std::vector<RunRecord> out;
  out.reserve(runs.size());
  for (const RunRecord& run : runs) out.push_back(apply(run));
  return out;
}

std::vector<WindowedSample> make_windows(const RunRecord& run, std::size_t window, Task task,
                                         double rul_cap) {
  std::vector<WindowedSample> out;
  const std::size_t len = run.length();
  const std::size_t width = run.width();
  if (window == 0) throw ContractError("window length must be positive");
  if (len <= window) return out;
  const std::size_t last_end = task == Task::Detection ? len - 2 : len - 1;
  out.reserve(last_end - (window - 1) + 1);
  for (std::size_t end = window - 1; end <= last_end; ++end) {
    WindowedSample s;
    const double* first = run.samples.data().data() + (end + 1 - window) * width;
    s.window = Tensor(Shape{window, width}, std::vector<double>(first, first + window * width));
    if (task == Task::Detection) {
      const double* next = run.samples.data().data() + (end + 1) * width;
      s.target = Tensor(Shape{width}, std::vector<double>(next, next + width));
    } else {
      const double remaining = static_cast<double>(len - (end + 1));
      s.target = Tensor::scalar(std::min(remaining, rul_cap));
    }
    s.run_id = run.run_id;
    s.end_index = end;
    s.status = run.status_at(end);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<WindowedSample> make_windows(std::span<const RunRecord> runs, std::size_t window,
                                         Task task, double rul_cap) {
  std::vector<WindowedSample> out;
  for (const RunRecord& run : runs) {
    auto part = make_windows(run, window, task, rul_cap);
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return out;
}

std::vector<WindowedSample> every_kth(std::vector<WindowedSample> samples, std::size_t k) {
  if (k == 0) throw ContractError("every_kth needs k >= 1");
  if (k == 1) return samples;
  std::vector<WindowedSample> out;
  out.reserve(samples.size() / k + 1);
  for (std::size_t i = 0; i < samples.size(); i += k) out.push_back(std::move(samples[i]));
  return out;
}

}  // namespace phmadv
