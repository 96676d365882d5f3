#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "phmadv/data.hpp"
#include "phmadv/metrics.hpp"

namespace phmadv {

constexpr int kReportFormatVersion = 1;

/// One epsilon row. Detection rows carry AUCs, prognostics rows carry MSE;
/// the unused fields stay NaN.
struct ReportRow {
  double epsilon = 0.0;
  double auc_roc = std::numeric_limits<double>::quiet_NaN();
  double auc_prc = std::numeric_limits<double>::quiet_NaN();
  double mse = std::numeric_limits<double>::quiet_NaN();
};

struct RobustnessReport {
  Task task = Task::Detection;
  std::vector<ReportRow> rows;
  nlohmann::json metadata = nlohmann::json::object();

  /// Row 0 has epsilon 0 and epsilons increase strictly.
  void validate() const;

  /// `epsilon,auc_roc,auc_prc` or `epsilon,mse`, shortest round-trip numbers.
  std::string to_csv() const;
  nlohmann::json to_json() const;
  static RobustnessReport from_json(const nlohmann::json& j);

  /// Fixed-width text table for terminals.
  std::string to_table() const;
};

/// `threshold,x,y` with the given axis names in the header.
std::string curve_csv(const std::vector<CurvePoint>& curve, const std::string& x_name,
                      const std::string& y_name);

/// Writes text to a file, replacing it. Throws DataError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace phmadv
