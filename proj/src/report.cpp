#include "phmadv/report.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "phmadv/error.hpp"

namespace phmadv {

void RobustnessReport::validate() const {
  if (rows.empty()) throw ContractError("report has no rows");
  if (rows.front().epsilon != 0.0) throw ContractError("report row 0 must be the clean epsilon 0");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].epsilon > rows[i - 1].epsilon)) {
      throw ContractError("report epsilons must increase strictly");
    }
  }
}

std::string RobustnessReport::to_csv() const {
  std::ostringstream out;
  if (task == Task::Detection) {
    out << "epsilon,auc_roc,auc_prc\n";
    for (const ReportRow& r : rows) {
      out << format_double(r.epsilon) << ',' << format_double(r.auc_roc) << ','
          << format_double(r.auc_prc) << '\n';
    }
  } else {
    out << "epsilon,mse\n";
    for (const ReportRow& r : rows) out << format_double(r.epsilon) << ',' << format_double(r.mse) << '\n';
  }
  return out.str();
}

nlohmann::json RobustnessReport::to_json() const {
  nlohmann::json j;
  j["format"] = "phmadv.robustness_report";
  j["format_version"] = kReportFormatVersion;
  j["task"] = to_string(task);
  nlohmann::json rows_json = nlohmann::json::array();
  for (const ReportRow& r : rows) {
    if (task == Task::Detection) {
      rows_json.push_back({{"epsilon", r.epsilon}, {"auc_roc", r.auc_roc}, {"auc_prc", r.auc_prc}});
    } else {
      rows_json.push_back({{"epsilon", r.epsilon}, {"mse", r.mse}});
    }
  }
  j["rows"] = std::move(rows_json);
  j["metadata"] = metadata;
  return j;
}

RobustnessReport RobustnessReport::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "phmadv.robustness_report") {
      throw SchemaError("not a robustness report");
    }
    if (j.at("format_version").get<int>() != kReportFormatVersion) {
      throw SchemaError("unsupported report format version " + j.at("format_version").dump());
    }
    RobustnessReport r;
    r.task = parse_task(j.at("task").get<std::string>());
    for (const auto& row : j.at("rows")) {
      ReportRow out;
      out.epsilon = row.at("epsilon").get<double>();
      if (r.task == Task::Detection) {
        out.auc_roc = row.at("auc_roc").get<double>();
        out.auc_prc = row.at("auc_prc").get<double>();
      } else {
        out.mse = row.at("mse").get<double>();
      }
      r.rows.push_back(out);
    }
    if (j.contains("metadata")) r.metadata = j.at("metadata");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed robustness report: ") + e.what());
  }
}

std::string RobustnessReport::to_table() const {
  std::ostringstream out;
  char line[128];
  if (task == Task::Detection) {
    out << "Perturbation magnitude    AUC-ROC    AUC-PRC\n";
    for (const ReportRow& r : rows) {
      std::snprintf(line, sizeof line, "%22.5f %10.4f %10.4f\n", r.epsilon, r.auc_roc, r.auc_prc);
      out << line;
    }
  } else {
    out << "Perturbation magnitude          MSE\n";
    for (const ReportRow& r : rows) {
      std::snprintf(line, sizeof line, "%22.3f %12.2f\n", r.epsilon, r.mse);
      out << line;
    }
  }
  return out.str();
}

std::string curve_csv(const std::vector<CurvePoint>& curve, const std::string& x_name,
                      const std::string& y_name) {
  std::ostringstream out;
  out << "threshold," << x_name << ',' << y_name << '\n';
  for (const CurvePoint& p : curve) {
    out << format_double(p.threshold) << ',' << format_double(p.x) << ',' << format_double(p.y)
        << '\n';
  }
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace phmadv
