#include "obree/report_io.hpp"

#include "obree/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace obree {

using nlohmann::json;

ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  throw ConfigError("format: expected 'csv' or 'json', got '" + std::string(name) + "'");
}

std::string format_double(double x) {
  if (std::isnan(x)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string estimates_csv(const ExperimentReport& report) {
  const auto names = report.config.component_names();
  std::string out = "setting,estimator,replication,component,value\n";
  for (const EstimatorRun& run : report.runs) {
    const std::string prefix = report.config.setting + "," + std::string(to_string(run.id)) + ",";
    for (std::size_t r = 0; r < run.records.size(); ++r) {
      const EstimateRecord& rec = run.records[r];
      for (std::size_t j = 0; j < names.size(); ++j) {
        out += prefix + std::to_string(r + 1) + "," + names[j] + ",";
        out += rec.value ? format_double((*rec.value)(static_cast<Eigen::Index>(j))) : "NA";
        out += "\n";
      }
    }
  }
  return out;
}

std::string summary_csv(const ExperimentReport& report) {
  const auto names = report.config.component_names();
  std::string out =
      "setting,estimator,component,n_ok,bias,se_bias,variance,rmse,q05,q25,q50,q75,q95,"
      "convergence_failures,replica_failures\n";
  for (const EstimatorRun& run : report.runs) {
    const SummaryStats& s = run.summary;
    for (std::size_t j = 0; j < names.size(); ++j) {
      const auto k = static_cast<Eigen::Index>(j);
      out += report.config.setting + "," + std::string(to_string(run.id)) + "," + names[j] + ",";
      out += std::to_string(s.n_ok) + ",";
      out += format_double(s.bias(k)) + "," + format_double(s.se_bias(k)) + ",";
      out += (s.variance ? format_double((*s.variance)(k)) : "NA") + ",";
      out += format_double(s.rmse(k));
      for (const auto& q : s.quantiles) out += "," + format_double(q(k));
      out += "," + std::to_string(s.convergence_failures) + "," +
             std::to_string(s.replica_failures) + "\n";
    }
  }
  return out;
}

std::string diagnostics_csv(const ExperimentReport& report) {
  std::string out = "setting,estimator,replication,status,iterations,replica_failures,residual\n";
  for (const EstimatorRun& run : report.runs) {
    for (std::size_t r = 0; r < run.records.size(); ++r) {
      const EstimateRecord& rec = run.records[r];
      out += report.config.setting + "," + std::string(to_string(run.id)) + "," +
             std::to_string(r + 1) + "," + rec.status + "," + std::to_string(rec.iterations) + "," +
             std::to_string(rec.replica_failures) + "," +
             (rec.residual ? format_double(*rec.residual) : "NA") + "\n";
    }
  }
  return out;
}

std::string manifest_json(const ExperimentConfig& config) {
  json doc;
  doc["obree_manifest"] = 1;
  doc["config"] = export_config(config);
  return doc.dump(2) + "\n";
}

namespace {

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isnan(v(i))) out.push_back(nullptr);
    else out.push_back(v(i));
  }
  return out;
}

ParamVector vector_from_json(const json& v) {
  ParamVector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& text, const std::filesystem::path& path) {
  if (text == "NA") return std::nan("");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty())
    throw std::runtime_error(path.string() + ": bad number '" + text + "'");
  return v;
}

}  // namespace

std::string report_json(const ExperimentReport& report) {
  json doc;
  doc["manifest"] = json::parse(manifest_json(report.config));
  doc["components"] = report.config.component_names();
  json runs = json::array();
  for (const EstimatorRun& run : report.runs) {
    json records = json::array();
    for (std::size_t r = 0; r < run.records.size(); ++r) {
      const EstimateRecord& rec = run.records[r];
      json jr;
      jr["replication"] = r + 1;
      jr["status"] = rec.status;
      jr["iterations"] = rec.iterations;
      jr["replica_failures"] = rec.replica_failures;
      jr["residual"] = rec.residual ? json(*rec.residual) : json(nullptr);
      jr["value"] = rec.value ? vector_json(*rec.value) : json(nullptr);
      records.push_back(jr);
    }
    const SummaryStats& s = run.summary;
    json summary;
    summary["n_ok"] = s.n_ok;
    summary["bias"] = vector_json(s.bias);
    summary["se_bias"] = vector_json(s.se_bias);
    summary["variance"] = s.variance ? vector_json(*s.variance) : json(nullptr);
    summary["rmse"] = vector_json(s.rmse);
    json quantiles = json::object();
    for (std::size_t k = 0; k < kSummaryQuantiles.size(); ++k) {
      char key[8];
      std::snprintf(key, sizeof key, "q%02d", static_cast<int>(std::lround(kSummaryQuantiles[k] * 100)));
      quantiles[key] = vector_json(s.quantiles[k]);
    }
    summary["quantiles"] = quantiles;
    summary["convergence_failures"] = s.convergence_failures;
    summary["replica_failures"] = s.replica_failures;
    runs.push_back({{"estimator", std::string(to_string(run.id))},
                    {"records", records},
                    {"summary", summary}});
  }
  doc["runs"] = runs;
  return doc.dump(2) + "\n";
}

void export_report(const ExperimentReport& report, const std::filesystem::path& dir,
                   ReportFormat format) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error(dir.string() + ": cannot create directory: " + ec.message());
  write_file(dir / "manifest.json", manifest_json(report.config));
  if (format == ReportFormat::json) {
    write_file(dir / "report.json", report_json(report));
    return;
  }
  write_file(dir / "estimates.csv", estimates_csv(report));
  write_file(dir / "summary.csv", summary_csv(report));
  write_file(dir / "diagnostics.csv", diagnostics_csv(report));
}

ExperimentReport read_report(const std::filesystem::path& dir) {
  ExperimentReport report;
  report.config = load_config_file((dir / "manifest.json").string());
  const auto R = static_cast<std::size_t>(report.config.R);
  const Eigen::Index p = report.config.theta0.size();
  for (EstimatorId id : report.config.estimators)
    report.runs.push_back({id, std::vector<EstimateRecord>(R), {}});
  auto run_index = [&](const std::string& name, const std::filesystem::path& path) {
    const EstimatorId id = parse_estimator_id(name);
    for (std::size_t i = 0; i < report.runs.size(); ++i)
      if (report.runs[i].id == id) return i;
    throw std::runtime_error(path.string() + ": estimator '" + name + "' not in manifest");
  };
  auto replication = [&](const std::string& text, const std::filesystem::path& path) {
    const double r = parse_number(text, path);
    if (!(r >= 1 && r <= static_cast<double>(R)))
      throw std::runtime_error(path.string() + ": replication out of range");
    return static_cast<std::size_t>(r) - 1;
  };

  if (std::filesystem::exists(dir / "report.json")) {
    const json doc = json::parse(read_file(dir / "report.json"));
    for (const json& jr : doc.at("runs")) {
      EstimatorRun& run = report.runs[run_index(jr.at("estimator").get<std::string>(), dir / "report.json")];
      for (const json& rec : jr.at("records")) {
        EstimateRecord& out = run.records.at(rec.at("replication").get<std::size_t>() - 1);
        out.status = rec.at("status").get<std::string>();
        out.iterations = rec.at("iterations").get<int>();
        out.replica_failures = rec.at("replica_failures").get<int>();
        if (!rec.at("residual").is_null()) out.residual = rec.at("residual").get<double>();
        if (!rec.at("value").is_null()) out.value = vector_from_json(rec.at("value"));
      }
    }
    summarize_runs(report);
    return report;
  }

  const auto names = report.config.component_names();
  std::map<std::string, Eigen::Index> component;
  for (std::size_t j = 0; j < names.size(); ++j) component[names[j]] = static_cast<Eigen::Index>(j);

  const std::filesystem::path est_path = dir / "estimates.csv";
  std::istringstream est(read_file(est_path));
  std::string line;
  std::getline(est, line);
  std::vector<std::vector<ParamVector>> values(report.runs.size(),
                                               std::vector<ParamVector>(R, ParamVector::Zero(p)));
  while (std::getline(est, line)) {
    const auto cells = split(line);
    if (cells.size() != 5) throw std::runtime_error(est_path.string() + ": malformed row '" + line + "'");
    const std::size_t i = run_index(cells[1], est_path);
    const std::size_t r = replication(cells[2], est_path);
    const auto it = component.find(cells[3]);
    if (it == component.end()) throw std::runtime_error(est_path.string() + ": unknown component " + cells[3]);
    values[i][r](it->second) = parse_number(cells[4], est_path);
  }

  const std::filesystem::path diag_path = dir / "diagnostics.csv";
  std::istringstream diag(read_file(diag_path));
  std::getline(diag, line);
  while (std::getline(diag, line)) {
    const auto cells = split(line);
    if (cells.size() != 7) throw std::runtime_error(diag_path.string() + ": malformed row '" + line + "'");
    const std::size_t i = run_index(cells[1], diag_path);
    const std::size_t r = replication(cells[2], diag_path);
    EstimateRecord& rec = report.runs[i].records[r];
    rec.status = cells[3];
    rec.iterations = static_cast<int>(parse_number(cells[4], diag_path));
    rec.replica_failures = static_cast<int>(parse_number(cells[5], diag_path));
    const double residual = parse_number(cells[6], diag_path);
    if (!std::isnan(residual)) rec.residual = residual;
    if (!values[i][r].hasNaN()) rec.value = values[i][r];
  }
  summarize_runs(report);
  return report;
}

}  // namespace obree
