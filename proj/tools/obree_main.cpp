// obree: run experiments, fit one dataset, or self-check against closed forms.
//
// Exit codes: 0 success, 2 config error, 3 runtime failure, 4 oracle failure.

#include "obree/errors.hpp"
#include "obree/harness.hpp"
#include "obree/oracle.hpp"
#include "obree/parallel.hpp"
#include "obree/report_io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;
constexpr int kOracleFailure = 4;

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  int index(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    return -1;
  }
};

std::vector<std::string> split_csv_line(const std::string& raw) {
  std::string line = raw;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> cells;
  std::stringstream in(line);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    const auto a = cell.find_first_not_of(" \t\"");
    const auto b = cell.find_last_not_of(" \t\"");
    cells.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
  }
  return cells;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open data file");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty data file");
  t.header = split_csv_line(line);
  t.columns.resize(t.header.size());
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw std::runtime_error(path + ":" + std::to_string(row) + ": expected " +
                               std::to_string(t.header.size()) + " fields");
    for (std::size_t j = 0; j < cells.size(); ++j) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[j], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cells[j].size())
        throw std::runtime_error(path + ":" + std::to_string(row) + ": column '" + t.header[j] +
                                 "' is not numeric");
      t.columns[j].push_back(v);
    }
  }
  if (t.columns.empty() || t.columns[0].empty()) throw std::runtime_error(path + ": no data rows");
  return t;
}

obree::BinaryResponses binary_column(const std::vector<double>& y, const std::string& path) {
  obree::BinaryResponses out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw std::runtime_error(path + ": y must be 0 or 1");
    out[i] = static_cast<std::uint8_t>(y[i]);
  }
  return out;
}

int run_fit(const std::string& config_path, const std::string& data_path,
            const std::string& estimator_name) {
  // Re-validate with the requested estimator so incompatible pairs fail like a bad config.
  nlohmann::json doc = obree::export_config(obree::load_config_file(config_path));
  doc["estimators"] = nlohmann::json::array({estimator_name});
  obree::ExperimentConfig config = obree::parse_config(doc);
  const obree::EstimatorId id = obree::parse_estimator_id(estimator_name);
  const CsvTable table = read_csv(data_path);
  const int y_col = table.index("y");
  if (y_col < 0) throw std::runtime_error(data_path + ": missing column 'y'");
  const int cluster_col = table.index("cluster");
  std::vector<int> covariates;
  for (int j = 0; j < static_cast<int>(table.header.size()); ++j)
    if (j != y_col && j != cluster_col) covariates.push_back(j);
  const std::vector<double>& y = table.columns[static_cast<std::size_t>(y_col)];
  const auto n = static_cast<Eigen::Index>(y.size());

  auto design = [&] {
    obree::DesignMatrix X(n, static_cast<Eigen::Index>(covariates.size()));
    for (std::size_t k = 0; k < covariates.size(); ++k)
      for (Eigen::Index i = 0; i < n; ++i)
        X(i, static_cast<Eigen::Index>(k)) =
            table.columns[static_cast<std::size_t>(covariates[k])][static_cast<std::size_t>(i)];
    return X;
  };

  obree::EstimateRecord rec;
  switch (config.kind) {
    case obree::ModelKind::toy:
      rec = obree::estimate_toy(config, id, y, 0);
      break;
    case obree::ModelKind::logistic: {
      if (covariates.size() != config.p)
        throw obree::ConfigError("p: config says " + std::to_string(config.p) + " covariates, data has " +
                                 std::to_string(covariates.size()));
      rec = obree::estimate_logistic(config, id, design(), binary_column(y, data_path), 0);
      break;
    }
    case obree::ModelKind::glmm: {
      if (cluster_col < 0) throw std::runtime_error(data_path + ": GLMM data needs a 'cluster' column");
      if (covariates.size() != config.q)
        throw obree::ConfigError("q: config says " + std::to_string(config.q) + " slopes, data has " +
                                 std::to_string(covariates.size()));
      obree::ClusteredData data;
      data.X.resize(n, static_cast<Eigen::Index>(config.q + 1));
      data.X.col(0).setOnes();
      if (config.q > 0) data.X.rightCols(static_cast<Eigen::Index>(config.q)) = design();
      const auto& cluster = table.columns[static_cast<std::size_t>(cluster_col)];
      data.offsets.push_back(0);
      for (std::size_t i = 1; i < cluster.size(); ++i) {
        if (cluster[i] == cluster[i - 1]) continue;
        for (std::size_t k = 0; k + 1 < i; ++k)
          if (cluster[k] == cluster[i])
            throw std::runtime_error(data_path + ": rows of a cluster must be contiguous");
        data.offsets.push_back(i);
      }
      data.offsets.push_back(cluster.size());
      data.validate();
      rec = obree::estimate_glmm(config, id, data, binary_column(y, data_path), 0);
      break;
    }
  }

  nlohmann::json out;
  out["estimator"] = estimator_name;
  out["model"] = config.model_name();
  out["status"] = rec.status;
  out["iterations"] = rec.iterations;
  out["replica_failures"] = rec.replica_failures;
  out["residual"] = rec.residual ? nlohmann::json(*rec.residual) : nlohmann::json(nullptr);
  nlohmann::json estimate = nlohmann::json::object();
  if (rec.value) {
    const auto names = config.component_names();
    for (std::size_t j = 0; j < names.size(); ++j)
      estimate[names[j]] = (*rec.value)(static_cast<Eigen::Index>(j));
  }
  out["estimate"] = rec.value ? estimate : nlohmann::json(nullptr);
  std::cout << out.dump(2) << "\n";
  return rec.value ? 0 : kRuntimeError;
}

int run_experiment_cmd(const std::string& config_path, const std::string& out_dir,
                       const std::optional<std::uint64_t>& seed, int threads,
                       const std::string& format) {
  obree::ExperimentConfig config = obree::load_config_file(config_path);
  if (seed) config.budget.seed = *seed;
  const obree::ReportFormat fmt = obree::parse_report_format(format);
  obree::parallel::set_num_threads(threads);
  const obree::ExperimentReport report = obree::run_experiment(config);
  obree::export_report(report, out_dir, fmt);

  const auto names = config.component_names();
  for (const auto& run : report.runs) {
    std::printf("%-11s ok=%d/%d replica_failures=%d max|bias|=%s\n",
                std::string(obree::to_string(run.id)).c_str(), run.summary.n_ok, config.R,
                run.summary.replica_failures,
                obree::format_double(run.summary.n_ok ? run.summary.bias.cwiseAbs().maxCoeff()
                                                      : std::nan(""))
                    .c_str());
  }
  return 0;
}

int run_oracle_check(bool quick) {
  bool all = true;
  for (const auto& check : obree::run_oracle_checks(quick)) {
    std::printf("%s %s: %s\n", check.passed ? "PASS" : "FAIL", check.name.c_str(),
                check.detail.c_str());
    all = all && check.passed;
  }
  return all ? 0 : kOracleFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative-bootstrap bias reduction"};
  app.require_subcommand(1);

  std::string config_path, out_dir, format = "csv", data_path, estimator;
  std::uint64_t seed = 0;
  int threads = 0;
  bool quick = false;

  auto* experiment = app.add_subcommand("experiment", "Run a Monte Carlo experiment");
  experiment->add_option("--config", config_path, "Config or manifest JSON")->required();
  experiment->add_option("--out", out_dir, "Output directory")->required();
  auto* seed_opt = experiment->add_option("--seed", seed, "Override the base seed");
  experiment->add_option("--threads", threads, "Worker threads (0 = auto)")->check(CLI::NonNegativeNumber);
  experiment->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* fit = app.add_subcommand("fit", "Fit one dataset");
  fit->add_option("--config", config_path, "Config JSON")->required();
  fit->add_option("--data", data_path, "CSV with a y column")->required();
  fit->add_option("--estimator", estimator, "Estimator name")->required();

  auto* oracle = app.add_subcommand("oracle-check", "Closed-form self-checks");
  oracle->add_flag("--quick", quick, "Fewer Monte Carlo draws");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*experiment)
      return run_experiment_cmd(config_path, out_dir,
                                seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt,
                                threads, format);
    if (*fit) return run_fit(config_path, data_path, estimator);
    return run_oracle_check(quick);
  } catch (const obree::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
}
