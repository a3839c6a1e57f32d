#include "obree/harness.hpp"
#include "obree/parallel.hpp"
#include "obree/report_io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace obree;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("obree_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

const char* kLogistic = R"({"model":"logistic","estimators":["mle","robust","obree_mle","obree_r"],
  "p":3,"n":60,"beta":[1.0,-1.0,0.5],"R":6,"H":5,"max_iter":8,"seed":21,"covariate_scale":"sd",
  "contamination_rate":0.05})";

const char* kGlmm = R"({"model":"glmm","estimators":["joint_mode","obree_glmm"],"m":6,"cluster_size":5,
  "q":1,"beta":[0.0,1.0],"sigma2":1.0,"R":3,"H":4,"max_iter":4,"seed":5,"keep_unconverged":true})";

}  // namespace

TEST_CASE("summarize: two-point example") {
  Eigen::MatrixXd est(2, 1);
  est << 0.8, 1.2;
  const SummaryStats s = summarize(est, ParamVector::Constant(1, 1.0));
  CHECK(std::abs(s.bias(0)) < 1e-15);
  REQUIRE(s.variance.has_value());
  CHECK((*s.variance)(0) == doctest::Approx(0.08).epsilon(1e-14));
  CHECK(s.rmse(0) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(s.se_bias(0) == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("summarize: exact estimates give zero bias and RMSE") {
  const ParamVector theta = (ParamVector(2) << 1.5, -2.0).finished();
  Eigen::MatrixXd est = theta.transpose().replicate(5, 1);
  const SummaryStats s = summarize(est, theta);
  CHECK(s.bias.norm() == 0.0);
  CHECK(s.rmse.norm() == 0.0);
}

TEST_CASE("summarize agrees with a naive two-pass computation") {
  RandomStream g = derive_stream(StreamKey{77, {{TagLabel::unit, 1}}});
  for (int trial = 0; trial < 20; ++trial) {
    const int R = 2 + trial * 7, p = 3;
    Eigen::MatrixXd est(R, p);
    for (int r = 0; r < R; ++r)
      for (int j = 0; j < p; ++j) est(r, j) = 10.0 * g.normal() + j;
    const ParamVector theta = (ParamVector(3) << 0.1, 1.2, 1.9).finished();
    const SummaryStats s = summarize(est, theta);
    for (int j = 0; j < p; ++j) {
      double mean = 0.0;
      for (int r = 0; r < R; ++r) mean += est(r, j);
      mean /= R;
      double ss = 0.0, se = 0.0;
      for (int r = 0; r < R; ++r) {
        ss += (est(r, j) - mean) * (est(r, j) - mean);
        se += (est(r, j) - theta(j)) * (est(r, j) - theta(j));
      }
      const double var = ss / (R - 1);
      CHECK(s.bias(j) == doctest::Approx(mean - theta(j)).epsilon(1e-12));
      CHECK((*s.variance)(j) == doctest::Approx(var).epsilon(1e-12));
      CHECK(s.rmse(j) == doctest::Approx(std::sqrt(se / R)).epsilon(1e-12));
      // RMSE^2 = bias^2 + variance with the 1/R normalisation of the variance.
      CHECK(std::abs(s.rmse(j) * s.rmse(j) - (s.bias(j) * s.bias(j) + var * (R - 1.0) / R)) <
            1e-10 * (1.0 + s.rmse(j) * s.rmse(j)));
    }
  }
}

TEST_CASE("type-7 quantiles") {
  // R: quantile(c(1, 2, 3, 4), c(.05, .25, .5, .75, .95), type = 7)
  const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  CHECK(quantile_type7(v, 0.05) == doctest::Approx(1.15));
  CHECK(quantile_type7(v, 0.25) == doctest::Approx(1.75));
  CHECK(quantile_type7(v, 0.50) == doctest::Approx(2.5));
  CHECK(quantile_type7(v, 0.75) == doctest::Approx(3.25));
  CHECK(quantile_type7(v, 0.95) == doctest::Approx(3.85));
  CHECK(quantile_type7({7.0}, 0.3) == 7.0);
  CHECK(std::isnan(quantile_type7({}, 0.5)));
}

TEST_CASE("R = 1: variance absent, and two runs give identical bytes") {
  const ExperimentConfig c = parse_config_text(
      R"({"model":"toy:exp_rate","n":20,"theta0":[1.0],"estimators":["mle","obree_mle"],"R":1,"H":10,"seed":7})");
  const ExperimentReport a = run_experiment(c), b = run_experiment(c);
  CHECK_FALSE(a.run(EstimatorId::mle).summary.variance.has_value());
  CHECK(estimates_csv(a) == estimates_csv(b));
  CHECK(summary_csv(a) == summary_csv(b));
  CHECK(diagnostics_csv(a) == diagnostics_csv(b));
}

TEST_CASE("toy exp_rate: MLE bias near 1/(n-1), OBREE bias near zero") {
  const ExperimentConfig c = parse_config_text(
      R"({"model":"toy:exp_rate","n":20,"theta0":[1.0],"estimators":["mle","obree_mle"],"R":1500,"H":20,"seed":8})");
  const ExperimentReport rep = run_experiment(c);
  const SummaryStats& mle = rep.run(EstimatorId::mle).summary;
  const SummaryStats& ob = rep.run(EstimatorId::obree_mle).summary;
  CHECK(std::abs(mle.bias(0) - 1.0 / 19.0) < 4.0 * mle.se_bias(0));
  CHECK(std::abs(ob.bias(0)) < 4.0 * ob.se_bias(0));
  CHECK(ob.convergence_failures == 0);
  for (const EstimateRecord& r : rep.run(EstimatorId::obree_mle).records) {
    REQUIRE(r.status == "converged");
    CHECK(*r.residual <= c.budget.tol);
  }
}

TEST_CASE("reports do not depend on the thread count") {
  for (const char* text : {kLogistic, kGlmm}) {
    const ExperimentConfig c = parse_config_text(text);
    parallel::set_num_threads(1);
    const ExperimentReport one = run_experiment(c);
    parallel::set_num_threads(4);
    const ExperimentReport four = run_experiment(c);
    parallel::set_num_threads(0);
    CHECK(estimates_csv(one) == estimates_csv(four));
    CHECK(summary_csv(one) == summary_csv(four));
    CHECK(diagnostics_csv(one) == diagnostics_csv(four));
  }
}

TEST_CASE("export, re-read, replay") {
  const ExperimentConfig c = parse_config_text(kLogistic);
  const ExperimentReport rep = run_experiment(c);

  SUBCASE("csv row count is R x estimators x p") {
    const std::string csv = estimates_csv(rep);
    const auto lines = std::count(csv.begin(), csv.end(), '\n');
    CHECK(lines == 1 + c.R * 4 * 3);
  }
  SUBCASE("failure counts never exceed R") {
    for (const EstimatorRun& run : rep.runs) {
      CHECK(run.summary.convergence_failures <= c.R);
      CHECK(run.summary.n_ok <= c.R);
    }
  }
  SUBCASE("round trip and manifest replay") {
    for (ReportFormat fmt : {ReportFormat::csv, ReportFormat::json}) {
      const auto dir = scratch(fmt == ReportFormat::csv ? "csv" : "json");
      export_report(rep, dir, fmt);
      const ExperimentReport back = read_report(dir);
      CHECK(estimates_csv(back) == estimates_csv(rep));
      CHECK(summary_csv(back) == summary_csv(rep));
      CHECK(diagnostics_csv(back) == diagnostics_csv(rep));

      // Manifest replay reproduces the files byte for byte.
      const auto again = scratch(fmt == ReportFormat::csv ? "csv_replay" : "json_replay");
      export_report(run_experiment(load_config_file((dir / "manifest.json").string())), again, fmt);
      for (const auto& entry : std::filesystem::directory_iterator(dir))
        CHECK(slurp(entry.path()) == slurp(again / entry.path().filename()));
      std::filesystem::remove_all(dir);
      std::filesystem::remove_all(again);
    }
  }
}

TEST_CASE("I/O errors name the path") {
  const ExperimentConfig c = parse_config_text(
      R"({"model":"toy:unif_max","n":5,"theta0":[1.0],"estimators":["mle"],"R":2})");
  const ExperimentReport rep = run_experiment(c);
  const auto blocker = scratch("blocker");
  std::ofstream(blocker) << "x";
  try {
    export_report(rep, blocker / "sub", ReportFormat::csv);
    FAIL("expected an I/O error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("blocker") != std::string::npos);
  }
  std::filesystem::remove(blocker);
}

TEST_CASE("invalid experiments are rejected") {
  ExperimentConfig c = parse_config_text(
      R"({"model":"toy:unif_max","n":5,"theta0":[1.0],"estimators":["mle"],"R":2})");
  c.estimators.clear();
  CHECK_THROWS(run_experiment(c));
  c.estimators = {EstimatorId::mle};
  c.R = 0;
  CHECK_THROWS(run_experiment(c));
}

TEST_CASE("format_double") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(std::nan("")) == "NA");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
