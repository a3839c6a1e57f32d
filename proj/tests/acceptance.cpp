// Acceptance criteria, one PASS/FAIL line each.
//   acceptance        run all nine
//   acceptance K...   run the listed criteria
// Exit status is the number of failed criteria (capped at 100).

#include "obree/glmm.hpp"
#include "obree/harness.hpp"
#include "obree/logistic.hpp"
#include "obree/parallel.hpp"
#include "obree/report_io.hpp"
#include "obree/robust_logistic.hpp"
#include "obree/toy_models.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace obree;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// First component of the replications where both estimators produced a value.
std::pair<std::vector<double>, std::vector<double>> paired_values(const EstimatorRun& a, const EstimatorRun& b) {
  std::pair<std::vector<double>, std::vector<double>> out;
  for (std::size_t r = 0; r < a.records.size(); ++r)
    if (a.records[r].value && b.records[r].value) {
      out.first.push_back((*a.records[r].value)(0));
      out.second.push_back((*b.records[r].value)(0));
    }
  return out;
}

// ---------------------------------------------------------------------------
// 1. Exact fixed points on analytic oracles.
Outcome exact_fixed_points() {
  const auto t0 = std::chrono::steady_clock::now();
  SimulationBudget b;
  b.use_exact_pi = true;
  const DomainBounds box = DomainBounds::uniform(1, 1e-6, 1e6);
  const double tilde = 1.7;
  double worst = 0.0;
  int max_iter = 0;
  bool all_converged = true;
  auto check = [&](ToyModelId id, std::size_t n, double expected) {
    const IBResult r = solve_fixed_point(ToyModel(id, n), ParamVector::Constant(1, tilde), b, box);
    all_converged = all_converged && r.converged();
    max_iter = std::max(max_iter, r.iterations);
    worst = std::max(worst, std::abs(r.theta_hat(0) - expected));
  };
  for (std::size_t n : {5u, 10u, 50u}) check(ToyModelId::exp_rate, n, tilde * (n - 1.0) / n);
  for (std::size_t n : {4u, 9u, 100u}) check(ToyModelId::unif_max, n, tilde * (n + 1.0) / n);
  const double secs = seconds_since(t0);
  return {all_converged && worst <= 1e-8 && max_iter <= 15 && secs < 1.0,
          fmt("max |error| %.2e (<= 1e-8), max iterations %d (<= 15), %.3f s (< 1 s)", worst, max_iter, secs)};
}

// ---------------------------------------------------------------------------
// 2 and 3 share the exp_rate experiment.
ExperimentReport exp_rate_run(int H) {
  const ExperimentConfig c = parse_config_text(fmt(
      R"({"model":"toy:exp_rate","n":20,"theta0":[1.0],"estimators":["mle","obree_mle"],"R":5000,"H":%d,"seed":2024})",
      H));
  return run_experiment(c);
}

Outcome unbiasedness() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentReport rep = exp_rate_run(100);
  const double secs = seconds_since(t0);
  const SummaryStats& mle = rep.run(EstimatorId::mle).summary;
  const SummaryStats& ob = rep.run(EstimatorId::obree_mle).summary;
  const bool obree_ok = std::abs(ob.bias(0)) <= 4.0 * ob.se_bias(0) && ob.n_ok == 5000;
  const bool mle_ok = std::abs(mle.bias(0) - 1.0 / 19.0) <= 4.0 * mle.se_bias(0) &&
                      std::abs(mle.bias(0)) > 4.0 * mle.se_bias(0);
  return {obree_ok && mle_ok && secs < 60.0,
          fmt("OBREE bias %.5f (4 SE %.5f); MLE bias %.5f vs 1/19 = %.5f (4 SE %.5f); %.1f s", ob.bias(0),
              4.0 * ob.se_bias(0), mle.bias(0), 1.0 / 19.0, 4.0 * mle.se_bias(0), secs)};
}

Outcome variance_inflation() {
  std::string detail;
  bool all = true;
  for (int H : {1, 10, 100}) {
    const ExperimentReport rep = exp_rate_run(H);
    const auto [ob, ml] = paired_values(rep.run(EstimatorId::obree_mle), rep.run(EstimatorId::mle));
    const std::size_t R = ob.size();
    auto ratio_of = [&](const std::vector<std::size_t>& idx) {
      double ma = 0, mb = 0;
      for (std::size_t i : idx) {
        ma += ob[i];
        mb += ml[i];
      }
      ma /= idx.size();
      mb /= idx.size();
      double va = 0, vb = 0;
      for (std::size_t i : idx) {
        va += std::pow(ob[i] - ma, 2);
        vb += std::pow(ml[i] - mb, 2);
      }
      return va / vb;
    };
    std::vector<std::size_t> idx(R);
    for (std::size_t i = 0; i < R; ++i) idx[i] = i;
    const double ratio = ratio_of(idx);
    // Paired bootstrap over replications.
    RandomStream boot = derive_stream(StreamKey{7, {{TagLabel::unit, static_cast<std::uint64_t>(H)}}});
    double s = 0, ss = 0;
    const int B = 1000;
    for (int b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < R; ++i) idx[i] = static_cast<std::size_t>(boot.uniform() * R);
      const double r = ratio_of(idx);
      s += r;
      ss += r * r;
    }
    const double se = std::sqrt(ss / B - (s / B) * (s / B));
    const double target = 1.0 + 1.0 / H;
    const bool ok = std::abs(ratio - target) <= 5.0 * se;
    all = all && ok;
    // For reference: with n = 20 the exact large-H ratio is ((n-1)/n)^2 (1 + 1/H), not 1 + 1/H.
    detail += fmt("H=%d ratio %.4f vs %.4f (5 SE %.4f, %zu pairs, finite-n value %.4f) %s; ", H, ratio, target,
                  5.0 * se, R, 0.9025 * target, ok ? "ok" : "off");
  }
  return {all, detail};
}

// ---------------------------------------------------------------------------
// 4. Log-linear residual trace.
Outcome exponential_convergence() {
  SimulationBudget b;
  b.use_exact_pi = true;
  b.tol = 1e-15;
  const std::size_t n = 10;
  const IBResult r = solve_fixed_point(ToyModel(ToyModelId::exp_rate, n), ParamVector::Constant(1, 1.7), b,
                                       DomainBounds::uniform(1, 1e-6, 1e6));
  // Least-squares slope of log residual on iteration, over residuals above round-off.
  std::vector<double> ks, ls;
  for (std::size_t k = 0; k < r.residuals.size(); ++k)
    if (r.residuals[k] > 1e-13) {
      ks.push_back(static_cast<double>(k));
      ls.push_back(std::log(r.residuals[k]));
    }
  const double nk = static_cast<double>(ks.size());
  double mk = 0, ml = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    mk += ks[i] / nk;
    ml += ls[i] / nk;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    sxy += (ks[i] - mk) * (ls[i] - ml);
    sxx += (ks[i] - mk) * (ks[i] - mk);
  }
  const double slope = sxy / sxx;
  const double bound = std::log(1.0 / (n - 1.0)) + 0.1;
  return {ks.size() >= 3 && slope <= bound,
          fmt("slope %.4f over %zu residuals (<= log(1/9) + 0.1 = %.4f)", slope, ks.size(), bound)};
}

// ---------------------------------------------------------------------------
// 5 and 6: logistic desk scale. The covariates use the standard-deviation reading
// of 4/sqrt(n); under the variance reading the n = 200 design is close to
// separation and most replica fits diverge. Discrete responses make pi* piecewise
// constant, so the last IB iterate is kept when the residual stalls above tol.
constexpr const char* kLogisticBase =
    R"("model":"logistic","p":20,"n":200,"H":50,"R":200,"seed":515,"covariate_scale":"sd","keep_unconverged":true)";

Outcome logistic_desk() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentReport rep =
      run_experiment(parse_config_text(std::string("{") + kLogisticBase + R"(,"estimators":["mle","obree_mle"]})"));
  const double secs = seconds_since(t0);
  const SummaryStats& mle = rep.run(EstimatorId::mle).summary;
  const SummaryStats& ob = rep.run(EstimatorId::obree_mle).summary;
  bool smaller = true;
  int covered = 0;
  std::string detail;
  for (Eigen::Index j = 0; j < 4; ++j) {
    smaller = smaller && std::abs(ob.bias(j)) < std::abs(mle.bias(j));
    const bool cover = std::abs(ob.bias(j)) <= 4.0 * ob.se_bias(j);
    covered += cover ? 1 : 0;
    detail += fmt("b%d: MLE %+.3f, OBREE %+.3f +- %.3f%s; ", static_cast<int>(j + 1), mle.bias(j), ob.bias(j),
                  4.0 * ob.se_bias(j), cover ? "" : " (CI excludes 0)");
  }
  detail += fmt("n_ok MLE %d OBREE %d, %.0f s", mle.n_ok, ob.n_ok, secs);
  return {smaller && covered >= 3 && secs < 15 * 60, detail};
}

Outcome contamination_shift() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string est = R"(,"estimators":["obree_mle","obree_r"])";
  const ExperimentReport clean = run_experiment(parse_config_text(std::string("{") + kLogisticBase + est + "}"));
  const ExperimentReport dirty = run_experiment(
      parse_config_text(std::string("{") + kLogisticBase + est + R"(,"contamination_rate":0.02})"));
  const double secs = seconds_since(t0);
  auto shift = [&](EstimatorId id) {
    return (dirty.run(id).summary.bias.head(4) - clean.run(id).summary.bias.head(4)).lpNorm<Eigen::Infinity>();
  };
  const double s_mle = shift(EstimatorId::obree_mle), s_r = shift(EstimatorId::obree_r);
  return {s_r < s_mle && secs < 20 * 60,
          fmt("bias shift OBREE-R %.3f vs OBREE-MLE %.3f; %.0f s", s_r, s_mle, secs)};
}

// ---------------------------------------------------------------------------
// 7. GLMM desk scale. The default slope pattern (5, 5, -7, -7) on n = 50
// observations separates about half of the datasets, so the slopes are scaled by
// 0.3; m, n_i, q, sigma^2, H and R are as specified.
Outcome glmm_desk() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentReport rep = run_experiment(parse_config_text(
      R"({"model":"glmm","m":10,"cluster_size":5,"q":4,"sigma2":1.5,"H":50,"R":200,"seed":717,
          "beta":{"first_two":1.5,"next_two":-2.1,"rest":0,"intercept":0},"keep_unconverged":true,
          "estimators":["joint_mode","obree_glmm"]})"));
  const double secs = seconds_since(t0);
  const SummaryStats& jm = rep.run(EstimatorId::joint_mode).summary;
  const SummaryStats& ob = rep.run(EstimatorId::obree_glmm).summary;
  const Eigen::Index s = jm.bias.size() - 1;
  const bool bias_ok = std::abs(ob.bias(s)) < std::abs(jm.bias(s));
  const bool rmse_ok = ob.rmse(s) <= jm.rmse(s);
  // OBREE drops runs that drift (theta-tilde outside the range of pi*), so also show
  // joint-mode restricted to the replications OBREE kept.
  const auto& jr = rep.run(EstimatorId::joint_mode).records;
  const auto& orr = rep.run(EstimatorId::obree_glmm).records;
  const double truth = rep.config.theta0(s);
  double sum = 0.0, sq = 0.0;
  int kept = 0;
  for (std::size_t r = 0; r < jr.size(); ++r)
    if (jr[r].value && orr[r].value) {
      const double e = (*jr[r].value)(s) - truth;
      sum += e;
      sq += e * e;
      ++kept;
    }
  return {bias_ok && rmse_ok && secs < 30 * 60,
          fmt("sigma2 bias: OBREE %+.3f vs joint-mode %+.3f (%s); RMSE: OBREE %.3f vs joint-mode %.3f (%s); "
              "n_ok OBREE %d joint-mode %d; joint-mode on OBREE's %d: bias %+.3f RMSE %.3f; %.0f s",
              ob.bias(s), jm.bias(s), bias_ok ? "ok" : "off", ob.rmse(s), jm.rmse(s), rmse_ok ? "ok" : "off",
              ob.n_ok, jm.n_ok, kept, sum / kept, std::sqrt(sq / kept), secs)};
}

// ---------------------------------------------------------------------------
// 8. Manifest replay at 1 and 8 threads.
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const std::vector<std::string> configs{
      R"({"model":"toy:unif_max","n":9,"theta0":[2.0],"estimators":["mle","obree_mle"],"R":40,"H":30,"seed":1})",
      R"({"model":"logistic","p":5,"n":80,"estimators":["mle","robust","obree_mle","obree_r"],"R":8,"H":10,
          "max_iter":10,"seed":2,"covariate_scale":"sd","contamination_rate":0.05,"keep_unconverged":true})",
      R"({"model":"glmm","m":8,"cluster_size":5,"q":2,"beta":[0,1,-1],"estimators":["ghq","joint_mode","obree_glmm"],
          "R":4,"H":6,"max_iter":5,"seed":3,"keep_unconverged":true})"};
  const auto root = std::filesystem::temp_directory_path() / "obree_acceptance_replay";
  std::filesystem::remove_all(root);
  int compared = 0;
  for (std::size_t i = 0; i < configs.size(); ++i)
    for (ReportFormat f : {ReportFormat::csv, ReportFormat::json}) {
      const auto first = root / fmt("%zu_%d_first", i, static_cast<int>(f));
      parallel::set_num_threads(1);
      export_report(run_experiment(parse_config_text(configs[i])), first, f);
      for (int threads : {1, 8}) {
        parallel::set_num_threads(threads);
        const auto again = root / fmt("%zu_%d_replay%d", i, static_cast<int>(f), threads);
        export_report(run_experiment(load_config_file((first / "manifest.json").string())), again, f);
        for (const auto& entry : std::filesystem::directory_iterator(first)) {
          ++compared;
          if (slurp(entry.path()) != slurp(again / entry.path().filename())) {
            parallel::set_num_threads(0);
            return {false, "mismatch in " + (again / entry.path().filename()).string()};
          }
        }
      }
    }
  parallel::set_num_threads(0);
  std::filesystem::remove_all(root);
  return {true, fmt("%d files identical across replays at 1 and 8 threads", compared)};
}

// ---------------------------------------------------------------------------
// 9. Estimating-equation suites.
Outcome estimating_equations() {
  const DesignMatrix X = generate_design(200, 20, 0.0, StreamKey{9, {{TagLabel::unit, 0}}}, CovariateScale::sd);
  ParamVector beta = ParamVector::Zero(20);
  beta.head(4) << 5, 5, -7, -7;
  const Eigen::VectorXd w = leverage_weights(X);
  double worst_score = 0, worst_robust = 0, worst_a = 0, worst_ghq = 0;
  int mle_fits = 0, robust_fits = 0;
  for (std::uint64_t r = 1; r <= 40; ++r) {
    RandomStream s = derive_stream(StreamKey{9, {{TagLabel::rep, r}}});
    const BinaryResponses y = simulate_responses(X, beta, s);
    const FitResult mle = fit_mle(X, to_real(y));
    if (mle.ok()) {
      ++mle_fits;
      worst_score = std::max(worst_score, logistic_score(X, to_real(y), mle.beta_hat).lpNorm<Eigen::Infinity>());
    }
    const Eigen::VectorXd py = pseudo_values(y, 0.01).values;
    const FitResult rob = fit_robust(X, py, HuberTuning{1.345}, w);
    if (rob.ok()) {
      ++robust_fits;
      worst_robust = std::max(
          worst_robust, robust_estimating_function(X, py, rob.beta_hat, HuberTuning{1.345}, w).lpNorm<Eigen::Infinity>());
    }
  }
  // a(beta) against explicit two-point enumeration.
  for (double scale : {0.25, 1.0}) {
    const ParamVector b = scale * beta;
    Eigen::VectorXd oracle = Eigen::VectorXd::Zero(20);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double mu = 1.0 / (1.0 + std::exp(-X.row(i).dot(b)));
      const double sd = std::sqrt(mu * (1.0 - mu));
      const double e = mu * std::clamp((1.0 - mu) / sd, -1.345, 1.345) +
                       (1.0 - mu) * std::clamp(-mu / sd, -1.345, 1.345);
      oracle += e * w(i) * sd * X.row(i).transpose();
    }
    oracle /= static_cast<double>(X.rows());
    worst_a = std::max(worst_a, (consistency_correction(X, b, HuberTuning{1.345}, w) - oracle).lpNorm<Eigen::Infinity>());
  }
  // GHQ against a 10^6-point trapezoid rule, single-observation clusters.
  for (double b0 : {1.0, -0.5, 2.5})
    for (double s2 : {0.25, 0.5, 1.0}) {
      ClusteredData d;
      d.X = Eigen::MatrixXd::Ones(2, 1);
      d.offsets = {0, 1, 2};
      d.y = {1, 1};
      const double ghq = marginal_loglik_ghq(d, {ParamVector::Constant(1, b0), s2}, 31) / 2.0;
      const double sigma = std::sqrt(s2), lo = -10.0 * sigma;
      const int N = 1'000'001;
      const double h = 20.0 * sigma / (N - 1);
      double sum = 0.0;
      for (int k = 0; k < N; ++k) {
        const double u = lo + k * h;
        const double f = std::exp(-0.5 * u * u / s2) / std::sqrt(2.0 * M_PI * s2) / (1.0 + std::exp(-(b0 + u)));
        sum += (k == 0 || k == N - 1) ? 0.5 * f : f;
      }
      worst_ghq = std::max(worst_ghq, std::abs(ghq - std::log(sum * h)));
    }
  const bool ok = mle_fits > 0 && robust_fits > 0 && worst_score <= 1e-9 && worst_robust <= 1e-8 &&
                  worst_a <= 1e-12 && worst_ghq <= 1e-8;
  return {ok, fmt("MLE score %.1e (%d fits, <= 1e-9); robust EE %.1e (%d fits, <= 1e-8); a(beta) %.1e (<= 1e-12); "
                  "GHQ vs trapezoid %.1e (<= 1e-8)",
                  worst_score, mle_fits, worst_robust, robust_fits, worst_a, worst_ghq)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"exact fixed points", exact_fixed_points},
      {"unbiasedness (exp_rate)", unbiasedness},
      {"variance inflation 1+1/H", variance_inflation},
      {"exponential convergence", exponential_convergence},
      {"logistic desk scale", logistic_desk},
      {"robust initial estimator under contamination", contamination_shift},
      {"GLMM desk scale", glmm_desk},
      {"manifest replay determinism", determinism},
      {"estimating-equation suites", estimating_equations},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty())
    for (int k = 1; k <= 9; ++k) selected.push_back(k);

  int failures = 0;
  for (int k : selected) {
    if (k < 1 || k > 9) {
      std::fprintf(stderr, "unknown criterion %d\n", k);
      return 100;
    }
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(k - 1)].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", k, criteria[static_cast<std::size_t>(k - 1)].first,
                o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return std::min(failures, 100);
}
