// Serial reference kernels against their OpenMP counterparts.
//   bench_kernels --benchmark_filter=Surrogate
// The thread count argument is passed to parallel::set_num_threads.

#include "obree/glmm.hpp"
#include "obree/ib.hpp"
#include "obree/logistic_model.hpp"
#include "obree/parallel.hpp"
#include "obree/quadrature.hpp"
#include "obree/reference.hpp"

#include <benchmark/benchmark.h>

using namespace obree;

namespace {

const LogisticModel& logistic_model() {
  static const LogisticModel model(
      generate_design(200, 20, 0.0, StreamKey{1, {{TagLabel::unit, 0}}}, CovariateScale::sd), LogisticEstimator{});
  return model;
}

ParamVector logistic_theta() {
  ParamVector theta = ParamVector::Zero(20);
  theta.head(4) << 5, 5, -7, -7;
  return theta;
}

SimulationBudget budget() {
  SimulationBudget b;
  b.H = 50;
  b.seed = 3;
  return b;
}

struct GlmmFixture {
  ClusteredData data;
  GlmmParams params;
  GaussHermiteRule rule = gauss_hermite(31);
};

const GlmmFixture& glmm_fixture() {
  static const GlmmFixture f = [] {
    GlmmFixture g;
    g.params.beta = ParamVector::Zero(5);
    g.params.beta.tail(4) << 1.5, 1.5, -2.1, -2.1;
    g.params.sigma2 = 1.5;
    RandomStream s = derive_stream(StreamKey{2, {{TagLabel::rep, 1}}});
    g.data = simulate_glmm(make_glmm_design(400, 5, 4, 0.0, StreamKey{2, {{TagLabel::unit, 0}}}), g.params, s);
    return g;
  }();
  return f;
}

void BM_SurrogateSerial(benchmark::State& state) {
  const ParamVector theta = logistic_theta();
  for (auto _ : state) benchmark::DoNotOptimize(reference::surrogate_pi(logistic_model(), theta, budget(), 1));
}

void BM_SurrogateOpenMP(benchmark::State& state) {
  parallel::set_num_threads(static_cast<int>(state.range(0)));
  const ParamVector theta = logistic_theta();
  for (auto _ : state) benchmark::DoNotOptimize(surrogate_pi(logistic_model(), theta, budget(), 1));
  parallel::set_num_threads(0);
}

void BM_GhqSerial(benchmark::State& state) {
  const GlmmFixture& f = glmm_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(reference::marginal_loglik_ghq(f.data, f.params, f.rule));
}

void BM_GhqOpenMP(benchmark::State& state) {
  parallel::set_num_threads(static_cast<int>(state.range(0)));
  const GlmmFixture& f = glmm_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(marginal_loglik_ghq(f.data, f.params, f.rule));
  parallel::set_num_threads(0);
}

}  // namespace

BENCHMARK(BM_SurrogateSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SurrogateOpenMP)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GhqSerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GhqOpenMP)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
