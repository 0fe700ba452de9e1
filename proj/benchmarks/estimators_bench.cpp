#include <benchmark/benchmark.h>

#include "upiv/datagen.hpp"
#include "upiv/estimators.hpp"
#include "upiv/l1_solver.hpp"
#include "upiv/moments.hpp"

namespace {

upiv::Generated categorical(int m, int r) {
  upiv::GeneratorSpec spec = upiv::GeneratorSpec::preset(upiv::Setting::S2);
  spec.m = m;
  spec.r = spec.r_tilde = r;
  spec.seed = 1;
  return upiv::generate(spec);
}

upiv::Generated high_dimensional() {
  upiv::GeneratorSpec spec = upiv::GeneratorSpec::preset(upiv::Setting::S1);
  spec.m = 50;
  spec.d = 100;
  spec.s_star = 5;
  spec.r = spec.r_tilde = 50;
  spec.seed = 2;
  return upiv::generate(spec);
}

void BM_MomentSystem(benchmark::State& state) {
  const auto g = categorical(static_cast<int>(state.range(0)), 8);
  for (auto _ : state) benchmark::DoNotOptimize(upiv::moment_system(g.data));
}
BENCHMARK(BM_MomentSystem)->Arg(200)->Arg(800)->Arg(3200);

void BM_AnalyticDenominator(benchmark::State& state) {
  const auto g = categorical(static_cast<int>(state.range(0)), 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(upiv::cross_fold_denominator_analytic(g.data.x_instruments, g.data.x));
  }
}
BENCHMARK(BM_AnalyticDenominator)->Arg(200)->Arg(800)->Arg(3200);

void BM_MonteCarloDenominator(benchmark::State& state) {
  const auto g = categorical(static_cast<int>(state.range(0)), 8);
  upiv::Rng rng = upiv::make_rng(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(upiv::cross_fold_denominator_mc(g.data.x_instruments, g.data.x, {}, rng));
  }
}
BENCHMARK(BM_MonteCarloDenominator)->Arg(200)->Arg(800);

void BM_TsIv(benchmark::State& state) {
  const auto g = categorical(800, 8);
  const auto ms = upiv::moment_system(g.data);
  for (auto _ : state) benchmark::DoNotOptimize(upiv::ts_iv(ms));
}
BENCHMARK(BM_TsIv);

void BM_UpGmm(benchmark::State& state) {
  const auto g = categorical(800, 8);
  upiv::EstimatorConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(upiv::up_gmm(g.data, cfg));
}
BENCHMARK(BM_UpGmm)->Unit(benchmark::kMillisecond);

void BM_UpGmmHd(benchmark::State& state) {
  const auto g = categorical(800, 8);
  upiv::EstimatorConfig cfg;
  cfg.denominator = upiv::DenominatorKind::Analytic;
  upiv::Rng rng = upiv::make_rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(upiv::up_gmm_hd(g.data, cfg, rng));
}
BENCHMARK(BM_UpGmmHd)->Unit(benchmark::kMillisecond);

void BM_L1Path(benchmark::State& state) {
  const auto g = high_dimensional();
  upiv::EstimatorConfig cfg;
  cfg.l1 = true;
  cfg.post_refit = true;
  for (auto _ : state) benchmark::DoNotOptimize(upiv::up_gmm(g.data, cfg));
}
BENCHMARK(BM_L1Path)->Unit(benchmark::kMillisecond);

void BM_L1Solve(benchmark::State& state) {
  const auto d = state.range(0);
  upiv::Rng rng = upiv::make_rng(5);
  std::normal_distribution<double> normal;
  upiv::Matrix a(d + 10, d);
  for (upiv::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  const upiv::Matrix gram = a.transpose() * a;
  upiv::Vector h(d);
  for (upiv::Index j = 0; j < d; ++j) h(j) = normal(rng);
  const double lambda = 0.1 * upiv::l1_lambda_max(h);
  for (auto _ : state) benchmark::DoNotOptimize(upiv::l1_quadratic_solve(gram, h, lambda));
}
BENCHMARK(BM_L1Solve)->Arg(50)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
