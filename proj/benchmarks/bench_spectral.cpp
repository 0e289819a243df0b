#include <benchmark/benchmark.h>

#include "confound/estimators.hpp"
#include "confound/model.hpp"
#include "confound/spectral.hpp"

using namespace confound;

namespace {

Eigen::MatrixXd design(int d, int n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(d, n);
  fill_standard_normal(x, rng);
  return x;
}

}  // namespace

static void BM_KernelSpectrum(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const Eigen::MatrixXd x = design(d, 2 * d, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(spectrum_of_gram(x, 1.0 / d, GramSide::Kernel));
  }
}
BENCHMARK(BM_KernelSpectrum)->Arg(100)->Arg(250)->Arg(500)->Unit(benchmark::kMillisecond);

static void BM_SolveEta(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const Spectrum ker = spectrum_of_gram(design(d, 2 * d, 2), 1.0 / d, GramSide::Kernel);
  double theta = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_eta(ker, theta));
    theta = theta < 10.0 ? theta * 1.1 : 0.1;
  }
}
BENCHMARK(BM_SolveEta)->Arg(100)->Arg(1000);

static void BM_HRmt(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(3);
  const CausalModel model = build_model(d, 1.2, 1.0 / 3.0, 0.5, 1.0, 1.0, rng);
  const ObservationalData data = draw_observations(model, 2 * d, rng);
  const SampleAnalysis sample(data);
  for (auto _ : state) {
    benchmark::DoNotOptimize(h_rmt(sample, 1.0));
  }
}
BENCHMARK(BM_HRmt)->Arg(100)->Arg(500);

BENCHMARK_MAIN();
