#include <benchmark/benchmark.h>
#include <omp.h>

#include "curvex/expansion.hpp"

using namespace curvex;

namespace {

TestFunction sphere_tf(int n) {
  ModelSpec s;
  s.kind = ModelKind::SpaceForm;
  s.n = n;
  s.K = 1.0;
  auto c = std::make_shared<const MetricChart>(make_chart(s));
  auto nc = std::make_shared<const NormalChart>(build_normal_chart(c, std::vector<double>(static_cast<size_t>(n), 0.0), 2.1));
  return build_test_function(nc, AMode::Optimal, std::nullopt, -n * (n - 1) / 3.0, 2.0);
}

QuadratureSpec rule(bool radial) {
  QuadratureSpec q;
  if (radial) {
    q.rule = QuadRule::RadialSphere;
    q.order = 60;
    q.sphere_resolution = 16;
  }
  return q;
}

void run(benchmark::State& state, ExecPolicy policy) {
  const int n = static_cast<int>(state.range(0));
  const bool radial = state.range(1) != 0;
  const TestFunction tf = sphere_tf(n);
  const QuadratureSpec q = rule(radial);
  for (auto _ : state) benchmark::DoNotOptimize(eval_L(tf, 1e-3, q, policy).value);
  state.counters["threads"] = policy == ExecPolicy::Parallel ? omp_get_max_threads() : 1;
}

void BM_eval_L_serial(benchmark::State& state) { run(state, ExecPolicy::Serial); }
void BM_eval_L_openmp(benchmark::State& state) { run(state, ExecPolicy::Parallel); }

}  // namespace

// args: dimension, radial rule flag
BENCHMARK(BM_eval_L_serial)->Args({3, 0})->Args({4, 0})->Args({3, 1})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_eval_L_openmp)->Args({3, 0})->Args({4, 0})->Args({3, 1})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
