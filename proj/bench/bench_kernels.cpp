// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include "atslg/evaluator.hpp"
#include "atslg/exposure.hpp"
#include "atslg/gp_engine.hpp"
#include "atslg/offline_library.hpp"
#include "atslg/vehicle_sim.hpp"

using namespace atslg;

namespace {

const ScenarioSpace& space() {
  static const ScenarioSpace s;
  return s;
}

template <bool Parallel>
void BM_OutcomeField(benchmark::State& state) {
  const AccAebPolicy cav;
  const EpisodeConfig ep;
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? outcome_field(cav, space(), ep)
                                      : outcome_field_serial(cav, space(), ep));
  }
}

GprModel model(int n) {
  Rng rng(5);
  Points x;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x.push_back(space().scenario(rng.below(space().n_total())));
    y(i) = rng.uniform() < 0.3 ? -1.0 : 0.0;
  }
  return gpr_condition(ArdSeKernel{}, x, y, 1e-6);
}

template <bool Parallel>
void BM_GprGrid(benchmark::State& state) {
  const GprModel m = model(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? gpr_predict_grid(m, space())
                                      : gpr_predict_grid_serial(m, space()));
  }
}

struct CompareFixture {
  ScenarioField p_x, p_s, p_a;
  Library off, cust;
  CompareFixture() {
    p_x = exposure_from_events(space(), generate_synthetic_ndd(space(), 100000, 1, {})).p_x;
    const EpisodeConfig ep;
    p_s = outcome_field(FvdmPolicy{}, space(), ep);
    p_a = outcome_field(AccAebPolicy{}, space(), ep);
    off = build_library(criticality(p_s, p_x), 0.1);
    cust = build_library(criticality(p_a, p_x), 0.1);
  }
};

template <bool Parallel>
void BM_Compare(benchmark::State& state) {
  static const CompareFixture f;
  CompareConfig cfg;
  cfg.n_reps = static_cast<std::size_t>(state.range(0));
  cfg.eval.seed = 3;
  const CompareInputs in{f.p_x, f.p_a, f.off, f.cust};
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? compare_methods(in, cfg) : compare_methods_serial(in, cfg));
  }
}

}  // namespace

BENCHMARK(BM_OutcomeField<false>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OutcomeField<true>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GprGrid<false>)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GprGrid<true>)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Compare<false>)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Compare<true>)->Arg(20)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
