#include <benchmark/benchmark.h>

#include "matchbound/bounds.hpp"
#include "matchbound/diagnostics.hpp"

using namespace matchbound;

namespace {

struct Case {
  Dataset data;
  DistanceMatrix distances;
  QualitySpec spec;
};

Case make_case(std::size_t nt, std::size_t nc, double eps) {
  SyntheticModel model;
  auto draw = generate(model, nt, nc, 11);
  auto d = mahalanobis_distances(draw.data);
  const auto w = greedy_nn_match(draw.data, d, nc < nt);
  auto spec = spec_from_baseline(draw.data, w, &d, {1, 2}, nullptr, eps, EstimandKind::satt);
  return {std::move(draw.data), std::move(d), std::move(spec)};
}

}  // namespace

static void BM_Mahalanobis(benchmark::State& state) {
  SyntheticModel model;
  const auto draw = generate(model, state.range(0), 2 * state.range(0), 3);
  for (auto _ : state) benchmark::DoNotOptimize(mahalanobis_distances(draw.data));
}
BENCHMARK(BM_Mahalanobis)->Arg(10)->Arg(50)->Arg(200);

static void BM_LpRelaxationF1(benchmark::State& state) {
  const auto c = make_case(state.range(0), 2 * state.range(0), 0.5);
  const auto model = build_model(FormulationKind::f1, c.data, c.spec, Sense::maximize, {&c.distances, nullptr});
  for (auto _ : state) benchmark::DoNotOptimize(solve_lp(model));
  state.counters["columns"] = static_cast<double>(model.n_variables());
}
BENCHMARK(BM_LpRelaxationF1)->Arg(3)->Arg(5)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_ExactBoundsF1(benchmark::State& state) {
  const auto c = make_case(state.range(0), 2 * state.range(0), 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matching_bounds(c.data, c.spec, FormulationKind::f1, {&c.distances, nullptr}));
  }
}
BENCHMARK(BM_ExactBoundsF1)->Arg(3)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);

static void BM_RelaxAndRoundF1(benchmark::State& state) {
  const auto c = make_case(state.range(0), 2 * state.range(0), 0.5);
  BoundsOptions options;
  options.solver.mode = SolveMode::relax_and_round;
  for (auto _ : state) {
    benchmark::DoNotOptimize(matching_bounds(c.data, c.spec, FormulationKind::f1, {&c.distances, nullptr}, options));
  }
}
BENCHMARK(BM_RelaxAndRoundF1)->Arg(4)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
