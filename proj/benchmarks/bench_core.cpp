#include <benchmark/benchmark.h>

#include <random>

#include "imlc/mpc.hpp"
#include "imlc/shapley.hpp"
#include "imlc/surrogate.hpp"
#include "imlc/testbed.hpp"

using namespace imlc;

namespace {

struct Fixture {
  Table data;
  surrogate::SurrogateModel fx;
  surrogate::SurrogateModel fy;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Table data = testbed::run_excitation(31, testbed::TestbedConfig{}, 3);
    surrogate::TrainConfig tc;
    tc.epochs = 300;
    auto fx = surrogate::train(data, surrogate::FeatureSchema::zone_temperature(), tc);
    auto fy = surrogate::train(data, surrogate::FeatureSchema::cooling_rate(), tc);
    return Fixture{std::move(data), std::move(fx), std::move(fy)};
  }();
  return f;
}

const std::vector<double> kInstance = {25.0, 26.0, 34.4, 549.0, 3.0};

void BM_Predict(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(f.fy.predict(kInstance));
}
BENCHMARK(BM_Predict);

void BM_ShapleyExact(benchmark::State& state) {
  const auto& f = fixture();
  auto rows = f.fy.log().background;
  rows.resize(static_cast<std::size_t>(state.range(0)));
  const shapley::BackgroundSet bg(std::move(rows));
  const auto model = shapley::Predictor::of(f.fy);
  for (auto _ : state) benchmark::DoNotOptimize(shapley::shapley(model, kInstance, bg));
}
BENCHMARK(BM_ShapleyExact)->Arg(16)->Arg(256);

void BM_Optimize(benchmark::State& state) {
  const auto& f = fixture();
  const mpc::MpcProblem p{26.0, {34.4, 549.0, 3.0}, {36.1, 560.0, 3.0}, 5000.0, 1311.2,
                          shapley::Predictor::of(f.fx), shapley::Predictor::of(f.fy)};
  for (auto _ : state) benchmark::DoNotOptimize(mpc::optimize(p));
}
BENCHMARK(BM_Optimize);

void BM_TrainEpochs(benchmark::State& state) {
  const auto& f = fixture();
  surrogate::TrainConfig tc;
  tc.epochs = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(surrogate::train(f.data, surrogate::FeatureSchema::cooling_rate(), tc));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainEpochs)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
