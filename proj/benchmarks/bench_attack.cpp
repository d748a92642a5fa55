#include <benchmark/benchmark.h>

#include "afog/attack.hpp"
#include "afog/hungarian.hpp"
#include "afog/metrics.hpp"
#include "afog/rng.hpp"
#include "afog/shapes.hpp"
#include "afog/toy_detector.hpp"

using namespace afog;

namespace {

const ShapesDataset& dataset() {
  static ShapesDataset ds = generate_shapes_dataset(3, 4);
  return ds;
}

const ToyDetector& detector() {
  static ToyDetector det(ToyDetectorConfig{}, 5);
  return det;
}

void BM_DetectorForward(benchmark::State& state) {
  const Image& img = dataset().items[0].image;
  for (auto _ : state) {
    benchmark::DoNotOptimize(detector().detect(img, 0.5));
  }
}
BENCHMARK(BM_DetectorForward)->Unit(benchmark::kMillisecond);

void BM_LossAndGradient(benchmark::State& state) {
  const Image& img = dataset().items[0].image;
  const LossSpec spec{AttackMode::Vanish, DetectionSet{{}, 3}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(detector().loss_and_gradient(img, spec));
  }
}
BENCHMARK(BM_LossAndGradient)->Unit(benchmark::kMillisecond);

void BM_FullAttack(benchmark::State& state) {
  AttackConfig cfg;
  cfg.mode = AttackMode::Vanish;
  cfg.iterations = static_cast<int>(state.range(0));
  const Image& img = dataset().items[0].image;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_attack(img, detector(), cfg));
  }
}
BENCHMARK(BM_FullAttack)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  const Image& a = dataset().items[0].image;
  const Image& b = dataset().items[1].image;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ssim(a, b));
  }
}
BENCHMARK(BM_Ssim)->Unit(benchmark::kMillisecond);

void BM_Hungarian(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(7);
  std::vector<double> cost(static_cast<std::size_t>(n) * n);
  for (double& c : cost) c = rng.uniform(0.0, 10.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_assignment(cost, n, n));
  }
}
BENCHMARK(BM_Hungarian)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
