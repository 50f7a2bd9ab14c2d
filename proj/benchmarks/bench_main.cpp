#include <benchmark/benchmark.h>

#include <vector>

#include "vcsel/encoder.hpp"
#include "vcsel/imaging.hpp"
#include "vcsel/runner.hpp"
#include "vcsel/sfm.hpp"

using namespace vcsel;

static void BM_Rk4Step(benchmark::State& state) {
  const SfmParams p;
  SfmState s{{1.4, 0.2}, {1e-3, 0.0}, 0.95, 0.0};
  EnvelopeFn env = [](double) { return 1.15; };
  double t = 0.0;
  for (auto _ : state) {
    s = rk4_step(s, t, 5e-5, env, p, nullptr);
    t += 5e-5;
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_Rk4Step);

static void BM_Rk4StepNoisy(benchmark::State& state) {
  const SfmParams p;
  SfmState s{{1.4, 0.2}, {1e-3, 0.0}, 0.95, 0.0};
  EnvelopeFn env = [](double) { return 1.15; };
  NoiseSource rng(3);
  double t = 0.0;
  for (auto _ : state) {
    s = rk4_step(s, t, 5e-5, env, p, &rng);
    t += 5e-5;
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_Rk4StepNoisy);

// One 3 ns pixel window from rest, per integration step.
static void BM_SimulateWindow(benchmark::State& state) {
  const SfmParams p;
  EncodingConfig e = EncodingConfig::preset_2x2();
  e.baseline_amplitude = 1.15;
  e.modulation_depth = 0.16;
  e.sample_period_ps = static_cast<double>(state.range(0)) / 100.0;
  const auto w = encode_pixel_burst(std::vector<double>(4, 1.0), e, p.delta_f);
  SimConfig c;
  c.dt_ps = e.sample_period_ps;
  const SfmState rest{{1.47, 0.0}, {0.0, 0.0}, 0.97, 0.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        simulate_stream(w, p, c, rest, [](double, double, double) {}));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(3000.0 / c.dt_ps));
}
BENCHMARK(BM_SimulateWindow)->Arg(5)->Arg(25)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_HadamardField(benchmark::State& state) {
  const PixelImage img = builtin_image("digit4");
  const auto bank = kernel_bank("edge8_3x3");
  for (auto _ : state) {
    for (const auto& k : bank) benchmark::DoNotOptimize(hadamard_field(img, k));
  }
}
BENCHMARK(BM_HadamardField);

static void BM_EncodeRun(benchmark::State& state) {
  const PixelImage img = builtin_image("digit4");
  const auto k = kernel_bank("edge8_2x2")[0];
  const HadamardField f = hadamard_field(img, k);
  EncodingConfig e = EncodingConfig::preset_2x2();
  e.baseline_amplitude = 1.15;
  e.modulation_depth = 0.16;
  const FieldSlot slots[] = {{&f, 0, 0}};
  for (auto _ : state) benchmark::DoNotOptimize(encode_run(slots, e, -4.0));
}
BENCHMARK(BM_EncodeRun);

static void BM_ReferenceEdges(benchmark::State& state) {
  const PixelImage img = builtin_image("digit4");
  const auto bank = kernel_bank("edge8_2x2");
  for (auto _ : state) {
    for (const auto& k : bank) benchmark::DoNotOptimize(reference_edges(img, k));
  }
}
BENCHMARK(BM_ReferenceEdges);
BENCHMARK_MAIN();
