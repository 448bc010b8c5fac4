// OpenMP kernels against their serial references on one synthetic room.
// Run with e.g. --benchmark_filter=Overlap. The thread count of the parallel
// variants is the benchmark argument.

#include <random>

#include <benchmark/benchmark.h>

#include "owl3d/calibration.hpp"
#include "owl3d/geometry.hpp"
#include "owl3d/instance.hpp"
#include "owl3d/parallel.hpp"
#include "owl3d/serial.hpp"
#include "owl3d/synth.hpp"

using namespace owl3d;

namespace {

const SceneBundle& room() {
  static const SceneBundle b = [] {
    SynthSpec spec;
    spec.seed = 1;
    spec.points_per_instance = 4000;
    spec.image_width = 320;
    spec.image_height = 240;
    return make_bundle(spec, "bench");
  }();
  return b;
}

const std::vector<Vec3d>& lifted() {
  static const std::vector<Vec3d> q = backproject(room().frames[0]);
  return q;
}

struct Blend {
  ScoreMatrix base;
  ScoreMatrix novel;
  std::vector<double> binary;
};

const Blend& blend() {
  static const Blend b = [] {
    const std::size_t n = 200000, k = 20, nb = 13;
    Blend out{ScoreMatrix(n, k, nb), ScoreMatrix(n, k, nb), std::vector<double>(n)};
    out.base.distribution = out.novel.distribution = true;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      double a = 0, s = 0;
      for (std::size_t c = 0; c < nb; ++c) a += out.base(i, c) = u(rng);
      for (std::size_t c = nb; c < k; ++c) s += out.novel(i, c) = u(rng);
      for (std::size_t c = 0; c < nb; ++c) out.base(i, c) /= a;
      for (std::size_t c = nb; c < k; ++c) out.novel(i, c) /= s;
      out.binary[i] = u(rng);
    }
    return out;
  }();
  return b;
}

struct Cloud {
  std::vector<Vec3d> points;
  IndexSet candidates;
};

const Cloud& cloud() {
  static const Cloud c = [] {
    Cloud out;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    out.points.resize(200000);
    for (auto& p : out.points) p = Vec3d(u(rng), u(rng), 0.1 * u(rng));
    for (Index i = 0; i < out.points.size(); ++i) out.candidates.push_back(i);
    return out;
  }();
  return c;
}

void BM_Backproject(benchmark::State& state) {
  ScopedThreads t(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(backproject(room().frames[0]));
}
void BM_BackprojectSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(serial::backproject(room().frames[0]));
}

void BM_Overlap(benchmark::State& state) {
  ScopedThreads t(static_cast<int>(state.range(0)));
  const PipelineConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(frustum_overlap(room().cloud, lifted(), cfg));
}
void BM_OverlapSerial(benchmark::State& state) {
  const PipelineConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(serial::frustum_overlap(room().cloud, lifted(), cfg));
}

void BM_Components(benchmark::State& state) {
  ScopedThreads t(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(radius_components(cloud().points, cloud().candidates, 0.01, 5));
  }
}
void BM_ComponentsSerial(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(serial::radius_components(cloud().points, cloud().candidates, 0.01, 5));
  }
}

void BM_Calibrate(benchmark::State& state) {
  ScopedThreads t(static_cast<int>(state.range(0)));
  const auto& b = blend();
  for (auto _ : state) benchmark::DoNotOptimize(calibrate(b.base, b.novel, b.binary));
}
void BM_CalibrateSerial(benchmark::State& state) {
  const auto& b = blend();
  for (auto _ : state) benchmark::DoNotOptimize(serial::calibrate(b.base, b.novel, b.binary));
}

void BM_RenderDepth(benchmark::State& state) {
  ScopedThreads t(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render_depth(room().cloud.points, room().frames[0]));
}
void BM_RenderDepthSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(serial::render_depth(room().cloud.points, room().frames[0]));
}

}  // namespace

BENCHMARK(BM_Backproject)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BackprojectSerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Overlap)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OverlapSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Components)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ComponentsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Calibrate)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CalibrateSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderDepth)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RenderDepthSerial)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
