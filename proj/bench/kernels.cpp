// Serial reference kernels against the tiled OpenMP ones on a trained-size
// scene: a few thousand Gaussians on a 256x256 view.

#include "fds/density.hpp"
#include "fds/image.hpp"
#include "fds/parallel.hpp"
#include "fds/render.hpp"
#include "fds/trainer.hpp"

#include <benchmark/benchmark.h>

#include <map>
#include <random>

namespace {

using namespace fds;

struct Scene {
  GaussianCloud cloud;
  ViewSpec view;
  RasterImage pixel_grad;
};

const Scene& scene(int count) {
  static std::map<int, Scene> cache;
  auto it = cache.find(count);
  if (it != cache.end()) return it->second;
  Scene s;
  const RasterImage img = make_test_texture(256, 256);
  std::mt19937_64 rng(1);
  s.cloud = init_from_random(static_cast<std::size_t>(count), img, 50, 1.2, 0.6, rng);
  s.view = make_views(img, 2)[1];
  s.pixel_grad = RasterImage(256, 256);
  std::uniform_real_distribution<double> u(-1e-3, 1e-3);
  for (double& v : s.pixel_grad.data()) v = u(rng);
  return cache.emplace(count, std::move(s)).first->second;
}

void BM_RenderReference(benchmark::State& state) {
  const Scene& s = scene(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::render_raster(s.cloud, s.view.camera, 256, 256));
  }
}

void BM_RenderParallel(benchmark::State& state) {
  configure_threads();
  const Scene& s = scene(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render_raster(s.cloud, s.view));
  state.counters["threads"] = max_threads();
}

void BM_BackwardReference(benchmark::State& state) {
  const Scene& s = scene(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::backward_pixels(s.cloud, s.view.camera, s.pixel_grad));
  }
}

void BM_BackwardParallel(benchmark::State& state) {
  configure_threads();
  const Scene& s = scene(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(backward_pixels(s.cloud, s.view.camera, s.pixel_grad));
  }
  state.counters["threads"] = max_threads();
}

}  // namespace

BENCHMARK(BM_RenderReference)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderParallel)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackwardReference)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackwardParallel)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
