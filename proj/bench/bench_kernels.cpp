// OpenMP kernels against their serial twins.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "roadreg/kernels.hpp"
#include "roadreg/lanelet_map.hpp"

using namespace roadreg;

namespace {

std::vector<Eigen::Vector3d> cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  std::vector<Eigen::Vector3d> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng) / 50.0};
  return pts;
}

const std::vector<Eigen::Vector3d>& target() {
  static const auto t = cloud(200'000, 1);
  return t;
}

const KdTree& tree() {
  static const KdTree t(target());
  return t;
}

template <auto Fn>
void BM_Nearest(benchmark::State& state) {
  const auto q = cloud(state.range(0), 2);
  const KdTree& t = tree();
  for (auto _ : state) benchmark::DoNotOptimize(Fn(t, q, 5.0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void BM_Radius(benchmark::State& state) {
  const auto q = cloud(state.range(0), 3);
  const KdTree& t = tree();
  for (auto _ : state) benchmark::DoNotOptimize(Fn(t, q, 1.0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void BM_Transform(benchmark::State& state) {
  const auto pts = cloud(state.range(0), 4);
  const Pose pose = Pose::from_xyz_rpy({1, 2, 3}, 0.1, 0.2, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(pose, pts));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void BM_Polygons(benchmark::State& state) {
  std::vector<Lanelet> lanes;
  for (int k = 0; k < 20; ++k) {
    Lanelet l;
    l.id = k;
    const double y = -70.0 + 7.0 * k;
    l.left = {{-100, y + 3.5}, {100, y + 3.5}};
    l.right = {{-100, y}, {100, y}};
    lanes.push_back(l);
  }
  const PolygonMap map = build_polygon_map(lanes, 0.5);
  std::vector<Eigen::Vector2d> xy;
  for (const auto& p : cloud(state.range(0), 5)) xy.push_back(p.head<2>());
  for (auto _ : state) benchmark::DoNotOptimize(Fn(map, xy));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_Nearest<kernels::nearest_batch>)->Arg(10'000)->Arg(100'000);
BENCHMARK(BM_Nearest<kernels::nearest_batch_serial>)->Arg(10'000)->Arg(100'000);
BENCHMARK(BM_Radius<kernels::radius_neighbors>)->Arg(10'000);
BENCHMARK(BM_Radius<kernels::radius_neighbors_serial>)->Arg(10'000);
BENCHMARK(BM_Transform<kernels::transform_batch>)->Arg(1'000'000);
BENCHMARK(BM_Transform<kernels::transform_batch_serial>)->Arg(1'000'000);
BENCHMARK(BM_Polygons<query_points>)->Arg(100'000);
BENCHMARK(BM_Polygons<query_points_serial>)->Arg(100'000);

BENCHMARK_MAIN();
