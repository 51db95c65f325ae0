// Serial reference kernels against the OpenMP versions, plus the fused
// view loss and one full training epoch built on top of them.
#include <benchmark/benchmark.h>

#include <set>
#include <vector>

#include "muse/graph.hpp"
#include "muse/kernels.hpp"
#include "muse/losses.hpp"
#include "muse/random.hpp"
#include "muse/training.hpp"

namespace {

using muse::Rng;
using muse::kernels::Trans;

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

muse::Graph random_graph(std::size_t n, std::size_t n_edges, std::size_t f, std::uint64_t seed) {
  Rng rng(seed);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  while (seen.size() < n_edges) {
    std::size_t u = rng.index(n), v = rng.index(n);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    seen.emplace(u, v);
  }
  const std::vector<std::pair<std::size_t, std::size_t>> edges(seen.begin(), seen.end());
  return muse::Graph::build("bench", n, edges, muse::Tensor::from(n, f, random_vector(n * f, seed + 1)), std::nullopt, 0);
}

template <typename T, bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto ad = random_vector(n * n, 1), bd = random_vector(n * n, 2);
  const std::vector<T> a(ad.begin(), ad.end()), b(bd.begin(), bd.end());
  std::vector<T> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      muse::kernels::omp::gemm(Trans::no, Trans::yes, n, n, n, a.data(), n, b.data(), n, T(0), c.data(), n);
    } else {
      muse::kernels::serial::gemm(Trans::no, Trans::yes, n, n, n, a.data(), n, b.data(), n, T(0), c.data(), n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Gemm<double, false>)->Name("gemm/serial")->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gemm<double, true>)->Name("gemm/omp")->Arg(128)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gemm<float, false>)->Name("gemm_f32/serial")->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gemm<float, true>)->Name("gemm_f32/omp")->Arg(128)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);

template <bool Parallel>
void BM_Spmm(benchmark::State& state) {
  const auto cols = static_cast<std::size_t>(state.range(0));
  const muse::Graph g = random_graph(5000, 200000, 1, 3);
  const muse::SparseMatrix adj = muse::normalized_adjacency_sparse(g, true);
  const auto& s = adj.csr();
  const auto b = random_vector(s.cols * cols, 4);
  std::vector<double> c(s.rows * cols);
  for (auto _ : state) {
    if constexpr (Parallel) {
      muse::kernels::omp::spmm(s, b.data(), cols, c.data());
    } else {
      muse::kernels::serial::spmm(s, b.data(), cols, c.data());
    }
    benchmark::DoNotOptimize(c.data());
  }
}
BENCHMARK(BM_Spmm<false>)->Name("spmm/serial")->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Spmm<true>)->Name("spmm/omp")->Arg(64)->Unit(benchmark::kMillisecond);

template <bool Parallel>
void BM_Exp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto src = random_vector(n, 5);
  std::vector<double> x(n);
  for (auto _ : state) {
    x = src;
    if constexpr (Parallel) {
      muse::kernels::omp::exp_affine(x.data(), n, 2.0, -2.0);
    } else {
      muse::kernels::serial::exp_affine(x.data(), n, 2.0, -2.0);
    }
    benchmark::DoNotOptimize(x.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Exp<false>)->Name("exp/serial")->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Exp<true>)->Name("exp/omp")->Arg(1 << 20)->Unit(benchmark::kMillisecond);

template <muse::Precision P>
void BM_ViewLoss(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const muse::Tensor z = muse::Tensor::from(n, 64, random_vector(n * 64, 6), true);
  const muse::Tensor za = muse::Tensor::from(n, 64, random_vector(n * 64, 7), true);
  for (auto _ : state) {
    muse::Tensor l = muse::view_loss(z, za, 0.5, P);
    muse::backward(l);
    benchmark::DoNotOptimize(l.item());
  }
}
BENCHMARK(BM_ViewLoss<muse::Precision::f64>)->Name("view_loss+backward")->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ViewLoss<muse::Precision::f32>)->Name("view_loss+backward/f32")->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_Epoch(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const muse::Graph g = random_graph(n, 40 * n, 256, 8);
  muse::TrainConfig cfg;
  muse::Trainer trainer(g, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.run_epoch().contrast_loss);
}
BENCHMARK(BM_Epoch)->Name("train_epoch")->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond)->Iterations(2);

}  // namespace

BENCHMARK_MAIN();
