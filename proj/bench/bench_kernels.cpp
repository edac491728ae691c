#include <benchmark/benchmark.h>

#include <vector>

#include "vadasr/kernels.hpp"
#include "vadasr/losses.hpp"
#include "vadasr/rng.hpp"

namespace {

using namespace vadasr;

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

template <auto Gemm>
void BM_gemm_nn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = noise(n * n, 1), b = noise(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Gemm(n, n, n, a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_gemm_nn<kernels::serial::gemm_nn>)->Name("gemm_nn/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm_nn<kernels::omp::gemm_nn>)->Name("gemm_nn/omp")->Arg(64)->Arg(256);

// The first encoder conv over 3 s of 16 kHz audio.
template <auto Im2col>
void BM_im2col(benchmark::State& state) {
  kernels::ConvGeometry g;
  g.length = 48000;
  g.channels = g.channel_count = 1;
  g.kernel = 80;
  g.stride = 40;
  g.padding = 20;
  auto x = noise(g.length, 3);
  std::vector<double> cols(g.out_length() * g.patch());
  for (auto _ : state) {
    Im2col(g, x, cols);
    benchmark::DoNotOptimize(cols.data());
  }
}
BENCHMARK(BM_im2col<kernels::serial::im2col>)->Name("im2col/serial");
BENCHMARK(BM_im2col<kernels::omp::im2col>)->Name("im2col/omp");

void BM_ctc_batch(benchmark::State& state) {
  const bool parallel = state.range(0) != 0;
  Rng rng(4);
  std::vector<Tensor> grids;
  std::vector<TokenSeq> targets;
  for (int i = 0; i < 16; ++i) {
    Tensor lp({150, 6});
    for (std::size_t t = 0; t < 150; ++t) {
      for (std::size_t k = 0; k < 6; ++k) lp.at(t, k) = rng.normal();
      double m = lp.at(t, 0), z = 0.0;
      for (std::size_t k = 1; k < 6; ++k) m = std::max(m, lp.at(t, k));
      for (std::size_t k = 0; k < 6; ++k) z += std::exp(lp.at(t, k) - m);
      for (std::size_t k = 0; k < 6; ++k) lp.at(t, k) -= m + std::log(z);
    }
    grids.push_back(std::move(lp));
    TokenSeq y;
    for (int j = 0; j < 6; ++j) y.push_back(static_cast<int>(rng.uniform_int(0, 4)));
    targets.push_back(y);
  }
  for (auto _ : state) benchmark::DoNotOptimize(ctc_loss_batch(grids, targets, parallel));
}
BENCHMARK(BM_ctc_batch)->Name("ctc_batch/serial")->Arg(0);
BENCHMARK(BM_ctc_batch)->Name("ctc_batch/omp")->Arg(1);

}  // namespace

BENCHMARK_MAIN();
