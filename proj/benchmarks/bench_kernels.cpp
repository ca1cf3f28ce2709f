#include <benchmark/benchmark.h>

#include "ki/linalg.hpp"
#include "ki/rng.hpp"

namespace {

void BM_GemmForward(benchmark::State& state) {
    const int rows = int(state.range(0));  // tokens per step
    const int d = 256, ffn = 1024;
    std::vector<float> x(size_t(rows) * d), w(size_t(d) * ffn), y(size_t(rows) * ffn);
    ki::Rng rng(1);
    for (auto& v : x) v = float(rng.uniform() - 0.5);
    for (auto& v : w) v = float(rng.uniform() - 0.5);
    for (auto _ : state) {
        ki::gemm(false, false, rows, ffn, d, 1.f, x.data(), d, w.data(), ffn, 0.f, y.data(), ffn);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * rows);
    state.counters["GFLOP/s"] = benchmark::Counter(
        2.0 * rows * d * ffn * double(state.iterations()) / 1e9, benchmark::Counter::kIsRate);
}
BENCHMARK(BM_GemmForward)->Arg(48)->Arg(192)->Arg(512);

void BM_GemmWeightGrad(benchmark::State& state) {
    const int rows = int(state.range(0));
    const int d = 256, ffn = 1024;
    std::vector<float> x(size_t(rows) * d), dy(size_t(rows) * ffn), dw(size_t(d) * ffn);
    ki::Rng rng(2);
    for (auto& v : x) v = float(rng.uniform() - 0.5);
    for (auto& v : dy) v = float(rng.uniform() - 0.5);
    for (auto _ : state) {
        ki::gemm(true, false, d, ffn, rows, 1.f, x.data(), d, dy.data(), ffn, 1.f, dw.data(), ffn);
        benchmark::DoNotOptimize(dw.data());
    }
    state.counters["GFLOP/s"] = benchmark::Counter(
        2.0 * rows * d * ffn * double(state.iterations()) / 1e9, benchmark::Counter::kIsRate);
}
BENCHMARK(BM_GemmWeightGrad)->Arg(48)->Arg(192);

}  // namespace

BENCHMARK_MAIN();
