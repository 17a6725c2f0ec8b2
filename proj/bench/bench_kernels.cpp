// Serial reference vs OpenMP kernels at index/training scale.
// Run: ./build/bench/grounder_bench --benchmark_filter=Adam

#include <benchmark/benchmark.h>

#include <vector>

#include "grounder/kernels.hpp"
#include "grounder/rng.hpp"

namespace k = grounder::kernels;

namespace {

std::vector<float> random_floats(std::size_t n, std::uint64_t seed) {
    grounder::Rng rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
    return v;
}

template <auto Kernel>
void BM_InnerProduct(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const std::size_t d = 128;
    const auto m = random_floats(n * d, 1);
    const auto q = random_floats(d, 2);
    std::vector<float> out(n);
    for (auto _ : state) {
        Kernel(k::MatrixView{m, n, d}, q, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

template <auto Kernel>
void BM_ProjectBatch(benchmark::State& state) {
    const auto batch = static_cast<std::size_t>(state.range(0));
    const std::size_t features = 1 << 15, d = 128, nnz = 64;
    const auto w = random_floats(features * d, 3);
    grounder::Rng rng(4);
    std::vector<std::vector<std::uint32_t>> idx(batch);
    std::vector<std::vector<double>> val(batch);
    std::vector<k::SparseInput> inputs;
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < nnz; ++j) {
            idx[i].push_back(static_cast<std::uint32_t>(rng.below(features)));
            val[i].push_back(rng.uniform(0, 1));
        }
        inputs.push_back({idx[i], val[i]});
    }
    std::vector<double> out(batch * d);
    for (auto _ : state) {
        Kernel(w, d, inputs, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * batch));
}

template <auto Kernel>
void BM_Adam(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    auto params = random_floats(n, 5);
    const auto grads = random_floats(n, 6);
    std::vector<float> m1(n, 0.0f), m2(n, 0.0f);
    k::AdamHyper h;
    h.lr = 1e-3;
    h.bias_correction1 = 0.1;
    h.bias_correction2 = 0.001;
    for (auto _ : state) {
        Kernel(params, grads, m1, m2, h);
        benchmark::DoNotOptimize(params.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

}  // namespace

BENCHMARK(BM_InnerProduct<k::serial::inner_product_scores>)->Name("InnerProduct/serial")->Arg(1000)->Arg(100000);
BENCHMARK(BM_InnerProduct<k::omp::inner_product_scores>)->Name("InnerProduct/omp")->Arg(1000)->Arg(100000);
BENCHMARK(BM_ProjectBatch<k::serial::project_batch>)->Name("ProjectBatch/serial")->Arg(32)->Arg(256);
BENCHMARK(BM_ProjectBatch<k::omp::project_batch>)->Name("ProjectBatch/omp")->Arg(32)->Arg(256);
// 2 x V x d parameters of one dual encoder at the shipped size.
BENCHMARK(BM_Adam<k::serial::adam_update>)->Name("Adam/serial")->Arg(2 * 32768 * 128);
BENCHMARK(BM_Adam<k::omp::adam_update>)->Name("Adam/omp")->Arg(2 * 32768 * 128);

BENCHMARK_MAIN();
