#include <benchmark/benchmark.h>

#include <random>

#include "tnml/svd.hpp"
#include "tnml/tensor.hpp"

using namespace tnml;

namespace {

Tensor<double> random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng) {
    Tensor<double> t(std::move(shape));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

void BM_Contract(benchmark::State& state) {
    const std::size_t m = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    auto a = random_tensor({m, 2, m}, rng);
    auto b = random_tensor({m, 2, m}, rng);
    for (auto _ : state) {
        auto c = contract(a, b, {{2, 0}});
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * 2 * m * m * m * 4);
}
BENCHMARK(BM_Contract)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

void BM_SvdJacobi(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(2);
    auto m = random_tensor({n, n}, rng);
    for (auto _ : state) {
        auto r = svd(m, {0}, {1});
        benchmark::DoNotOptimize(r.S.data());
    }
}
BENCHMARK(BM_SvdJacobi)->Arg(16)->Arg(32)->Arg(64);

void BM_SvdLapack(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(3);
    auto m = random_tensor({n, n}, rng);
    for (auto _ : state) {
        auto r = svd(m, {0}, {1});
        benchmark::DoNotOptimize(r.S.data());
    }
}
BENCHMARK(BM_SvdLapack)->Arg(80)->Arg(160)->Arg(320);

}  // namespace

BENCHMARK_MAIN();
