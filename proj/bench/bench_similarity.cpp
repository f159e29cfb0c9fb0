#include <random>
#include <vector>

#include <benchmark/benchmark.h>
#include <omp.h>

#include "portal/kernels.hpp"

namespace {

using portal::kernels::Row;

struct Batch {
    std::vector<float> query;
    std::vector<std::vector<float>> storage;
    std::vector<Row> rows;
};

Batch make_batch(std::size_t n, std::size_t dim) {
    std::mt19937_64 rng(42);
    std::normal_distribution<float> g;
    Batch b;
    b.query.resize(dim);
    for (auto& v : b.query) v = g(rng);
    b.storage.assign(n, std::vector<float>(dim));
    for (auto& row : b.storage)
        for (auto& v : row) v = g(rng);
    for (const auto& row : b.storage) b.rows.emplace_back(row);
    return b;
}

void BM_cosine_serial(benchmark::State& state) {
    const Batch b = make_batch(static_cast<std::size_t>(state.range(0)), 512);
    std::vector<double> out(b.rows.size());
    for (auto _ : state) {
        portal::kernels::cosine_scores_serial(b.query, b.rows, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_cosine_parallel(benchmark::State& state) {
    const Batch b = make_batch(static_cast<std::size_t>(state.range(0)), 512);
    std::vector<double> out(b.rows.size());
    for (auto _ : state) {
        portal::kernels::cosine_scores_parallel(b.query, b.rows, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
    state.counters["threads"] = omp_get_max_threads();
}

}  // namespace

BENCHMARK(BM_cosine_serial)->RangeMultiplier(8)->Range(64, 32768);
BENCHMARK(BM_cosine_parallel)->RangeMultiplier(8)->Range(64, 32768);

BENCHMARK_MAIN();
