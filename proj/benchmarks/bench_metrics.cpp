#include <benchmark/benchmark.h>

#include <vector>

#include "stylevar/conditioning.hpp"
#include "stylevar/metrics.hpp"

using namespace stylevar;

static void GramFromFeatureMap(benchmark::State& state) {
    const int channels = static_cast<int>(state.range(0));
    const auto fm = conditioning::seeded_feature_map(channels, 32, 32, 7);
    for (auto _ : state) {
        auto g = metrics::gram(fm);
        benchmark::DoNotOptimize(g);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(GramFromFeatureMap)->RangeMultiplier(2)->Range(8, 128)->Complexity();

static void StyleDistanceOverCorpus(benchmark::State& state) {
    const int corpus_size = static_cast<int>(state.range(0));
    const auto result = metrics::gram(conditioning::seeded_feature_map(32, 16, 16, 11));
    std::vector<metrics::GramMatrix> corpus;
    for (int i = 0; i < corpus_size; ++i) {
        corpus.push_back(
            metrics::gram(conditioning::seeded_feature_map(32, 16, 16, 100 + i)));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::sml(result, corpus));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(StyleDistanceOverCorpus)->RangeMultiplier(4)->Range(4, 256)->Complexity();

static void MatrixSqrtPsd(benchmark::State& state) {
    const int dim = static_cast<int>(state.range(0));
    const auto g = metrics::gram(conditioning::seeded_feature_map(dim, 8, 8, 13));
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::matrix_sqrt_psd(g.values()));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(MatrixSqrtPsd)->RangeMultiplier(2)->Range(8, 128)->Complexity();

static void FrechetDistance(benchmark::State& state) {
    const int dim = static_cast<int>(state.range(0));
    const auto make_stats = [dim](std::uint64_t seed) {
        const auto fm = conditioning::seeded_feature_map(dim + 1, 1, dim, seed);
        return metrics::gaussian_stats(metrics::EmbeddingSet{fm.values});
    };
    const auto a = make_stats(17);
    const auto b = make_stats(19);
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::fid(a, b));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(FrechetDistance)->RangeMultiplier(2)->Range(8, 64)->Complexity();

BENCHMARK_MAIN();
