#include <benchmark/benchmark.h>

#include "stylevar/conditioning.hpp"

using namespace stylevar;

static void WindowedStyleEncode(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    const auto fm = conditioning::seeded_feature_map(16, side, side, 23);
    const auto weights = conditioning::AttentionWeights::seeded(16, 29);
    const conditioning::WindowConfig cfg{4};
    for (auto _ : state) {
        auto encoded = conditioning::style_encode(fm, cfg, weights);
        benchmark::DoNotOptimize(encoded);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(WindowedStyleEncode)->RangeMultiplier(2)->Range(8, 64)->Complexity();

static void CrossAttention(benchmark::State& state) {
    const int len = static_cast<int>(state.range(0));
    const auto query = conditioning::seeded_tokens(len, 32, 31);
    const auto condition = conditioning::seeded_tokens(77, 32, 37);
    const auto weights = conditioning::AttentionWeights::seeded(32, 41);
    for (auto _ : state) {
        auto out = conditioning::cross_attention(query, condition, weights);
        benchmark::DoNotOptimize(out);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(CrossAttention)->RangeMultiplier(2)->Range(16, 256)->Complexity();

static void GatedTrajectory(benchmark::State& state) {
    const int steps = static_cast<int>(state.range(0));
    const auto init = conditioning::seeded_tokens(16, 16, 43);
    const auto condition = conditioning::seeded_tokens(8, 16, 47);
    const auto weights = conditioning::AttentionWeights::seeded(16, 53);
    conditioning::SamplerConfig cfg;
    cfg.total_steps = steps;
    cfg.gate_step = steps * 3 / 5;
    for (auto _ : state) {
        auto states = conditioning::gated_sample(init, condition, cfg, weights);
        benchmark::DoNotOptimize(states);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(GatedTrajectory)->RangeMultiplier(2)->Range(25, 200)->Complexity();
