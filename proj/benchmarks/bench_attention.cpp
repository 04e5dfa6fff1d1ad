// Microbenchmarks for the attention building blocks. Grown alongside the
// library; run with --benchmark_filter=... to select.

#include <benchmark/benchmark.h>

#include <cstdint>

#include "ttcnet/rng.hpp"
#include "ttcnet/segment_attention.hpp"
#include "ttcnet/stationarity.hpp"
#include "ttcnet/tensor.hpp"

namespace {

using namespace ttcnet;

void BM_BatchedScores(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const std::size_t d = 64;
    Rng rng(1);
    Tensor q = Tensor::randn({1, n, d}, rng, 0.1);
    Tensor k = Tensor::randn({1, n, d}, rng, 0.1);
    for (auto _ : state) {
        Tensor s = bmm_nt(q, k);
        benchmark::DoNotOptimize(s.data());
    }
    state.SetComplexityN(static_cast<std::int64_t>(n));
}

BENCHMARK(BM_BatchedScores)->RangeMultiplier(2)->Range(32, 512)->Complexity();

/// Single-scale segment attention over a growing sequence at a fixed segment
/// length: cost grows with the squared number of segments.
void BM_SegmentCorrelation(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const std::size_t seg_len = 8;
    const std::size_t d = 64;
    Rng rng(2);
    Tensor q = Tensor::randn({n, d}, rng, 0.1);
    Tensor k = Tensor::randn({n, d}, rng, 0.1);
    Tensor v = Tensor::randn({n, d}, rng, 0.1);
    const Rescalers rs = identity_rescalers(n / seg_len);
    for (auto _ : state) {
        Tensor out = segment_correlation(q, k, v, seg_len, rs);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetComplexityN(static_cast<std::int64_t>(n));
}

BENCHMARK(BM_SegmentCorrelation)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

/// Fixed sequence, doubling segment length: each doubling should roughly
/// halve the attention work (half as many segment pairs to score).
void BM_SegmentLength(benchmark::State& state) {
    const std::size_t n = 512;
    const std::size_t seg_len = static_cast<std::size_t>(state.range(0));
    const std::size_t d = 64;
    Rng rng(3);
    Tensor q = Tensor::randn({n, d}, rng, 0.1);
    Tensor k = Tensor::randn({n, d}, rng, 0.1);
    Tensor v = Tensor::randn({n, d}, rng, 0.1);
    const Rescalers rs = identity_rescalers(n / seg_len);
    for (auto _ : state) {
        Tensor out = segment_correlation(q, k, v, seg_len, rs);
        benchmark::DoNotOptimize(out.data());
    }
}

BENCHMARK(BM_SegmentLength)->RangeMultiplier(2)->Range(1, 64);

/// Full multi-scale attention as the scale count grows; each added scale
/// doubles the coarsest segment length.
void BM_MultiScale(benchmark::State& state) {
    const std::size_t n = 256;
    const std::size_t d = 64;
    SegmentAttentionConfig cfg;
    cfg.base_segment_len = 2;
    cfg.num_scales = static_cast<std::size_t>(state.range(0));
    cfg.num_heads = 4;
    Rng rng(4);
    Tensor q = Tensor::randn({n, d}, rng, 0.1);
    Tensor k = Tensor::randn({n, d}, rng, 0.1);
    Tensor v = Tensor::randn({n, d}, rng, 0.1);
    const Rescalers rs = identity_rescalers(coarsest_segment_count(n, cfg));
    for (auto _ : state) {
        Tensor out = mssc(q, k, v, cfg, rs);
        benchmark::DoNotOptimize(out.data());
    }
}

BENCHMARK(BM_MultiScale)->DenseRange(1, 5);

/// Predictive (lagged) variant at the same shapes as the plain one.
void BM_PredictiveMultiScale(benchmark::State& state) {
    const std::size_t n = 256;
    const std::size_t d = 64;
    SegmentAttentionConfig cfg;
    cfg.base_segment_len = 2;
    cfg.num_scales = static_cast<std::size_t>(state.range(0));
    cfg.num_heads = 4;
    Rng rng(5);
    Tensor q = Tensor::randn({n, d}, rng, 0.1);
    Tensor k = Tensor::randn({n, d}, rng, 0.1);
    Tensor v = Tensor::randn({n, d}, rng, 0.1);
    const Rescalers rs = identity_rescalers(coarsest_segment_count(n, cfg));
    for (auto _ : state) {
        Tensor out = pre_mssc(q, k, v, cfg, rs);
        benchmark::DoNotOptimize(out.data());
    }
}

BENCHMARK(BM_PredictiveMultiScale)->DenseRange(1, 5);

}  // namespace

BENCHMARK_MAIN();
