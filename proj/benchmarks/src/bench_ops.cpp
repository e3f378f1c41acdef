// Microbenchmarks for the hot paths: dense convolution, the fused
// shift-attention block, adaptive edge extraction, and the distribution
// distance. Shapes mirror the sizes the pipeline actually runs at.

#include <benchmark/benchmark.h>

#include "unipcb/condgen.hpp"
#include "unipcb/detector.hpp"
#include "unipcb/metrics.hpp"
#include "unipcb/nn_ops.hpp"
#include "unipcb/rng.hpp"
#include "unipcb/tensor.hpp"

using namespace unipcb;

namespace {

void bm_conv2d(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const ConvParams p = make_conv(c, c, 3, 1, 1, 1, rng);
    const Tensor x = Tensor::random_normal({1, c, 32, 32}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, p));
}

void bm_irsa_forward(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    const det::IrsaParams p = det::make_irsa(c, 2, 8, 2, rng);
    const Tensor x = Tensor::random_normal({1, c, 16, 16}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(det::irsa_forward(x, p));
}

void bm_adaptive_canny(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    GrayImage img(side, side);
    for (auto& px : img.data) px = static_cast<std::uint8_t>(rng.uniform_int(256));
    const cond::EdgeConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(cond::adaptive_canny(img, cfg));
}

void bm_fid(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    Rng rng(4);
    const auto real = metrics::FeatureStats::from_samples(
        Tensor::random_normal({4 * d, d}, rng));
    const auto gen = metrics::FeatureStats::from_samples(
        Tensor::random_normal({4 * d, d}, rng));
    for (auto _ : state) benchmark::DoNotOptimize(metrics::fid(real, gen));
}

} // namespace

BENCHMARK(bm_conv2d)->Arg(8)->Arg(16)->Arg(32);
BENCHMARK(bm_irsa_forward)->Arg(8)->Arg(16);
BENCHMARK(bm_adaptive_canny)->Arg(64)->Arg(128);
BENCHMARK(bm_fid)->Arg(16)->Arg(64);

BENCHMARK_MAIN();
