#include <benchmark/benchmark.h>

#include "volnet/network.hpp"
#include "volnet/rng.hpp"
#include "volnet/series.hpp"
#include "volnet/trainer.hpp"

using namespace volnet;

namespace {

Volume random_volume(Rng& rng, std::vector<std::size_t> shape) {
    Volume v(std::move(shape));
    for (double& x : v.values()) x = rng.uniform(-1.0, 1.0);
    return v;
}

} // namespace

static void BM_Conv3dForward(benchmark::State& state) {
    // First layer of the default network: 1x43x51x40 through 16 kernels of 5^3.
    Rng rng(1);
    Volume input = random_volume(rng, {1, 43, 51, 40});
    LayerParams params(random_volume(rng, {16, 1, 5, 5, 5}), random_volume(rng, {16}));
    for (auto _ : state) {
        Tape tape;
        const auto out = conv3d(tape, tape.leaf(input), params);
        benchmark::DoNotOptimize(tape.value(out).data());
    }
}
BENCHMARK(BM_Conv3dForward)->Unit(benchmark::kMillisecond);

static void BM_Conv3dForwardBackward(benchmark::State& state) {
    Rng rng(2);
    Volume input = random_volume(rng, {1, 43, 51, 40});
    LayerParams params(random_volume(rng, {16, 1, 5, 5, 5}), random_volume(rng, {16}));
    for (auto _ : state) {
        params.zero_grads();
        Tape tape;
        const auto in_node = tape.leaf(input);
        const auto out = conv3d(tape, in_node, params);
        tape.backward_with(out, Volume::full(tape.value(out).shape(), 1.0));
        benchmark::DoNotOptimize(tape.grad(in_node).data());
    }
}
BENCHMARK(BM_Conv3dForwardBackward)->Unit(benchmark::kMillisecond);

static void BM_Maxpool3d(benchmark::State& state) {
    Rng rng(3);
    Volume input = random_volume(rng, {16, 39, 47, 36});
    for (auto _ : state) {
        Tape tape;
        const auto out = maxpool3d(tape, tape.leaf(input), 2);
        benchmark::DoNotOptimize(tape.value(out).data());
    }
}
BENCHMARK(BM_Maxpool3d)->Unit(benchmark::kMillisecond);

static void BM_NetworkForward(benchmark::State& state) {
    CnnConfig config;
    CnnParams params = init_params(config, 4);
    Rng rng(5);
    Volume sample = random_volume(rng, {43, 51, 40});
    for (auto _ : state) {
        benchmark::DoNotOptimize(predict(config, params, sample));
    }
}
BENCHMARK(BM_NetworkForward)->Unit(benchmark::kMillisecond);

static void BM_NetworkTrainStep(benchmark::State& state) {
    // One 8-sample batch through the default network, forward and backward.
    CnnConfig config;
    config.n_threads = static_cast<std::size_t>(state.range(0));
    CnnParams params = init_params(config, 6);
    Rng rng(7);
    std::vector<Volume> samples;
    std::vector<BatchItem> batch;
    for (int i = 0; i < 8; ++i) {
        samples.push_back(random_volume(rng, {43, 51, 40}));
    }
    for (int i = 0; i < 8; ++i) {
        batch.push_back(BatchItem{&samples[i], i % 2});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(train_step(params, batch, 1e-4, config));
    }
}
BENCHMARK(BM_NetworkTrainStep)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

static void BM_SlidingWindowMean(benchmark::State& state) {
    Rng rng(8);
    Series4D series;
    series.subject_id = "bench";
    series.label = 0;
    for (int t = 0; t < 30; ++t) {
        series.frames.push_back(random_volume(rng, {43, 51, 40}));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(sliding_window_mean(series, 2, 1));
    }
}
BENCHMARK(BM_SlidingWindowMean)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
