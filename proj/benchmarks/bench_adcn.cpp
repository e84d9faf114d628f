#include <benchmark/benchmark.h>

#include "adcn/harness.hpp"

using namespace adcn;

namespace {

EvolvingNetwork network(std::size_t u, std::size_t depth) {
    Rng rng(1);
    EvolvingNetwork net = make_network(NetworkShape{u, 4 * u, 4 * u, 2 * u, 10}, rng);
    for (std::size_t d = 1; d < depth; ++d) add_layer(net, rng, 10);
    return net;
}

Vector input(std::size_t u) {
    Rng rng(2);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Vector x(u);
    for (auto& v : x) v = dist(rng);
    return x;
}

void BM_ForwardStack(benchmark::State& state) {
    const auto u = static_cast<std::size_t>(state.range(0));
    const EvolvingNetwork net = network(u, static_cast<std::size_t>(state.range(1)));
    const Vector x = input(u);
    for (auto _ : state) benchmark::DoNotOptimize(forward_stack(net, x));
}
BENCHMARK(BM_ForwardStack)->Args({4, 1})->Args({8, 3})->Args({64, 2});

void BM_LayerGradients(benchmark::State& state) {
    const auto u = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    const AeLayer layer = make_layer(u, 2 * u, rng);
    const Vector x = input(u);
    const std::optional<Vector> pull = Vector(2 * u, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(layer_gradients(layer, x, pull, 0.01));
}
BENCHMARK(BM_LayerGradients)->Arg(16)->Arg(96)->Arg(500);

void BM_ExtractorGradients(benchmark::State& state) {
    const auto u = static_cast<std::size_t>(state.range(0));
    Rng rng(4);
    const FeatureExtractor fe = make_extractor(u, 4 * u, 4 * u, rng);
    const Vector x = input(u);
    for (auto _ : state) benchmark::DoNotOptimize(extractor_gradients(fe, x, std::nullopt));
}
BENCHMARK(BM_ExtractorGradients)->Arg(4)->Arg(32);

void BM_DetectDrift(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(5);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Vector batch(n);
    for (auto& v : batch) v = dist(rng);
    DriftDetector det;
    (void)det.detect(batch);
    for (auto _ : state) benchmark::DoNotOptimize(det.detect(batch));
}
BENCHMARK(BM_DetectDrift)->Arg(1000)->Arg(10000);

void BM_ProcessBatch(benchmark::State& state) {
    ExperimentConfig cfg;
    cfg.epochs = 5;
    cfg = cfg.resolved(3);
    const LabeledData data = gen_sea(6000, 0.1, 1);
    Learner base(cfg, 3, 2);
    base.pretrain(data.slice(0, 1000).x);
    base.reveal_labels(data.slice(0, 1000));
    const auto batches = batch_iter(data.slice(1000, 5000), 1000);
    for (auto _ : state) {
        state.PauseTiming();
        Learner l = base;
        state.ResumeTiming();
        for (const auto& b : batches) benchmark::DoNotOptimize(l.process_batch(b));
    }
    state.SetItemsProcessed(state.iterations() * 5000);
}
BENCHMARK(BM_ProcessBatch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
