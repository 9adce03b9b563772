#include <benchmark/benchmark.h>

#include "tbs/attention.hpp"
#include "tbs/episodes.hpp"
#include "tbs/model.hpp"
#include "tbs/ops.hpp"
#include "tbs/train.hpp"

namespace {

tbs::Tensor<float> random_tensor(tbs::Shape shape, tbs::Rng& rng) {
    tbs::Tensor<float> t(std::move(shape));
    for (auto& v : t.span()) v = float(rng.uniform(-1, 1));
    return t;
}

void BM_matmul(benchmark::State& state) {
    const auto n = std::size_t(state.range(0));
    tbs::Rng rng(1);
    const auto a = random_tensor({n, n}, rng), b = random_tensor({n, n}, rng);
    for (auto _ : state) {
        tbs::Tape<float> t;
        t.set_grad_enabled(false);
        benchmark::DoNotOptimize(t.value(tbs::ops::matmul(t, t.constant(a), t.constant(b))).data());
    }
    state.SetItemsProcessed(state.iterations() * std::int64_t(n * n * n));
}
BENCHMARK(BM_matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_cross_reconstruct(benchmark::State& state) {
    tbs::Rng rng(2);
    const auto model = tbs::ModelParams<float>::init(2);
    const auto src = random_tensor({64, 32}, rng), ctx = random_tensor({std::size_t(state.range(0)), 32}, rng);
    for (auto _ : state) {
        tbs::Tape<float> t;
        t.set_grad_enabled(false);
        auto out = tbs::cross_reconstruct(t, model.tbs.heads(), t.constant(src), t.constant(ctx));
        benchmark::DoNotOptimize(t.value(out.recon).data());
    }
}
BENCHMARK(BM_cross_reconstruct)->Arg(8)->Arg(64);

void BM_generate_episode(benchmark::State& state) {
    tbs::GenConfig cfg;
    cfg.shots = std::size_t(state.range(0));
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(tbs::generate_episode(cfg, seed++).query.image.data());
}
BENCHMARK(BM_generate_episode)->Arg(1)->Arg(5);

void BM_forward_episode(benchmark::State& state) {
    tbs::GenConfig cfg;
    const auto ep = tbs::generate_episode(cfg, 3);
    const auto model = tbs::ModelParams<float>::init(3);
    const tbs::Ablation ab{state.range(0) != 0, state.range(0) != 0};
    for (auto _ : state) benchmark::DoNotOptimize(tbs::episode_loss(model, ep, ab));
}
BENCHMARK(BM_forward_episode)->Arg(0)->Arg(1);

void BM_train_step(benchmark::State& state) {
    tbs::GenConfig cfg;
    std::vector<tbs::Episode> batch;
    for (std::uint64_t i = 0; i < 4; ++i) batch.push_back(tbs::generate_episode(cfg, i));
    auto st = tbs::TrainState::init(4);
    for (auto _ : state) benchmark::DoNotOptimize(tbs::train_step(st, batch, 1e-3, {}));
}
BENCHMARK(BM_train_step);

}  // namespace

BENCHMARK_MAIN();
