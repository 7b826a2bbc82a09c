// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks for the hot paths: dense/conv kernels, one attention
// site, the full noise predictor forward and backward, one optimizer step,
// and the two generation entry points.

#include <benchmark/benchmark.h>

#include "monkey/attention.hpp"
#include "monkey/encoders.hpp"
#include "monkey/model.hpp"
#include "monkey/pipeline.hpp"
#include "monkey/rng.hpp"
#include "monkey/trainer.hpp"
#include "monkey/unet.hpp"

namespace {

using namespace monkey;

Tensor random_tensor(std::vector<int> shape, DetRng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = static_cast<float>(rng.next_gauss());
    return t;
}

const Model& bench_model() {
    static const Model model = init_model(ModelConfig{});
    return model;
}

const SyntheticSample& bench_sample() {
    static const std::vector<SyntheticSample> data = make_dataset(117, 4);
    return data[0];
}

ConditioningSequence bench_conditioning() {
    const Model& m = bench_model();
    const Tensor text = encode_text("red circle in the jungle", m.vocab, m.cfg.n_text);
    const Tensor ip = encode_image(bench_sample().reference, m.weights, m.cfg.imgenc);
    return build_conditioning(text, ip);
}

void BM_matmul_64(benchmark::State& state) {
    DetRng rng(1);
    const Tensor a = random_tensor({64, 64}, rng);
    const Tensor b = random_tensor({64, 64}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}
BENCHMARK(BM_matmul_64);

void BM_conv2d_32ch_16px(benchmark::State& state) {
    DetRng rng(2);
    const Tensor x = random_tensor({32, 16, 16}, rng);
    const Tensor w = random_tensor({32, 32, 3, 3}, rng);
    const Tensor b = random_tensor({32}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, &b, 1, 1));
}
BENCHMARK(BM_conv2d_32ch_16px);

void BM_cross_attention_site(benchmark::State& state) {
    // The capture site's geometry: 8x8 positions, width 64, 20 tokens.
    const Model& m = bench_model();
    const ConditioningSequence cond = bench_conditioning();
    DetRng rng(3);
    const Tensor features = random_tensor({64, 64}, rng);
    const AttentionWeights weights{&m.weights.at("up1.attn2.wq"), &m.weights.at("up1.attn2.wk"),
                                   &m.weights.at("up1.attn2.wv"), &m.weights.at("up1.attn2.wo"),
                                   4};
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            cross_attention(features, cond, weights, IpMaskDirective{}, nullptr, "up1.attn2", 8,
                            8));
    }
}
BENCHMARK(BM_cross_attention_site);

void BM_predict_noise(benchmark::State& state) {
    const Model& m = bench_model();
    const ConditioningSequence cond = bench_conditioning();
    DetRng rng(4);
    const Tensor latent = random_tensor({4, 16, 16}, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            predict_noise(latent, 499, cond, m.weights, m.cfg.unet, UNetDirective{}));
    }
}
BENCHMARK(BM_predict_noise);

void BM_unet_backward(benchmark::State& state) {
    const Model& m = bench_model();
    const ConditioningSequence cond = bench_conditioning();
    DetRng rng(5);
    const Tensor latent = random_tensor({4, 16, 16}, rng);
    UNetTrace trace;
    const Tensor eps =
        predict_noise(latent, 499, cond, m.weights, m.cfg.unet, UNetDirective{}, nullptr, &trace);
    const Tensor deps = random_tensor(eps.shape(), rng);
    for (auto _ : state) {
        ModelWeights grads;
        Tensor dtokens(cond.tokens.shape());
        unet_backward(trace, cond, m.weights, m.cfg.unet, deps, grads, dtokens);
        benchmark::DoNotOptimize(grads);
    }
}
BENCHMARK(BM_unet_backward);

void BM_train_step(benchmark::State& state) {
    Model model = init_model(ModelConfig{});
    const auto dataset = make_dataset(117, 4);
    std::vector<const SyntheticSample*> batch;
    for (const auto& s : dataset) batch.push_back(&s);
    ModelWeights velocity;
    DetRng rng(6);
    for (auto _ : state) benchmark::DoNotOptimize(train_step(model, batch, 0.02f, 0.9f, velocity, rng));
}
BENCHMARK(BM_train_step);

void BM_generate_baseline(benchmark::State& state) {
    const Model& m = bench_model();
    const Tensor& reference = bench_sample().reference;
    GenerationConfig cfg;
    cfg.seed.value = 7;
    cfg.prompt = "red circle in the jungle";
    for (auto _ : state) benchmark::DoNotOptimize(generate_baseline(cfg, m, reference));
}
BENCHMARK(BM_generate_baseline);

void BM_generate_monkey(benchmark::State& state) {
    const Model& m = bench_model();
    const Tensor& reference = bench_sample().reference;
    GenerationConfig cfg;
    cfg.seed.value = 7;
    cfg.prompt = "red circle in the jungle";
    for (auto _ : state) benchmark::DoNotOptimize(generate_monkey(cfg, m, reference));
}
BENCHMARK(BM_generate_monkey);

}  // namespace

BENCHMARK_MAIN();
