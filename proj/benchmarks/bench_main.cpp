#include <benchmark/benchmark.h>

#include <cmath>

#include "vser/dsp.hpp"
#include "vser/evalviz.hpp"
#include "vser/gemm.hpp"
#include "vser/ops.hpp"
#include "vser/rng.hpp"
#include "vser/vit.hpp"

using namespace vser;

namespace {

AudioClip four_second_clip() {
    AudioClip c;
    c.sample_rate = 16000;
    c.samples.resize(64000);
    Rng rng(1);
    for (size_t i = 0; i < c.samples.size(); ++i)
        c.samples[i] = static_cast<float>(
            0.4 * std::sin(2.0 * 3.14159265358979 * 440.0 * i / 16000.0) +
            0.1 * rng.gaussian());
    return c;
}

Image random_image(uint64_t seed) {
    Image img(kImageSize, kImageSize);
    Rng rng(seed);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    return img;
}

}  // namespace

static void BM_Stft(benchmark::State& state) {
    const auto clip = four_second_clip();
    const auto params = StftParams::make();
    for (auto _ : state) {
        auto spec = stft(clip, params);
        benchmark::DoNotOptimize(spec.mag.data());
    }
}
BENCHMARK(BM_Stft)->Unit(benchmark::kMillisecond);

static void BM_LogMelPipeline(benchmark::State& state) {
    const auto clip = four_second_clip();
    const auto params = StftParams::make();
    const auto fb = mel_filterbank(kImageSize, params.n_fft, 16000);
    for (auto _ : state) {
        auto img = clip_to_log_mel(clip, params, fb);
        benchmark::DoNotOptimize(img.data.data());
    }
}
BENCHMARK(BM_LogMelPipeline)->Unit(benchmark::kMillisecond);

static void BM_StudentForward(benchmark::State& state) {
    auto model = VitModel<float>::create(ModelSpec::student(7), 3);
    model.set_requires_grad(false);
    const auto img = random_image(2);
    NoGradGuard ng;
    for (auto _ : state) {
        auto res = model.forward(img);
        benchmark::DoNotOptimize(res.logits.value().data());
    }
}
BENCHMARK(BM_StudentForward)->Unit(benchmark::kMillisecond);

static void BM_TeacherForward(benchmark::State& state) {
    auto model = VitModel<float>::create(
        ModelSpec::teacher(static_cast<int>(state.range(0)), 5, 7), 3);
    model.set_requires_grad(false);
    const auto img = random_image(2);
    NoGradGuard ng;
    for (auto _ : state) {
        auto res = model.forward(img);
        benchmark::DoNotOptimize(res.logits.value().data());
    }
}
BENCHMARK(BM_TeacherForward)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);

static void BM_TeacherTrainStep(benchmark::State& state) {
    auto model = VitModel<float>::create(ModelSpec::teacher(3, 5, 7), 3);
    const auto img = random_image(2);
    for (auto _ : state) {
        for (auto& p : model.params()) p.zero_grad();
        auto res = model.forward(img);
        cross_entropy(res.logits, {1}).backward();
        benchmark::DoNotOptimize(res.logits.value().data());
    }
}
BENCHMARK(BM_TeacherTrainStep)->Unit(benchmark::kMillisecond);

static void BM_AttentionMask(benchmark::State& state) {
    auto model = VitModel<float>::create(ModelSpec::student(7), 3);
    model.set_requires_grad(false);
    const auto img = random_image(2);
    NoGradGuard ng;
    const auto res = model.forward(img);
    for (auto _ : state) {
        auto mask = gaussian_smooth(
            extract_attention_mask(res, model.spec()), 2.0);
        benchmark::DoNotOptimize(mask.image.data.data());
    }
}
BENCHMARK(BM_AttentionMask)->Unit(benchmark::kMillisecond);

static void BM_Gemm(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    std::vector<float> a(static_cast<size_t>(n) * n), b(a), c(a);
    Rng rng(4);
    for (auto& v : a) v = static_cast<float>(rng.uniform());
    for (auto& v : b) v = static_cast<float>(rng.uniform());
    for (auto _ : state) {
        detail::gemm<float>(false, false, n, n, n, 1.0f, a.data(), b.data(),
                            0.0f, c.data());
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * 2ll * n * n * n);
}
BENCHMARK(BM_Gemm)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
