#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vser/augment.hpp"
#include "vser/error.hpp"
#include "vser/rng.hpp"

using namespace vser;

namespace {
AudioClip tone_4s(double freq) {
    AudioClip c;
    c.sample_rate = 16000;
    c.samples.resize(64000);
    for (size_t i = 0; i < c.samples.size(); ++i)
        c.samples[i] = static_cast<float>(
            0.5 * std::sin(2.0 * oracle::kPi * freq * i / 16000.0));
    return c;
}
}  // namespace

TEST_CASE("zero time shift is the identity") {
    const auto clip = tone_4s(440.0);
    AugmentSpec spec;
    spec.kind = AugmentKind::time_shift;
    spec.shift_seconds = 0.0;
    const auto out = augment(clip, spec, 1);
    CHECK(out.samples == clip.samples);
}

TEST_CASE("time shift moves samples and zero-fills the vacated region") {
    const auto clip = tone_4s(440.0);
    AugmentSpec spec;
    spec.kind = AugmentKind::time_shift;
    spec.shift_seconds = 0.5;  // 8000 samples to the right
    const auto out = augment(clip, spec, 1);
    REQUIRE(out.samples.size() == clip.samples.size());
    for (int i = 0; i < 8000; ++i) CHECK(out.samples[static_cast<size_t>(i)] == 0.0f);
    for (size_t i = 8000; i < out.samples.size(); ++i)
        CHECK(out.samples[i] == clip.samples[i - 8000]);

    spec.shift_seconds = -0.25;  // left; tail zero-filled
    const auto left = augment(clip, spec, 1);
    for (size_t i = 60000; i < left.samples.size(); ++i)
        CHECK(left.samples[i] == 0.0f);
    CHECK(left.samples[0] == clip.samples[4000]);
}

TEST_CASE("noise lands at the requested SNR") {
    const auto clip = tone_4s(440.0);
    AugmentSpec spec;
    spec.kind = AugmentKind::noise;
    spec.noise_snr_db = 20.0;
    const auto out = augment(clip, spec, 99);
    double p_sig = 0, p_noise = 0;
    for (size_t i = 0; i < clip.samples.size(); ++i) {
        p_sig += static_cast<double>(clip.samples[i]) * clip.samples[i];
        const double d = out.samples[i] - clip.samples[i];
        p_noise += d * d;
    }
    const double snr = 10.0 * std::log10(p_sig / p_noise);
    CHECK(std::abs(snr - 20.0) < 0.5);
}

TEST_CASE("speed perturbation scales frequency by 1/factor") {
    const auto clip = tone_4s(1000.0);
    AugmentSpec spec;
    spec.kind = AugmentKind::speed;
    spec.speed_factor = 0.9;
    const auto out = augment(clip, spec, 4);
    REQUIRE(out.samples.size() == clip.samples.size());
    // 1000 / 0.9 = 1111.1; probe the first second, well inside the
    // surviving 3.6 s of signal
    const int peak = oracle::peak_frequency_hz(out.samples, 16000, 1050, 1180);
    CHECK(std::abs(peak - 1111) <= 2);

    spec.speed_factor = 1.1;
    const auto slow = augment(clip, spec, 4);
    const int peak_slow = oracle::peak_frequency_hz(slow.samples, 16000, 850, 980);
    CHECK(std::abs(peak_slow - 909) <= 2);
}

TEST_CASE("augmentation is deterministic and size-preserving") {
    const auto clip = tone_4s(650.0);
    Rng kinds_rng(3);
    for (auto kind :
         {AugmentKind::noise, AugmentKind::time_shift, AugmentKind::speed}) {
        const auto spec = AugmentSpec::sample(kind, 555);
        const auto a = augment(clip, spec, 777);
        const auto b = augment(clip, spec, 777);
        CHECK(a.samples == b.samples);  // bit-identical
        CHECK(a.sample_rate == clip.sample_rate);
        CHECK(a.samples.size() == clip.samples.size());
    }
}

TEST_CASE("sampled augment parameters respect their ranges") {
    for (uint64_t seed = 0; seed < 50; ++seed) {
        const auto n = AugmentSpec::sample(AugmentKind::noise, seed);
        CHECK(n.noise_snr_db >= 15.0);
        CHECK(n.noise_snr_db <= 30.0);
        const auto t = AugmentSpec::sample(AugmentKind::time_shift, seed);
        CHECK(std::abs(t.shift_seconds) <= 1.0);
        const auto s = AugmentSpec::sample(AugmentKind::speed, seed);
        CHECK(s.speed_factor >= 0.9);
        CHECK(s.speed_factor <= 1.1);
    }
}

TEST_CASE("out-of-range specs are rejected") {
    const auto clip = tone_4s(650.0);
    AugmentSpec spec;
    spec.kind = AugmentKind::noise;
    spec.noise_snr_db = 5.0;
    CHECK_THROWS_AS(augment(clip, spec, 1), InvalidAugment);
    spec = {};
    spec.kind = AugmentKind::time_shift;
    spec.shift_seconds = 1.5;
    CHECK_THROWS_AS(augment(clip, spec, 1), InvalidAugment);
    spec = {};
    spec.kind = AugmentKind::speed;
    spec.speed_factor = 0.5;
    CHECK_THROWS_AS(augment(clip, spec, 1), InvalidAugment);
}
