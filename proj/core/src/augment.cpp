#include "vser/augment.hpp"

#include <cmath>

#include "vser/error.hpp"
#include "vser/rng.hpp"

namespace vser {

const char* augment_kind_name(AugmentKind k) {
    switch (k) {
        case AugmentKind::noise: return "noise";
        case AugmentKind::time_shift: return "shift";
        case AugmentKind::speed: return "speed";
    }
    return "?";
}

void AugmentSpec::validate() const {
    if (noise_snr_db < 15.0 || noise_snr_db > 30.0)
        throw InvalidAugment("noise_snr_db outside [15, 30]");
    if (std::abs(shift_seconds) > 1.0)
        throw InvalidAugment("|shift_seconds| exceeds 1.0");
    if (speed_factor < 0.9 || speed_factor > 1.1)
        throw InvalidAugment("speed_factor outside [0.9, 1.1]");
}

AugmentSpec AugmentSpec::sample(AugmentKind kind, uint64_t seed) {
    Rng rng(seed);
    AugmentSpec s;
    s.kind = kind;
    switch (kind) {
        case AugmentKind::noise:
            s.noise_snr_db = rng.uniform(15.0, 30.0);
            break;
        case AugmentKind::time_shift:
            s.shift_seconds = rng.uniform(-1.0, 1.0);
            break;
        case AugmentKind::speed:
            s.speed_factor = rng.uniform(0.9, 1.1);
            break;
    }
    return s;
}

AudioClip augment(const AudioClip& clip, const AugmentSpec& spec,
                  uint64_t rng_seed) {
    spec.validate();
    if (clip.samples.empty() || clip.sample_rate <= 0)
        throw InvalidAudio("empty clip");

    const auto n = clip.samples.size();
    AudioClip out;
    out.sample_rate = clip.sample_rate;

    switch (spec.kind) {
        case AugmentKind::noise: {
            double power = 0.0;
            for (float s : clip.samples)
                power += static_cast<double>(s) * s;
            power /= static_cast<double>(n);
            out.samples = clip.samples;
            if (power > 0.0) {
                const double sigma = std::sqrt(
                    power * std::pow(10.0, -spec.noise_snr_db / 10.0));
                Rng rng(rng_seed);
                for (auto& s : out.samples)
                    s += static_cast<float>(sigma * rng.gaussian());
            }
            break;
        }
        case AugmentKind::time_shift: {
            const auto k = static_cast<int64_t>(
                std::llround(spec.shift_seconds * clip.sample_rate));
            out.samples.assign(n, 0.0f);
            for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) {
                const int64_t src = i - k;
                if (src >= 0 && src < static_cast<int64_t>(n))
                    out.samples[static_cast<size_t>(i)] =
                        clip.samples[static_cast<size_t>(src)];
            }
            break;
        }
        case AugmentKind::speed: {
            out.samples = sinc_resample(clip.samples, spec.speed_factor);
            out.samples.resize(n, 0.0f);
            break;
        }
    }
    return out;
}

}  // namespace vser
