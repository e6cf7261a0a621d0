#pragma once

#include <filesystem>
#include <vector>

namespace vser {

// Mono waveform. Samples are nominally in [-1, 1].
struct AudioClip {
    std::vector<float> samples;
    int sample_rate = 0;

    double duration_s() const {
        return sample_rate > 0
                   ? static_cast<double>(samples.size()) / sample_rate
                   : 0.0;
    }
};

// RIFF/WAV reader: PCM 16-bit or IEEE float 32-bit, mono or stereo
// (stereo is averaged to mono). Anything else throws InvalidAudio.
AudioClip load_wav(const std::filesystem::path& path);

enum class WavEncoding { pcm16, float32 };
void save_wav(const std::filesystem::path& path, const AudioClip& clip,
              WavEncoding enc = WavEncoding::pcm16);

// Windowed-sinc fractional resampler, Hamming window, 64 taps.
// output[n] = x(n / ratio); output length = round(len * ratio).
// Anti-alias cutoff is min(1, ratio) of the source Nyquist.
std::vector<float> sinc_resample(const std::vector<float>& x, double ratio);

// Resample to target_rate, then trim or zero-pad at the tail to exactly
// duration_s seconds. A clip already at the target rate and length is
// returned unchanged.
AudioClip standardize(const AudioClip& clip, int target_rate = 16000,
                      double duration_s = 4.0);

}  // namespace vser
