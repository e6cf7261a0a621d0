#pragma once

#include <vector>

#include "vser/audio.hpp"
#include "vser/image.hpp"

namespace vser {

// Symmetric Hamming window: w[n] = 0.54 - 0.46 cos(2 pi n / (L - 1)).
std::vector<float> hamming_window(int length);

struct StftParams {
    int n_fft = 1024;
    int hop = 64;
    int win_length = 512;
    std::vector<float> window;  // length win_length

    static StftParams make(int n_fft = 1024, int hop = 64,
                           int win_length = 512);
    void validate() const;
};

// Magnitude spectrogram, [n_fft/2 + 1 frequency bins] x [time frames].
struct Spectrogram {
    int bins = 0;
    int frames = 0;
    std::vector<float> mag;  // bins * frames, row-major (bin-major)

    float& at(int bin, int frame) {
        return mag[static_cast<size_t>(bin) * frames + frame];
    }
    float at(int bin, int frame) const {
        return mag[static_cast<size_t>(bin) * frames + frame];
    }
};

// Frame m covers samples [m*hop, m*hop + win_length); the signal is
// zero-extended past its end, so frame count is len/hop + 1.
Spectrogram stft(const AudioClip& clip, const StftParams& params);

// mel(f) = 2595 log10(1 + f/700). Throws InvalidFrequency for f < 0.
double mel_scale(double f_hz);
double mel_scale_inverse(double mel);

struct MelFilterbank {
    int n_mels = 0;
    int bins = 0;  // n_fft/2 + 1
    std::vector<float> weights;  // n_mels * bins, row-major
    std::vector<double> edges_hz;  // n_mels + 2 triangle edges
    double f_min = 0.0, f_max = 0.0;

    float at(int mel, int bin) const {
        return weights[static_cast<size_t>(mel) * bins + bin];
    }
};

// Triangular filters with peaks 1, centers equally spaced on the mel axis
// between mel(0) and mel(sample_rate/2).
MelFilterbank mel_filterbank(int n_mels, int n_fft, int sample_rate);

// Continuous triangle of filter m evaluated at f_hz. The discrete weights
// matrix samples this at the FFT bin frequencies.
double mel_triangle_weight(const MelFilterbank& fb, int m, double f_hz);

// Projects power (magnitude squared) through the filterbank, takes
// log(. + 1e-6), linearly resamples the time axis to kImageSize columns
// and min-max normalizes to [0, 1]. A constant image maps to all zeros.
// Row 0 is the lowest mel band.
Image log_mel_image(const Spectrogram& spec, const MelFilterbank& fb);

// Full pipeline: standardize is assumed done by the caller.
Image clip_to_log_mel(const AudioClip& standardized, const StftParams& params,
                      const MelFilterbank& fb);

}  // namespace vser
