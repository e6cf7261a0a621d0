#include "vser/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "vser/error.hpp"

namespace vser {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLogFloor = 1e-6;

// Iterative radix-2 Cooley-Tukey, in place. n must be a power of two.
void fft_pow2(std::vector<std::complex<double>>& a) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                auto u = a[i + k];
                auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

std::vector<float> hamming_window(int length) {
    if (length <= 1) throw InvalidConfig("window length must exceed 1");
    std::vector<float> w(static_cast<size_t>(length));
    for (int n = 0; n < length; ++n) {
        w[static_cast<size_t>(n)] = static_cast<float>(
            0.54 - 0.46 * std::cos(2.0 * kPi * n / (length - 1)));
    }
    return w;
}

StftParams StftParams::make(int n_fft, int hop, int win_length) {
    StftParams p;
    p.n_fft = n_fft;
    p.hop = hop;
    p.win_length = win_length;
    p.window = hamming_window(win_length);
    p.validate();
    return p;
}

void StftParams::validate() const {
    if (!is_pow2(n_fft)) throw InvalidConfig("n_fft must be a power of two");
    if (win_length > n_fft || win_length < 2)
        throw InvalidConfig("win_length must be in [2, n_fft]");
    if (hop < 1) throw InvalidConfig("hop must be >= 1");
    if (static_cast<int>(window.size()) != win_length)
        throw InvalidConfig("window length mismatch");
    for (float v : window) {
        if (!(v > 0.0f) || v > 1.0f)
            throw InvalidConfig("window values must lie in (0, 1]");
    }
}

Spectrogram stft(const AudioClip& clip, const StftParams& params) {
    params.validate();
    if (clip.samples.empty()) throw InvalidAudio("empty clip");

    const int n = params.n_fft;
    const int bins = n / 2 + 1;
    const auto len = static_cast<int64_t>(clip.samples.size());
    const int frames = static_cast<int>(len / params.hop) + 1;

    Spectrogram out;
    out.bins = bins;
    out.frames = frames;
    out.mag.assign(static_cast<size_t>(bins) * frames, 0.0f);

    std::vector<std::complex<double>> buf(static_cast<size_t>(n));
    for (int m = 0; m < frames; ++m) {
        const int64_t start = static_cast<int64_t>(m) * params.hop;
        for (int i = 0; i < n; ++i) {
            double v = 0.0;
            if (i < params.win_length) {
                const int64_t idx = start + i;
                if (idx < len) {
                    v = static_cast<double>(clip.samples[static_cast<size_t>(
                            idx)]) *
                        params.window[static_cast<size_t>(i)];
                }
            }
            buf[static_cast<size_t>(i)] = {v, 0.0};
        }
        fft_pow2(buf);
        for (int k = 0; k < bins; ++k) {
            out.at(k, m) =
                static_cast<float>(std::abs(buf[static_cast<size_t>(k)]));
        }
    }
    return out;
}

double mel_scale(double f_hz) {
    if (f_hz < 0.0) throw InvalidFrequency("frequency must be non-negative");
    return 2595.0 * std::log10(1.0 + f_hz / 700.0);
}

double mel_scale_inverse(double mel) {
    return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterbank mel_filterbank(int n_mels, int n_fft, int sample_rate) {
    if (n_mels < 1) throw InvalidConfig("n_mels must be >= 1");
    const int bins = n_fft / 2 + 1;
    if (n_mels > bins)
        throw InvalidConfig("n_mels exceeds frequency bin count");

    MelFilterbank fb;
    fb.n_mels = n_mels;
    fb.bins = bins;
    fb.f_min = 0.0;
    fb.f_max = sample_rate / 2.0;
    fb.weights.assign(static_cast<size_t>(n_mels) * bins, 0.0f);

    const double mel_max = mel_scale(fb.f_max);
    fb.edges_hz.resize(static_cast<size_t>(n_mels) + 2);
    for (int i = 0; i < n_mels + 2; ++i) {
        fb.edges_hz[static_cast<size_t>(i)] =
            mel_scale_inverse(mel_max * i / (n_mels + 1));
    }

    const double hz_per_bin = static_cast<double>(sample_rate) / n_fft;
    for (int m = 0; m < n_mels; ++m) {
        for (int k = 0; k < bins; ++k) {
            fb.weights[static_cast<size_t>(m) * bins + k] =
                static_cast<float>(mel_triangle_weight(fb, m, k * hz_per_bin));
        }
    }
    return fb;
}

double mel_triangle_weight(const MelFilterbank& fb, int m, double f_hz) {
    const double f0 = fb.edges_hz[static_cast<size_t>(m)];
    const double f1 = fb.edges_hz[static_cast<size_t>(m) + 1];
    const double f2 = fb.edges_hz[static_cast<size_t>(m) + 2];
    if (f_hz > f0 && f_hz <= f1) return (f_hz - f0) / (f1 - f0);
    if (f_hz > f1 && f_hz < f2) return (f2 - f_hz) / (f2 - f1);
    return 0.0;
}

Image log_mel_image(const Spectrogram& spec, const MelFilterbank& fb) {
    if (spec.bins != fb.bins)
        throw ShapeError("spectrogram/filterbank bin mismatch");
    if (spec.frames < 2) throw ShapeError("need at least two frames");

    const int n_mels = fb.n_mels;
    const int frames = spec.frames;

    // mel power, then log
    std::vector<double> logmel(static_cast<size_t>(n_mels) * frames);
    for (int m = 0; m < n_mels; ++m) {
        for (int t = 0; t < frames; ++t) {
            double acc = 0.0;
            for (int k = 0; k < spec.bins; ++k) {
                const double a = spec.at(k, t);
                const double w = fb.at(m, k);
                if (w != 0.0) acc += w * a * a;
            }
            logmel[static_cast<size_t>(m) * frames + t] =
                std::log(acc + kLogFloor);
        }
    }

    // linear interpolation along time to kImageSize columns
    Image img(n_mels, kImageSize);
    for (int m = 0; m < n_mels; ++m) {
        const double* row = logmel.data() + static_cast<size_t>(m) * frames;
        for (int j = 0; j < kImageSize; ++j) {
            const double pos =
                static_cast<double>(j) * (frames - 1) / (kImageSize - 1);
            const auto lo = static_cast<int>(std::floor(pos));
            const int hi = std::min(lo + 1, frames - 1);
            const double frac = pos - lo;
            img.at(m, j) = static_cast<float>(row[lo] * (1.0 - frac) +
                                              row[hi] * frac);
        }
    }

    // per-image min-max normalization; constant image maps to zeros
    float lo = std::numeric_limits<float>::max();
    float hi = std::numeric_limits<float>::lowest();
    for (float v : img.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi - lo <= 0.0f) {
        std::fill(img.data.begin(), img.data.end(), 0.0f);
    } else {
        const float inv = 1.0f / (hi - lo);
        for (float& v : img.data) v = (v - lo) * inv;
    }
    return img;
}

Image clip_to_log_mel(const AudioClip& standardized, const StftParams& params,
                      const MelFilterbank& fb) {
    return log_mel_image(stft(standardized, params), fb);
}

}  // namespace vser
