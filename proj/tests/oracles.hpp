// Test-only reference implementations, independent of the library's
// computation paths: a naive O(N^2) DFT, central finite differences, a
// direct six-loop convolution, a textbook Adam update and a brute-force
// Gaussian blur. Expected test values are computed with these.
#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "vser/tensor.hpp"

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

// |sum_n x[n] e^{-j 2 pi k n / N}| for k = 0..N/2 on an already windowed,
// zero-padded frame of length N.
inline std::vector<double> naive_dft_mag(const std::vector<double>& frame) {
    const auto n = frame.size();
    std::vector<double> mag(n / 2 + 1);
    for (size_t k = 0; k < mag.size(); ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (size_t i = 0; i < n; ++i) {
            const double ang = -2.0 * kPi * static_cast<double>(k) *
                               static_cast<double>(i) / static_cast<double>(n);
            acc += frame[i] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        mag[k] = std::abs(acc);
    }
    return mag;
}

// Windowed frame m of a clip per the analysis contract: samples
// [m*hop, m*hop + win_len) times the window, zero-padded to n_fft.
inline std::vector<double> build_frame(const std::vector<float>& x, int m,
                                       int hop, int win_len, int n_fft,
                                       const std::vector<float>& window) {
    std::vector<double> frame(static_cast<size_t>(n_fft), 0.0);
    for (int i = 0; i < win_len; ++i) {
        const auto idx = static_cast<size_t>(m) * hop + static_cast<size_t>(i);
        if (idx < x.size())
            frame[static_cast<size_t>(i)] =
                static_cast<double>(x[idx]) * window[static_cast<size_t>(i)];
    }
    return frame;
}

// Magnitude spectrum of an arbitrary signal segment at integer frequencies
// [f_lo, f_hi] Hz; used to locate tones.
inline int peak_frequency_hz(const std::vector<float>& x, int sample_rate,
                             int f_lo, int f_hi) {
    const size_t n = std::min<size_t>(x.size(), static_cast<size_t>(sample_rate));
    double best_mag = -1.0;
    int best_f = f_lo;
    for (int f = f_lo; f <= f_hi; ++f) {
        std::complex<double> acc(0.0, 0.0);
        for (size_t i = 0; i < n; ++i) {
            const double ang = -2.0 * kPi * f * static_cast<double>(i) / sample_rate;
            acc += static_cast<double>(x[i]) *
                   std::complex<double>(std::cos(ang), std::sin(ang));
        }
        if (std::abs(acc) > best_mag) {
            best_mag = std::abs(acc);
            best_f = f;
        }
    }
    return best_f;
}

// Direct stride-1 pad-1 3x3 cross-correlation.
inline std::vector<double> conv3x3_direct(const std::vector<double>& x,
                                          int c_in, int h, int w,
                                          const std::vector<double>& k,
                                          int c_out,
                                          const std::vector<double>& bias) {
    std::vector<double> y(static_cast<size_t>(c_out) * h * w, 0.0);
    for (int f = 0; f < c_out; ++f)
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) {
                double acc = bias.empty() ? 0.0 : bias[static_cast<size_t>(f)];
                for (int c = 0; c < c_in; ++c)
                    for (int dy = 0; dy < 3; ++dy)
                        for (int dx = 0; dx < 3; ++dx) {
                            const int sy = yy + dy - 1, sx = xx + dx - 1;
                            if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                            acc += x[(static_cast<size_t>(c) * h + sy) * w + sx] *
                                   k[((static_cast<size_t>(f) * c_in + c) * 3 + dy) * 3 + dx];
                        }
                y[(static_cast<size_t>(f) * h + yy) * w + xx] = acc;
            }
    return y;
}

// Central finite differences through an arbitrary scalar-valued graph.
// Returns the worst relative error between analytic and numeric gradients
// over every element of every leaf (relative with an absolute floor of 1).
inline double grad_check(
    const std::function<vser::Tensor<double>()>& make_loss,
    std::vector<vser::Tensor<double>> leaves, double h = 1e-5) {
    for (auto& t : leaves) {
        t.set_requires_grad(true);
        t.zero_grad();
    }
    make_loss().backward();

    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (auto& t : leaves)
        analytic.push_back(t.has_grad()
                               ? t.grad()
                               : std::vector<double>(t.value().size(), 0.0));

    double worst = 0.0;
    for (size_t li = 0; li < leaves.size(); ++li) {
        auto& t = leaves[li];
        for (size_t i = 0; i < t.value().size(); ++i) {
            const double v = t.value()[i];
            const double step = h * std::max(1.0, std::abs(v));
            double fp, fm;
            {
                vser::NoGradGuard ng;
                t.value()[i] = v + step;
                fp = make_loss().item();
                t.value()[i] = v - step;
                fm = make_loss().item();
                t.value()[i] = v;
            }
            const double numeric = (fp - fm) / (2.0 * step);
            const double a = analytic[li][i];
            const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    }
    return worst;
}

// Textbook bias-corrected Adam on a scalar; mirrors the published update
// rule rather than the library implementation.
struct ScalarAdam {
    double m = 0, v = 0;
    long long t = 0;
    double step(double param, double grad, double lr, double b1 = 0.9,
                double b2 = 0.999, double eps = 1e-8) {
        ++t;
        m = b1 * m + (1 - b1) * grad;
        v = b2 * v + (1 - b2) * grad * grad;
        const double mhat = m / (1 - std::pow(b1, static_cast<double>(t)));
        const double vhat = v / (1 - std::pow(b2, static_cast<double>(t)));
        return param - lr * mhat / (std::sqrt(vhat) + eps);
    }
};

// Brute-force Gaussian blur with per-pixel renormalized truncated mass.
inline std::vector<double> gaussian_blur_direct(const std::vector<float>& img,
                                                int h, int w, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> out(static_cast<size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0, mass = 0.0;
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int sy = y + dy, sx = x + dx;
                    if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                    const double k =
                        std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
                    acc += k * img[static_cast<size_t>(sy) * w + sx];
                    mass += k;
                }
            out[static_cast<size_t>(y) * w + x] = acc / mass;
        }
    return out;
}

}  // namespace oracle
