#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "vser/gemm.hpp"
#include "vser/tensor.hpp"

namespace vser {

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape() != b.shape()) throw ShapeError("add: shape mismatch");
    const auto n = a.value().size();
    std::vector<S> v(n);
    for (size_t i = 0; i < n; ++i) v[i] = a.value()[i] + b.value()[i];
    Tensor<S> out = Tensor<S>::from(a.shape(), std::move(v));
    if (grad_enabled() && (a.requires_grad() || b.requires_grad())) {
        auto self = out.node();
        out.set_op({a, b}, [self, a, b]() mutable {
            const auto& g = self->grad;
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        });
    }
    return out;
}

template <class S>
Tensor<S> scale(const Tensor<S>& a, S factor) {
    const auto n = a.value().size();
    std::vector<S> v(n);
    for (size_t i = 0; i < n; ++i) v[i] = a.value()[i] * factor;
    Tensor<S> out = Tensor<S>::from(a.shape(), std::move(v));
    if (grad_enabled() && a.requires_grad()) {
        auto self = out.node();
        out.set_op({a}, [self, a, factor]() mutable {
            auto& ga = a.grad();
            const auto& g = self->grad;
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
        });
    }
    return out;
}

// Exact GELU, x * Phi(x) with Phi from erf.
template <class S>
Tensor<S> gelu(const Tensor<S>& x) {
    const S inv_sqrt2 = static_cast<S>(0.70710678118654752440);
    const S inv_sqrt2pi = static_cast<S>(0.39894228040143267794);
    const S half = static_cast<S>(0.5);
    const auto n = x.value().size();
    std::vector<S> v(n), phis(n);
    for (size_t i = 0; i < n; ++i) {
        const S xv = x.value()[i];
        const S phi = half * (S(1) + std::erf(xv * inv_sqrt2));
        phis[i] = phi;
        v[i] = xv * phi;
    }
    Tensor<S> out = Tensor<S>::from(x.shape(), std::move(v));
    if (grad_enabled() && x.requires_grad()) {
        auto self = out.node();
        out.set_op({x}, [self, x, phis = std::move(phis), inv_sqrt2pi,
                         half]() mutable {
            auto& gx = x.grad();
            const auto& g = self->grad;
            for (size_t i = 0; i < g.size(); ++i) {
                const S xv = x.value()[i];
                const S pdf = inv_sqrt2pi * std::exp(-half * xv * xv);
                gx[i] += g[i] * (phis[i] + xv * pdf);
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul: incompatible shapes");
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<S> v(static_cast<size_t>(m) * n);
    detail::gemm<S>(false, false, m, n, k, S(1), a.value().data(),
                    b.value().data(), S(0), v.data());
    Tensor<S> out = Tensor<S>::from({m, n}, std::move(v));
    if (grad_enabled() && (a.requires_grad() || b.requires_grad())) {
        auto self = out.node();
        out.set_op({a, b}, [self, a, b, m, k, n]() mutable {
            const auto& g = self->grad;
            if (a.requires_grad())
                detail::gemm<S>(false, true, m, k, n, S(1), g.data(),
                                b.value().data(), S(1), a.grad().data());
            if (b.requires_grad())
                detail::gemm<S>(true, false, k, n, m, S(1), a.value().data(),
                                g.data(), S(1), b.grad().data());
        });
    }
    return out;
}

// y = x W + b with x either [T, d_in] or [d_in]; b may be undefined.
template <class S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
    if (w.rank() != 2) throw ShapeError("linear: w must be 2-D");
    const int d_in = w.dim(0), d_out = w.dim(1);
    const bool vec = x.rank() == 1;
    if ((vec && x.dim(0) != d_in) || (!vec && (x.rank() != 2 || x.dim(1) != d_in)))
        throw ShapeError("linear: x/w shape mismatch");
    if (b.defined() && (b.rank() != 1 || b.dim(0) != d_out))
        throw ShapeError("linear: bad bias shape");
    const int rows = vec ? 1 : x.dim(0);

    std::vector<S> v(static_cast<size_t>(rows) * d_out);
    detail::gemm<S>(false, false, rows, d_out, d_in, S(1), x.value().data(),
                    w.value().data(), S(0), v.data());
    if (b.defined()) {
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < d_out; ++c)
                v[static_cast<size_t>(r) * d_out + c] += b.value()[static_cast<size_t>(c)];
    }
    Shape out_shape = vec ? Shape{d_out} : Shape{rows, d_out};
    Tensor<S> out = Tensor<S>::from(std::move(out_shape), std::move(v));

    const bool need = x.requires_grad() || w.requires_grad() ||
                      (b.defined() && b.requires_grad());
    if (grad_enabled() && need) {
        auto self = out.node();
        std::vector<Tensor<S>> parents = {x, w};
        if (b.defined()) parents.push_back(b);
        out.set_op(std::move(parents),
                   [self, x, w, b, rows, d_in, d_out]() mutable {
            const auto& g = self->grad;
            if (x.requires_grad())
                detail::gemm<S>(false, true, rows, d_in, d_out, S(1), g.data(),
                                w.value().data(), S(1), x.grad().data());
            if (w.requires_grad())
                detail::gemm<S>(true, false, d_in, d_out, rows, S(1),
                                x.value().data(), g.data(), S(1),
                                w.grad().data());
            if (b.defined() && b.requires_grad()) {
                auto& gb = b.grad();
                for (int r = 0; r < rows; ++r)
                    for (int c = 0; c < d_out; ++c)
                        gb[static_cast<size_t>(c)] +=
                            g[static_cast<size_t>(r) * d_out + c];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// convolution (stride 1, zero padding 1, cross-correlation convention)
// ---------------------------------------------------------------------------

namespace detail {

// Scratch buffer reused across conv calls; the stem's im2col matrices are
// tens of MB and reallocation dominates otherwise.
template <class S>
std::vector<S>& conv_scratch(size_t which, size_t n) {
    static thread_local std::vector<S> bufs[2];
    auto& b = bufs[which];
    if (b.size() < n) b.resize(n);
    return b;
}

// cols is [(C*9) x (H*W)]; row index c*9 + (dy*3 + dx).
template <class S>
void im2col_3x3(const S* x, int c_in, int h, int w, S* cols) {
    const auto plane = static_cast<size_t>(h) * w;
    for (int c = 0; c < c_in; ++c) {
        for (int dy = 0; dy < 3; ++dy) {
            for (int dx = 0; dx < 3; ++dx) {
                S* dst = cols + (static_cast<size_t>(c) * 9 + dy * 3 + dx) * plane;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + dy - 1;
                    if (sy < 0 || sy >= h) {
                        for (int xx = 0; xx < w; ++xx) dst[static_cast<size_t>(y) * w + xx] = S(0);
                        continue;
                    }
                    const S* src = x + static_cast<size_t>(c) * plane +
                                   static_cast<size_t>(sy) * w;
                    for (int xx = 0; xx < w; ++xx) {
                        const int sx = xx + dx - 1;
                        dst[static_cast<size_t>(y) * w + xx] =
                            (sx >= 0 && sx < w) ? src[sx] : S(0);
                    }
                }
            }
        }
    }
}

template <class S>
void col2im_3x3(const S* cols, int c_in, int h, int w, S* dx_accum) {
    const auto plane = static_cast<size_t>(h) * w;
    for (int c = 0; c < c_in; ++c) {
        for (int dy = 0; dy < 3; ++dy) {
            for (int dx = 0; dx < 3; ++dx) {
                const S* src = cols + (static_cast<size_t>(c) * 9 + dy * 3 + dx) * plane;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + dy - 1;
                    if (sy < 0 || sy >= h) continue;
                    S* dst = dx_accum + static_cast<size_t>(c) * plane +
                             static_cast<size_t>(sy) * w;
                    for (int xx = 0; xx < w; ++xx) {
                        const int sx = xx + dx - 1;
                        if (sx >= 0 && sx < w)
                            dst[sx] += src[static_cast<size_t>(y) * w + xx];
                    }
                }
            }
        }
    }
}

}  // namespace detail

template <class S>
Tensor<S> conv2d_3x3(const Tensor<S>& x, const Tensor<S>& kernels,
                     const Tensor<S>& bias) {
    if (x.rank() != 3) throw ShapeError("conv2d_3x3: x must be [C,H,W]");
    if (kernels.rank() != 4 || kernels.dim(2) != 3 || kernels.dim(3) != 3 ||
        kernels.dim(1) != x.dim(0))
        throw ShapeError("conv2d_3x3: kernels must be [F,C,3,3]");
    const int c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int c_out = kernels.dim(0);
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != c_out))
        throw ShapeError("conv2d_3x3: bad bias shape");

    const auto plane = static_cast<size_t>(h) * w;
    const int kdim = c_in * 9;
    auto& cols = detail::conv_scratch<S>(0, static_cast<size_t>(kdim) * plane);
    detail::im2col_3x3(x.value().data(), c_in, h, w, cols.data());

    std::vector<S> v(static_cast<size_t>(c_out) * plane);
    detail::gemm<S>(false, false, c_out, static_cast<int>(plane), kdim, S(1),
                    kernels.value().data(), cols.data(), S(0), v.data());
    if (bias.defined()) {
        for (int f = 0; f < c_out; ++f) {
            const S bv = bias.value()[static_cast<size_t>(f)];
            S* dst = v.data() + static_cast<size_t>(f) * plane;
            for (size_t i = 0; i < plane; ++i) dst[i] += bv;
        }
    }
    Tensor<S> out = Tensor<S>::from({c_out, h, w}, std::move(v));

    const bool need = x.requires_grad() || kernels.requires_grad() ||
                      (bias.defined() && bias.requires_grad());
    if (grad_enabled() && need) {
        auto self = out.node();
        std::vector<Tensor<S>> parents = {x, kernels};
        if (bias.defined()) parents.push_back(bias);
        // im2col is recomputed in backward to keep the tape small
        out.set_op(std::move(parents),
                   [self, x, kernels, bias, c_in, c_out, h, w]() mutable {
            const auto plane2 = static_cast<size_t>(h) * w;
            const int kdim2 = c_in * 9;
            const auto& g = self->grad;
            if (x.requires_grad() || kernels.requires_grad()) {
                auto& cols2 = detail::conv_scratch<S>(
                    0, static_cast<size_t>(kdim2) * plane2);
                detail::im2col_3x3(x.value().data(), c_in, h, w, cols2.data());
                if (kernels.requires_grad())
                    detail::gemm<S>(false, true, c_out, kdim2,
                                    static_cast<int>(plane2), S(1), g.data(),
                                    cols2.data(), S(1), kernels.grad().data());
                if (x.requires_grad()) {
                    auto& dcols = detail::conv_scratch<S>(
                        1, static_cast<size_t>(kdim2) * plane2);
                    detail::gemm<S>(true, false, kdim2,
                                    static_cast<int>(plane2), c_out, S(1),
                                    kernels.value().data(), g.data(), S(0),
                                    dcols.data());
                    detail::col2im_3x3(dcols.data(), c_in, h, w,
                                       x.grad().data());
                }
            }
            if (bias.defined() && bias.requires_grad()) {
                auto& gb = bias.grad();
                for (int f = 0; f < c_out; ++f) {
                    S acc = S(0);
                    const S* src = g.data() + static_cast<size_t>(f) * plane2;
                    for (size_t i = 0; i < plane2; ++i) acc += src[i];
                    gb[static_cast<size_t>(f)] += acc;
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// normalization
// ---------------------------------------------------------------------------

namespace detail {

// Shared normalization backward over a contiguous group of size n:
// dx = invstd/n * (n*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
template <class S>
void norm_group_backward(const S* x, const S* g, const S* gamma_row, S gamma_scalar,
                         S mean, S invstd, int n, S* dx) {
    S sum_dxhat = S(0), sum_dxhat_xhat = S(0);
    for (int i = 0; i < n; ++i) {
        const S gamma = gamma_row ? gamma_row[i] : gamma_scalar;
        const S dxhat = g[i] * gamma;
        const S xhat = (x[i] - mean) * invstd;
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat;
    }
    const S inv_n = S(1) / static_cast<S>(n);
    for (int i = 0; i < n; ++i) {
        const S gamma = gamma_row ? gamma_row[i] : gamma_scalar;
        const S dxhat = g[i] * gamma;
        const S xhat = (x[i] - mean) * invstd;
        dx[i] += invstd * inv_n *
                 (static_cast<S>(n) * dxhat - sum_dxhat - xhat * sum_dxhat_xhat);
    }
}

}  // namespace detail

// Per-channel normalization over the spatial axes of [C,H,W], with
// learnable per-channel scale and shift.
template <class S>
Tensor<S> instance_norm(const Tensor<S>& x, const Tensor<S>& gamma,
                        const Tensor<S>& beta, double eps = 1e-5) {
    if (x.rank() != 3) throw ShapeError("instance_norm: x must be [C,H,W]");
    const int c_n = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int n = h * w;
    if (n < 2) throw ShapeError("instance_norm: spatial size must be >= 2");
    if (gamma.rank() != 1 || gamma.dim(0) != c_n || beta.rank() != 1 ||
        beta.dim(0) != c_n)
        throw ShapeError("instance_norm: affine params must be [C]");

    std::vector<S> v(x.value().size());
    std::vector<S> means(static_cast<size_t>(c_n)), invstds(static_cast<size_t>(c_n));
    for (int c = 0; c < c_n; ++c) {
        const S* xc = x.value().data() + static_cast<size_t>(c) * n;
        S mean = S(0);
        for (int i = 0; i < n; ++i) mean += xc[i];
        mean /= static_cast<S>(n);
        S var = S(0);
        for (int i = 0; i < n; ++i) {
            const S d = xc[i] - mean;
            var += d * d;
        }
        var /= static_cast<S>(n);
        const S invstd = S(1) / std::sqrt(var + static_cast<S>(eps));
        means[static_cast<size_t>(c)] = mean;
        invstds[static_cast<size_t>(c)] = invstd;
        const S gc = gamma.value()[static_cast<size_t>(c)];
        const S bc = beta.value()[static_cast<size_t>(c)];
        S* dst = v.data() + static_cast<size_t>(c) * n;
        for (int i = 0; i < n; ++i) dst[i] = (xc[i] - mean) * invstd * gc + bc;
    }
    Tensor<S> out = Tensor<S>::from(x.shape(), std::move(v));

    if (grad_enabled() &&
        (x.requires_grad() || gamma.requires_grad() || beta.requires_grad())) {
        auto self = out.node();
        out.set_op({x, gamma, beta},
                   [self, x, gamma, beta, means, invstds, c_n, n]() mutable {
            const auto& g = self->grad;
            for (int c = 0; c < c_n; ++c) {
                const S* xc = x.value().data() + static_cast<size_t>(c) * n;
                const S* gc = g.data() + static_cast<size_t>(c) * n;
                const S mean = means[static_cast<size_t>(c)];
                const S invstd = invstds[static_cast<size_t>(c)];
                if (gamma.requires_grad() || beta.requires_grad()) {
                    S dg = S(0), db = S(0);
                    for (int i = 0; i < n; ++i) {
                        dg += gc[i] * (xc[i] - mean) * invstd;
                        db += gc[i];
                    }
                    if (gamma.requires_grad())
                        gamma.grad()[static_cast<size_t>(c)] += dg;
                    if (beta.requires_grad())
                        beta.grad()[static_cast<size_t>(c)] += db;
                }
                if (x.requires_grad()) {
                    detail::norm_group_backward<S>(
                        xc, gc, nullptr, gamma.value()[static_cast<size_t>(c)],
                        mean, invstd, n,
                        x.grad().data() + static_cast<size_t>(c) * n);
                }
            }
        });
    }
    return out;
}

// Normalization over the last axis of [T,d] or [d].
template <class S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gamma,
                     const Tensor<S>& beta, double eps = 1e-5) {
    const bool vec = x.rank() == 1;
    if (!vec && x.rank() != 2) throw ShapeError("layer_norm: x must be 1-D or 2-D");
    const int d = vec ? x.dim(0) : x.dim(1);
    const int rows = vec ? 1 : x.dim(0);
    if (d < 2) throw ShapeError("layer_norm: feature size must be >= 2");
    if (gamma.rank() != 1 || gamma.dim(0) != d || beta.rank() != 1 ||
        beta.dim(0) != d)
        throw ShapeError("layer_norm: affine params must be [d]");

    std::vector<S> v(x.value().size());
    std::vector<S> means(static_cast<size_t>(rows)), invstds(static_cast<size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        const S* xr = x.value().data() + static_cast<size_t>(r) * d;
        S mean = S(0);
        for (int i = 0; i < d; ++i) mean += xr[i];
        mean /= static_cast<S>(d);
        S var = S(0);
        for (int i = 0; i < d; ++i) {
            const S diff = xr[i] - mean;
            var += diff * diff;
        }
        var /= static_cast<S>(d);
        const S invstd = S(1) / std::sqrt(var + static_cast<S>(eps));
        means[static_cast<size_t>(r)] = mean;
        invstds[static_cast<size_t>(r)] = invstd;
        S* dst = v.data() + static_cast<size_t>(r) * d;
        for (int i = 0; i < d; ++i)
            dst[i] = (xr[i] - mean) * invstd * gamma.value()[static_cast<size_t>(i)] +
                     beta.value()[static_cast<size_t>(i)];
    }
    Tensor<S> out = Tensor<S>::from(x.shape(), std::move(v));

    if (grad_enabled() &&
        (x.requires_grad() || gamma.requires_grad() || beta.requires_grad())) {
        auto self = out.node();
        out.set_op({x, gamma, beta},
                   [self, x, gamma, beta, means, invstds, rows, d]() mutable {
            const auto& g = self->grad;
            for (int r = 0; r < rows; ++r) {
                const S* xr = x.value().data() + static_cast<size_t>(r) * d;
                const S* gr = g.data() + static_cast<size_t>(r) * d;
                const S mean = means[static_cast<size_t>(r)];
                const S invstd = invstds[static_cast<size_t>(r)];
                if (gamma.requires_grad() || beta.requires_grad()) {
                    auto& gg = gamma.grad();
                    auto& gb = beta.grad();
                    for (int i = 0; i < d; ++i) {
                        if (gamma.requires_grad())
                            gg[static_cast<size_t>(i)] +=
                                gr[i] * (xr[i] - mean) * invstd;
                        if (beta.requires_grad())
                            gb[static_cast<size_t>(i)] += gr[i];
                    }
                }
                if (x.requires_grad()) {
                    detail::norm_group_backward<S>(
                        xr, gr, gamma.value().data(), S(0), mean, invstd, d,
                        x.grad().data() + static_cast<size_t>(r) * d);
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// attention
// ---------------------------------------------------------------------------

struct AttentionConfig {
    int token_dim = 256;
    int heads = 5;
    int head_dim = 64;  // inner dim = heads * head_dim
};

template <class S>
struct AttentionParams {
    Tensor<S> wq, bq, wk, bk, wv, bv, wo, bo;
};

// Scaled dot-product attention over pre-projected q,k,v of shape
// [T, heads*head_dim]. If attn_out is non-null it receives the softmax
// weights, [heads, T, T], detached from the tape.
template <class S>
Tensor<S> attention_core(const Tensor<S>& q, const Tensor<S>& k,
                         const Tensor<S>& v, int heads, int head_dim,
                         std::vector<S>* attn_out = nullptr) {
    const int inner = heads * head_dim;
    if (q.rank() != 2 || q.shape() != k.shape() || q.shape() != v.shape() ||
        q.dim(1) != inner)
        throw ShapeError("attention_core: q/k/v must be [T, heads*head_dim]");
    const int t_n = q.dim(0);
    const S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(head_dim)));

    // per-head contiguous copies
    const auto head_mat = static_cast<size_t>(t_n) * head_dim;
    auto split = [&](const Tensor<S>& src) {
        std::vector<S> dst(static_cast<size_t>(heads) * head_mat);
        for (int h = 0; h < heads; ++h)
            for (int t = 0; t < t_n; ++t)
                for (int j = 0; j < head_dim; ++j)
                    dst[static_cast<size_t>(h) * head_mat +
                        static_cast<size_t>(t) * head_dim + j] =
                        src.value()[static_cast<size_t>(t) * inner +
                                    static_cast<size_t>(h) * head_dim + j];
        return dst;
    };
    std::vector<S> qh = split(q), kh = split(k), vh = split(v);

    const auto attn_mat = static_cast<size_t>(t_n) * t_n;
    std::vector<S> attn(static_cast<size_t>(heads) * attn_mat);
    std::vector<S> v_out(static_cast<size_t>(t_n) * inner);
    std::vector<S> oh(head_mat);
    for (int h = 0; h < heads; ++h) {
        S* a = attn.data() + static_cast<size_t>(h) * attn_mat;
        detail::gemm<S>(false, true, t_n, t_n, head_dim, inv_sqrt,
                        qh.data() + static_cast<size_t>(h) * head_mat,
                        kh.data() + static_cast<size_t>(h) * head_mat, S(0), a);
        // softmax over the key axis, row by row
        for (int i = 0; i < t_n; ++i) {
            S* row = a + static_cast<size_t>(i) * t_n;
            S mx = row[0];
            for (int j = 1; j < t_n; ++j) mx = std::max(mx, row[j]);
            S denom = S(0);
            for (int j = 0; j < t_n; ++j) {
                row[j] = std::exp(row[j] - mx);
                denom += row[j];
            }
            const S inv = S(1) / denom;
            for (int j = 0; j < t_n; ++j) row[j] *= inv;
        }
        detail::gemm<S>(false, false, t_n, head_dim, t_n, S(1), a,
                        vh.data() + static_cast<size_t>(h) * head_mat, S(0),
                        oh.data());
        for (int t = 0; t < t_n; ++t)
            for (int j = 0; j < head_dim; ++j)
                v_out[static_cast<size_t>(t) * inner +
                      static_cast<size_t>(h) * head_dim + j] =
                    oh[static_cast<size_t>(t) * head_dim + j];
    }
    if (attn_out) *attn_out = attn;

    Tensor<S> out = Tensor<S>::from({t_n, inner}, std::move(v_out));
    if (grad_enabled() &&
        (q.requires_grad() || k.requires_grad() || v.requires_grad())) {
        auto self = out.node();
        out.set_op({q, k, v}, [self, q, k, v, attn = std::move(attn),
                               qh = std::move(qh), kh = std::move(kh),
                               vh = std::move(vh), heads, head_dim, t_n,
                               inner, inv_sqrt]() mutable {
            const auto head_mat2 = static_cast<size_t>(t_n) * head_dim;
            const auto attn_mat2 = static_cast<size_t>(t_n) * t_n;
            const auto& g = self->grad;
            std::vector<S> goh(head_mat2), da(attn_mat2), ds(attn_mat2);
            std::vector<S> dqh(head_mat2), dkh(head_mat2), dvh(head_mat2);
            auto scatter = [&](const std::vector<S>& src,
                               const Tensor<S>& dst_t, int h) {
                auto& dst = dst_t.grad();
                for (int t = 0; t < t_n; ++t)
                    for (int j = 0; j < head_dim; ++j)
                        dst[static_cast<size_t>(t) * inner +
                            static_cast<size_t>(h) * head_dim + j] +=
                            src[static_cast<size_t>(t) * head_dim + j];
            };
            for (int h = 0; h < heads; ++h) {
                const S* a = attn.data() + static_cast<size_t>(h) * attn_mat2;
                for (int t = 0; t < t_n; ++t)
                    for (int j = 0; j < head_dim; ++j)
                        goh[static_cast<size_t>(t) * head_dim + j] =
                            g[static_cast<size_t>(t) * inner +
                              static_cast<size_t>(h) * head_dim + j];
                // dV = A^T dO
                detail::gemm<S>(true, false, t_n, head_dim, t_n, S(1), a,
                                goh.data(), S(0), dvh.data());
                // dA = dO V^T
                detail::gemm<S>(false, true, t_n, t_n, head_dim, S(1),
                                goh.data(),
                                vh.data() + static_cast<size_t>(h) * head_mat2,
                                S(0), da.data());
                // softmax backward: dS = A o (dA - rowsum(dA o A))
                for (int i = 0; i < t_n; ++i) {
                    const S* arow = a + static_cast<size_t>(i) * t_n;
                    const S* darow = da.data() + static_cast<size_t>(i) * t_n;
                    S dot = S(0);
                    for (int j = 0; j < t_n; ++j) dot += darow[j] * arow[j];
                    S* dsrow = ds.data() + static_cast<size_t>(i) * t_n;
                    for (int j = 0; j < t_n; ++j)
                        dsrow[j] = arow[j] * (darow[j] - dot);
                }
                // dQ = dS K / sqrt(dh); dK = dS^T Q / sqrt(dh)
                detail::gemm<S>(false, false, t_n, head_dim, t_n, inv_sqrt,
                                ds.data(),
                                kh.data() + static_cast<size_t>(h) * head_mat2,
                                S(0), dqh.data());
                detail::gemm<S>(true, false, t_n, head_dim, t_n, inv_sqrt,
                                ds.data(),
                                qh.data() + static_cast<size_t>(h) * head_mat2,
                                S(0), dkh.data());
                if (q.requires_grad()) scatter(dqh, q, h);
                if (k.requires_grad()) scatter(dkh, k, h);
                if (v.requires_grad()) scatter(dvh, v, h);
            }
        });
    }
    return out;
}

template <class S>
struct AttentionResult {
    Tensor<S> out;        // [T, token_dim]
    std::vector<S> attn;  // [heads, T, T]
};

template <class S>
AttentionResult<S> multi_head_self_attention(const Tensor<S>& x,
                                             const AttentionParams<S>& p,
                                             const AttentionConfig& cfg) {
    if (x.rank() != 2 || x.dim(1) != cfg.token_dim)
        throw ShapeError("mhsa: x must be [T, token_dim]");
    auto q = linear(x, p.wq, p.bq);
    auto k = linear(x, p.wk, p.bk);
    auto v = linear(x, p.wv, p.bv);
    AttentionResult<S> res;
    auto mixed = attention_core(q, k, v, cfg.heads, cfg.head_dim, &res.attn);
    res.out = linear(mixed, p.wo, p.bo);
    return res;
}

// ---------------------------------------------------------------------------
// reductions and reshaping
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> mean_rows(const Tensor<S>& x) {
    if (x.rank() != 2) throw ShapeError("mean_rows: x must be [T,d]");
    const int t_n = x.dim(0), d = x.dim(1);
    std::vector<S> v(static_cast<size_t>(d), S(0));
    for (int t = 0; t < t_n; ++t)
        for (int i = 0; i < d; ++i)
            v[static_cast<size_t>(i)] += x.value()[static_cast<size_t>(t) * d + i];
    const S inv = S(1) / static_cast<S>(t_n);
    for (auto& e : v) e *= inv;
    Tensor<S> out = Tensor<S>::from({d}, std::move(v));
    if (grad_enabled() && x.requires_grad()) {
        auto self = out.node();
        out.set_op({x}, [self, x, t_n, d, inv]() mutable {
            auto& gx = x.grad();
            const auto& g = self->grad;
            for (int t = 0; t < t_n; ++t)
                for (int i = 0; i < d; ++i)
                    gx[static_cast<size_t>(t) * d + i] += g[static_cast<size_t>(i)] * inv;
        });
    }
    return out;
}

template <class S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) ||
        a.dim(2) != b.dim(2))
        throw ShapeError("concat_channels: spatial dims must agree");
    const int ca = a.dim(0), cb = b.dim(0), h = a.dim(1), w = a.dim(2);
    std::vector<S> v;
    v.reserve(a.value().size() + b.value().size());
    v.insert(v.end(), a.value().begin(), a.value().end());
    v.insert(v.end(), b.value().begin(), b.value().end());
    Tensor<S> out = Tensor<S>::from({ca + cb, h, w}, std::move(v));
    if (grad_enabled() && (a.requires_grad() || b.requires_grad())) {
        auto self = out.node();
        const size_t na = a.value().size();
        out.set_op({a, b}, [self, a, b, na]() mutable {
            const auto& g = self->grad;
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (size_t i = 0; i < na; ++i) ga[i] += g[i];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
            }
        });
    }
    return out;
}

namespace detail {

// token t covers patch (t / gw, t % gw) of the (gh x gw) patch grid; the
// token vector runs channels-outer, then column-major within the patch.
inline int64_t patch_source_index(int t, int e, int c_in, int h, int w,
                                  int ph, int pw) {
    const int gw = w / pw;
    const int gr = t / gw, gc = t % gw;
    const int c = e / (ph * pw);
    const int rem = e % (ph * pw);
    const int col = rem / ph, row = rem % ph;
    (void)c_in;
    const int y = gr * ph + row, x = gc * pw + col;
    return (static_cast<int64_t>(c) * h + y) * w + x;
}

}  // namespace detail

// [C,H,W] -> [n_tokens, C*ph*pw], tokens in row-major patch-grid order.
template <class S>
Tensor<S> patchify(const Tensor<S>& x, int ph, int pw) {
    if (x.rank() != 3) throw ShapeError("patchify: x must be [C,H,W]");
    const int c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (ph <= 0 || pw <= 0 || h % ph != 0 || w % pw != 0)
        throw ShapeError("patchify: patch must tile the image exactly");
    const int n_tokens = (h / ph) * (w / pw);
    const int dim = c_in * ph * pw;
    std::vector<S> v(static_cast<size_t>(n_tokens) * dim);
    for (int t = 0; t < n_tokens; ++t)
        for (int e = 0; e < dim; ++e)
            v[static_cast<size_t>(t) * dim + e] = x.value()[static_cast<size_t>(
                detail::patch_source_index(t, e, c_in, h, w, ph, pw))];
    Tensor<S> out = Tensor<S>::from({n_tokens, dim}, std::move(v));
    if (grad_enabled() && x.requires_grad()) {
        auto self = out.node();
        out.set_op({x}, [self, x, c_in, h, w, ph, pw, n_tokens, dim]() mutable {
            auto& gx = x.grad();
            const auto& g = self->grad;
            for (int t = 0; t < n_tokens; ++t)
                for (int e = 0; e < dim; ++e)
                    gx[static_cast<size_t>(detail::patch_source_index(
                        t, e, c_in, h, w, ph, pw))] +=
                        g[static_cast<size_t>(t) * dim + e];
        });
    }
    return out;
}

// Inverse of patchify; value-level (used for round-trip checks and mask
// painting, no gradient).
template <class S>
std::vector<S> unpatchify(const std::vector<S>& tokens, int c_in, int h, int w,
                          int ph, int pw) {
    const int n_tokens = (h / ph) * (w / pw);
    const int dim = c_in * ph * pw;
    if (tokens.size() != static_cast<size_t>(n_tokens) * dim)
        throw ShapeError("unpatchify: token buffer size mismatch");
    std::vector<S> img(static_cast<size_t>(c_in) * h * w);
    for (int t = 0; t < n_tokens; ++t)
        for (int e = 0; e < dim; ++e)
            img[static_cast<size_t>(
                detail::patch_source_index(t, e, c_in, h, w, ph, pw))] =
                tokens[static_cast<size_t>(t) * dim + e];
    return img;
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

// Mean over the batch of -log softmax(logits)[label]; logits [B,C] or [C].
template <class S>
Tensor<S> cross_entropy(const Tensor<S>& logits,
                        const std::vector<int>& labels) {
    const bool vec = logits.rank() == 1;
    if (!vec && logits.rank() != 2)
        throw ShapeError("cross_entropy: logits must be 1-D or 2-D");
    const int c_n = vec ? logits.dim(0) : logits.dim(1);
    const int b_n = vec ? 1 : logits.dim(0);
    if (static_cast<int>(labels.size()) != b_n)
        throw ShapeError("cross_entropy: label count mismatch");
    for (int lbl : labels)
        if (lbl < 0 || lbl >= c_n)
            throw InvalidLabel("label out of range [0, C)");

    std::vector<S> probs(static_cast<size_t>(b_n) * c_n);
    S loss = S(0);
    for (int b = 0; b < b_n; ++b) {
        const S* row = logits.value().data() + static_cast<size_t>(b) * c_n;
        S mx = row[0];
        for (int i = 1; i < c_n; ++i) mx = std::max(mx, row[i]);
        S denom = S(0);
        for (int i = 0; i < c_n; ++i) {
            const S e = std::exp(row[i] - mx);
            probs[static_cast<size_t>(b) * c_n + i] = e;
            denom += e;
        }
        const S inv = S(1) / denom;
        for (int i = 0; i < c_n; ++i) probs[static_cast<size_t>(b) * c_n + i] *= inv;
        loss -= std::log(
            probs[static_cast<size_t>(b) * c_n + labels[static_cast<size_t>(b)]]);
    }
    loss /= static_cast<S>(b_n);

    Tensor<S> out = Tensor<S>::scalar(loss);
    if (grad_enabled() && logits.requires_grad()) {
        auto self = out.node();
        out.set_op({logits},
                   [self, logits, probs = std::move(probs), labels, b_n,
                    c_n]() mutable {
            const S gl = self->grad[0] / static_cast<S>(b_n);
            auto& gx = logits.grad();
            for (int b = 0; b < b_n; ++b)
                for (int i = 0; i < c_n; ++i) {
                    S p = probs[static_cast<size_t>(b) * c_n + i];
                    if (i == labels[static_cast<size_t>(b)]) p -= S(1);
                    gx[static_cast<size_t>(b) * c_n + i] += gl * p;
                }
        });
    }
    return out;
}

// Mean absolute error. The subgradient at ties is 0.
template <class S>
Tensor<S> l1_loss(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape() != b.shape()) throw ShapeError("l1_loss: shape mismatch");
    const auto n = a.value().size();
    S acc = S(0);
    for (size_t i = 0; i < n; ++i) acc += std::abs(a.value()[i] - b.value()[i]);
    acc /= static_cast<S>(n);
    Tensor<S> out = Tensor<S>::scalar(acc);
    if (grad_enabled() && (a.requires_grad() || b.requires_grad())) {
        auto self = out.node();
        out.set_op({a, b}, [self, a, b, n]() mutable {
            const S gl = self->grad[0] / static_cast<S>(n);
            for (size_t i = 0; i < n; ++i) {
                const S d = a.value()[i] - b.value()[i];
                const S s = d > S(0) ? S(1) : (d < S(0) ? S(-1) : S(0));
                if (a.requires_grad()) a.grad()[i] += gl * s;
                if (b.requires_grad()) b.grad()[i] -= gl * s;
            }
        });
    }
    return out;
}

}  // namespace vser
