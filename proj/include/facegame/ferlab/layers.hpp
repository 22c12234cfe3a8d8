#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "facegame/error.hpp"

// Layer kernels over NCHW tensors stored as flat double arrays. Backward
// functions accumulate into their gradient outputs (callers zero them).
// Inner loops are written as contiguous multiply-adds so the compiler can
// vectorize them without reassociating floating-point sums.
namespace facegame::ferlab {

struct Shape
{
    std::size_t n = 0, c = 0, h = 0, w = 0;
    std::size_t size() const noexcept { return n * c * h * w; }
    std::size_t plane() const noexcept { return h * w; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

// ---- 3x3 convolution, stride 1, zero padding 1 -----------------------------------

/// weights: [out][in][3][3], bias: [out]. y has shape (n, out, h, w).
inline void conv3x3_forward(std::span<const double> x, Shape s, std::span<const double> weights,
                            std::span<const double> bias, std::size_t out_c, std::span<double> y)
{
    const std::size_t H = s.h, W = s.w, HW = s.plane();
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t o = 0; o < out_c; ++o) {
            double* yo = y.data() + (n * out_c + o) * HW;
            std::fill(yo, yo + HW, bias[o]);
            for (std::size_t c = 0; c < s.c; ++c) {
                const double* xc = x.data() + (n * s.c + c) * HW;
                const double* w = weights.data() + (o * s.c + c) * 9;
                for (int ky = 0; ky < 3; ++ky) {
                    const int dy = ky - 1;
                    const std::size_t y0 = dy < 0 ? 1 : 0, y1 = dy > 0 ? H - 1 : H;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int dx = kx - 1;
                        const std::size_t x0 = dx < 0 ? 1 : 0, x1 = dx > 0 ? W - 1 : W;
                        const double wv = w[ky * 3 + kx];
                        for (std::size_t yy = y0; yy < y1; ++yy) {
                            double* dst = yo + yy * W;
                            const double* src = xc + (yy + dy) * W + dx;
                            for (std::size_t xx = x0; xx < x1; ++xx) dst[xx] += wv * src[xx];
                        }
                    }
                }
            }
        }
    }
}

/// dx may be empty when the input gradient is not needed (first layer).
inline void conv3x3_backward(std::span<const double> x, Shape s, std::span<const double> weights, std::size_t out_c,
                             std::span<const double> dy, std::span<double> dx, std::span<double> dweights,
                             std::span<double> dbias)
{
    const std::size_t H = s.h, W = s.w, HW = s.plane();
    std::vector<double> row_acc(W);
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t o = 0; o < out_c; ++o) {
            const double* go = dy.data() + (n * out_c + o) * HW;
            double sb = 0.0;
            for (std::size_t i = 0; i < HW; ++i) sb += go[i];
            dbias[o] += sb;
            for (std::size_t c = 0; c < s.c; ++c) {
                const double* xc = x.data() + (n * s.c + c) * HW;
                const double* w = weights.data() + (o * s.c + c) * 9;
                double* gw = dweights.data() + (o * s.c + c) * 9;
                double* gx = dx.empty() ? nullptr : dx.data() + (n * s.c + c) * HW;
                for (int ky = 0; ky < 3; ++ky) {
                    const int dyo = ky - 1;
                    const std::size_t y0 = dyo < 0 ? 1 : 0, y1 = dyo > 0 ? H - 1 : H;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int dxo = kx - 1;
                        const std::size_t x0 = dxo < 0 ? 1 : 0, x1 = dxo > 0 ? W - 1 : W;
                        const double wv = w[ky * 3 + kx];
                        std::fill(row_acc.begin(), row_acc.end(), 0.0);
                        for (std::size_t yy = y0; yy < y1; ++yy) {
                            const double* g = go + yy * W;
                            const double* src = xc + (yy + dyo) * W + dxo;
                            for (std::size_t xx = x0; xx < x1; ++xx) row_acc[xx] += g[xx] * src[xx];
                            if (gx) {
                                double* dst = gx + (yy + dyo) * W + dxo;
                                for (std::size_t xx = x0; xx < x1; ++xx) dst[xx] += wv * g[xx];
                            }
                        }
                        double acc = 0.0;
                        for (std::size_t xx = x0; xx < x1; ++xx) acc += row_acc[xx];
                        gw[ky * 3 + kx] += acc;
                    }
                }
            }
        }
    }
}

// ---- ReLU -------------------------------------------------------------------------

inline void relu_inplace(std::span<double> v)
{
    for (auto& x : v) x = x > 0.0 ? x : 0.0;
}

/// Masks `grad` by the post-activation output (zero where the unit was off).
inline void relu_backward_inplace(std::span<const double> activated, std::span<double> grad)
{
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = activated[i] > 0.0 ? grad[i] : 0.0;
}

// ---- 2x2 max pooling, stride 2 ----------------------------------------------------

/// y has shape (n, c, h/2, w/2); argmax receives the flat input index of each maximum
/// (first in row-major window order on ties).
inline void maxpool2_forward(std::span<const double> x, Shape s, std::span<double> y, std::span<std::uint32_t> argmax)
{
    const std::size_t oh = s.h / 2, ow = s.w / 2;
    for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
        const std::size_t base = nc * s.plane();
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                std::size_t best = base + (2 * i) * s.w + 2 * j;
                for (std::size_t di = 0; di < 2; ++di) {
                    for (std::size_t dj = 0; dj < 2; ++dj) {
                        const std::size_t idx = base + (2 * i + di) * s.w + 2 * j + dj;
                        if (x[idx] > x[best]) best = idx;
                    }
                }
                const std::size_t out = nc * oh * ow + i * ow + j;
                y[out] = x[best];
                argmax[out] = static_cast<std::uint32_t>(best);
            }
        }
    }
}

inline void maxpool2_backward(std::span<const double> dy, std::span<const std::uint32_t> argmax, std::span<double> dx)
{
    for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax[i]] += dy[i];
}

// ---- fully connected --------------------------------------------------------------

/// weights: [out][in], y: [n][out].
inline void dense_forward(std::span<const double> x, std::size_t n, std::size_t in, std::span<const double> weights,
                          std::span<const double> bias, std::size_t out, std::span<double> y)
{
    for (std::size_t b = 0; b < n; ++b) {
        const double* xb = x.data() + b * in;
        for (std::size_t o = 0; o < out; ++o) {
            const double* w = weights.data() + o * in;
            double acc = 0.0;
            for (std::size_t i = 0; i < in; ++i) acc += w[i] * xb[i];
            y[b * out + o] = acc + bias[o];
        }
    }
}

inline void dense_backward(std::span<const double> x, std::size_t n, std::size_t in, std::span<const double> weights,
                           std::size_t out, std::span<const double> dy, std::span<double> dx, std::span<double> dweights,
                           std::span<double> dbias)
{
    for (std::size_t b = 0; b < n; ++b) {
        const double* xb = x.data() + b * in;
        double* gx = dx.empty() ? nullptr : dx.data() + b * in;
        for (std::size_t o = 0; o < out; ++o) {
            const double g = dy[b * out + o];
            dbias[o] += g;
            double* gw = dweights.data() + o * in;
            for (std::size_t i = 0; i < in; ++i) gw[i] += g * xb[i];
            if (gx) {
                const double* w = weights.data() + o * in;
                for (std::size_t i = 0; i < in; ++i) gx[i] += g * w[i];
            }
        }
    }
}

// ---- sigmoid + binary cross-entropy ---------------------------------------------------

inline double stable_sigmoid(double z)
{
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double stable_softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

/// Mean BCE over all n*k logits against targets in [0, 1]. Writes sigmoid
/// outputs to `probs` (if non-empty) and d loss / d logits to `dlogits`.
inline double sigmoid_bce(std::span<const double> logits, std::span<const double> targets, std::span<double> probs,
                          std::span<double> dlogits)
{
    if (logits.size() != targets.size()) throw ShapeMismatch("logits and targets differ in size");
    const double scale = 1.0 / static_cast<double>(logits.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = logits[i];
        const double p = stable_sigmoid(z);
        if (!probs.empty()) probs[i] = p;
        loss += stable_softplus(z) - targets[i] * z;
        if (!dlogits.empty()) dlogits[i] = (p - targets[i]) * scale;
    }
    return loss * scale;
}

} // namespace facegame::ferlab
