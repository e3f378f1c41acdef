#pragma once

// Reference implementations used as oracles across the test suites. These
// re-derive each operation from its definition with plain nested loops and
// share no code with the library under test.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "unipcb/nn_ops.hpp"
#include "unipcb/tensor.hpp"

namespace naive {

inline unipcb::Tensor conv2d(const unipcb::Tensor& x, const unipcb::ConvParams& p) {
    using unipcb::Tensor;
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::size_t oc = p.weights.dim(0), cpg = p.weights.dim(1);
    const std::size_t kh = p.weights.dim(2), kw = p.weights.dim(3);
    const std::size_t oh = (h + 2 * p.padding - kh) / p.stride + 1;
    const std::size_t ow = (w + 2 * p.padding - kw) / p.stride + 1;
    const std::size_t oc_per_group = oc / p.groups;
    Tensor out = Tensor::zeros({n, oc, oh, ow});
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t o = 0; o < oc; ++o) {
            const std::size_t g = o / oc_per_group;
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double acc = p.bias.empty() ? 0.0 : p.bias[o];
                    for (std::size_t ic = 0; ic < cpg; ++ic)
                        for (std::size_t ky = 0; ky < kh; ++ky)
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const auto iy = static_cast<std::ptrdiff_t>(oy * p.stride + ky) -
                                                static_cast<std::ptrdiff_t>(p.padding);
                                const auto ix = static_cast<std::ptrdiff_t>(ox * p.stride + kx) -
                                                static_cast<std::ptrdiff_t>(p.padding);
                                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) ||
                                    ix >= static_cast<std::ptrdiff_t>(w))
                                    continue;
                                acc += x.at4(ni, g * cpg + ic, static_cast<std::size_t>(iy),
                                             static_cast<std::size_t>(ix)) *
                                       p.weights.at4(o, ic, ky, kx);
                            }
                    out.at4(ni, o, oy, ox) = acc;
                }
        }
    return out;
}

inline unipcb::Tensor group_norm(const unipcb::Tensor& x, std::size_t groups, double eps) {
    using unipcb::Tensor;
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t cpg = c / groups;
    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t g = 0; g < groups; ++g) {
            double mean = 0.0;
            for (std::size_t ci = g * cpg; ci < (g + 1) * cpg; ++ci)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx) mean += x.at4(ni, ci, y, xx);
            const double count = static_cast<double>(cpg * h * w);
            mean /= count;
            double var = 0.0;
            for (std::size_t ci = g * cpg; ci < (g + 1) * cpg; ++ci)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const double d = x.at4(ni, ci, y, xx) - mean;
                        var += d * d;
                    }
            var /= count;
            const double inv = 1.0 / std::sqrt(var + eps);
            for (std::size_t ci = g * cpg; ci < (g + 1) * cpg; ++ci)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx)
                        out.at4(ni, ci, y, xx) = (x.at4(ni, ci, y, xx) - mean) * inv;
        }
    return out;
}

inline unipcb::Tensor softmax_rows(const unipcb::Tensor& x) {
    unipcb::Tensor out = unipcb::Tensor::zeros(x.shape());
    for (std::size_t r = 0; r < x.dim(0); ++r) {
        double m = x.at2(r, 0);
        for (std::size_t c = 1; c < x.dim(1); ++c) m = std::max(m, x.at2(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < x.dim(1); ++c) z += std::exp(x.at2(r, c) - m);
        for (std::size_t c = 0; c < x.dim(1); ++c) out.at2(r, c) = std::exp(x.at2(r, c) - m) / z;
    }
    return out;
}

inline unipcb::Tensor attention(const unipcb::Tensor& q, const unipcb::Tensor& k,
                                const unipcb::Tensor& v, double divisor) {
    using unipcb::Tensor;
    const std::size_t tq = q.dim(0), tk = k.dim(0), dk = q.dim(1), dv = v.dim(1);
    Tensor logits = Tensor::zeros({tq, tk});
    for (std::size_t a = 0; a < tq; ++a)
        for (std::size_t b = 0; b < tk; ++b) {
            double dot = 0.0;
            for (std::size_t d = 0; d < dk; ++d) dot += q.at2(a, d) * k.at2(b, d);
            logits.at2(a, b) = dot / divisor;
        }
    const Tensor att = softmax_rows(logits);
    Tensor out = Tensor::zeros({tq, dv});
    for (std::size_t a = 0; a < tq; ++a)
        for (std::size_t d = 0; d < dv; ++d) {
            double acc = 0.0;
            for (std::size_t b = 0; b < tk; ++b) acc += att.at2(a, b) * v.at2(b, d);
            out.at2(a, d) = acc;
        }
    return out;
}

} // namespace naive
