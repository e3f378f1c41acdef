#include "unipcb/nn_ops.hpp"

#include <algorithm>

#include "unipcb/rng.hpp"

namespace unipcb {

static void require_rank4(const Tensor& x, const char* op) {
    if (x.rank() != 4) {
        throw DimensionError(std::string(op) + ": expected rank-4 (N,C,H,W), got " +
                             shape_to_string(x.shape()));
    }
}

Tensor map_sigmoid(const Tensor& x) {
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(out[i]);
    return out;
}

Tensor map_silu(const Tensor& x) {
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = silu(out[i]);
    return out;
}

Tensor map_relu(const Tensor& x) {
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = relu(out[i]);
    return out;
}

Tensor conv2d(const Tensor& x, const ConvParams& p) {
    require_rank4(x, "conv2d");
    if (p.weights.rank() != 4) {
        throw DimensionError("conv2d: weights must be rank-4, got " +
                             shape_to_string(p.weights.shape()));
    }
    const std::size_t n = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t c_out = p.out_channels();
    const std::size_t kh = p.kernel_h(), kw = p.kernel_w();
    const std::size_t g = p.groups;
    if (g == 0 || p.stride == 0) throw ValidationError("conv2d: stride and groups must be positive");
    if (c_in % g != 0 || c_out % g != 0) {
        throw DimensionError("conv2d: channels not divisible by groups");
    }
    if (p.weights.dim(1) != c_in / g) {
        throw DimensionError("conv2d: weight in-channel dim " + std::to_string(p.weights.dim(1)) +
                             " does not match input channels " + std::to_string(c_in) + " / groups " +
                             std::to_string(g));
    }
    if (p.has_bias() && (p.bias.rank() != 1 || p.bias.dim(0) != c_out)) {
        throw DimensionError("conv2d: bias shape must be (outC)");
    }
    const std::size_t pad = p.padding, stride = p.stride;
    if (h + 2 * pad < kh || w + 2 * pad < kw) {
        throw DimensionError("conv2d: kernel larger than padded input");
    }
    const std::size_t out_h = (h + 2 * pad - kh) / stride + 1;
    const std::size_t out_w = (w + 2 * pad - kw) / stride + 1;
    const std::size_t cpg_in = c_in / g, cpg_out = c_out / g;

    Tensor out = Tensor::zeros({n, c_out, out_h, out_w});
    for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t oc = 0; oc < c_out; ++oc) {
            const std::size_t gi = oc / cpg_out;
            const double b = p.has_bias() ? p.bias[oc] : 0.0;
            for (std::size_t oy = 0; oy < out_h; ++oy) {
                for (std::size_t ox = 0; ox < out_w; ++ox) {
                    double acc = b;
                    for (std::size_t icg = 0; icg < cpg_in; ++icg) {
                        const std::size_t ic = gi * cpg_in + icg;
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                static_cast<std::ptrdiff_t>(pad);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                    static_cast<std::ptrdiff_t>(pad);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                                acc += x.at4(ni, ic, static_cast<std::size_t>(iy),
                                             static_cast<std::size_t>(ix)) *
                                       p.weights.at4(oc, icg, ky, kx);
                            }
                        }
                    }
                    out.at4(ni, oc, oy, ox) = acc;
                }
            }
        }
    }
    return out;
}

Tensor group_norm(const Tensor& x, std::size_t num_groups, double eps) {
    require_rank4(x, "group_norm");
    if (eps <= 0.0) throw ValidationError("group_norm: eps must be positive");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (num_groups == 0 || c % num_groups != 0) {
        throw DimensionError("group_norm: channels " + std::to_string(c) +
                             " not divisible by groups " + std::to_string(num_groups));
    }
    const std::size_t cpg = c / num_groups;
    const std::size_t group_elems = cpg * h * w;

    Tensor out = x;
    for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t gi = 0; gi < num_groups; ++gi) {
            double sum = 0.0;
            for (std::size_t cc = gi * cpg; cc < (gi + 1) * cpg; ++cc)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx) sum += x.at4(ni, cc, y, xx);
            const double mean = sum / static_cast<double>(group_elems);
            double sq = 0.0;
            for (std::size_t cc = gi * cpg; cc < (gi + 1) * cpg; ++cc)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const double d = x.at4(ni, cc, y, xx) - mean;
                        sq += d * d;
                    }
            const double var = sq / static_cast<double>(group_elems);
            const double inv = 1.0 / std::sqrt(var + eps);
            for (std::size_t cc = gi * cpg; cc < (gi + 1) * cpg; ++cc)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx)
                        out.at4(ni, cc, y, xx) = (x.at4(ni, cc, y, xx) - mean) * inv;
        }
    }
    return out;
}

Tensor group_norm_backward(const Tensor& x, const Tensor& g, std::size_t num_groups,
                           double eps) {
    require_rank4(x, "group_norm_backward");
    if (!x.same_shape(g)) {
        throw DimensionError("group_norm_backward: shape mismatch " + shape_to_string(x.shape()) +
                             " vs " + shape_to_string(g.shape()));
    }
    if (eps <= 0.0) throw ValidationError("group_norm_backward: eps must be positive");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (num_groups == 0 || c % num_groups != 0) {
        throw DimensionError("group_norm_backward: channels not divisible by groups");
    }
    const std::size_t cpg = c / num_groups;
    const double m = static_cast<double>(cpg * h * w);

    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t gi = 0; gi < num_groups; ++gi) {
            double sum = 0.0, sq = 0.0;
            for (std::size_t cc = gi * cpg; cc < (gi + 1) * cpg; ++cc)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx) sum += x.at4(ni, cc, y, xx);
            const double mean = sum / m;
            for (std::size_t cc = gi * cpg; cc < (gi + 1) * cpg; ++cc)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const double d = x.at4(ni, cc, y, xx) - mean;
                        sq += d * d;
                    }
            const double sigma = std::sqrt(sq / m + eps);

            double g_mean = 0.0, gy_mean = 0.0;
            for (std::size_t cc = gi * cpg; cc < (gi + 1) * cpg; ++cc)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const double yv = (x.at4(ni, cc, y, xx) - mean) / sigma;
                        g_mean += g.at4(ni, cc, y, xx);
                        gy_mean += g.at4(ni, cc, y, xx) * yv;
                    }
            g_mean /= m;
            gy_mean /= m;
            for (std::size_t cc = gi * cpg; cc < (gi + 1) * cpg; ++cc)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const double yv = (x.at4(ni, cc, y, xx) - mean) / sigma;
                        out.at4(ni, cc, y, xx) =
                            (g.at4(ni, cc, y, xx) - g_mean - yv * gy_mean) / sigma;
                    }
        }
    }
    return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    if (axis >= x.rank()) {
        throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for rank " +
                             std::to_string(x.rank()));
    }
    const auto& shape = x.shape();
    const std::size_t axis_len = shape[axis];
    std::size_t inner = 1;
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
    std::size_t outer = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];

    Tensor out = x;
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * axis_len * inner + in;
            double m = x[base];
            for (std::size_t a = 1; a < axis_len; ++a) m = std::max(m, x[base + a * inner]);
            double denom = 0.0;
            for (std::size_t a = 0; a < axis_len; ++a) {
                const double e = std::exp(x[base + a * inner] - m);
                out[base + a * inner] = e;
                denom += e;
            }
            for (std::size_t a = 0; a < axis_len; ++a) out[base + a * inner] /= denom;
        }
    }
    return out;
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            double scale_divisor) {
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
        throw DimensionError("scaled_dot_attention: expected rank-2 token matrices");
    }
    if (q.dim(1) != k.dim(1)) {
        throw DimensionError("scaled_dot_attention: q/k feature dims differ: " +
                             shape_to_string(q.shape()) + " vs " + shape_to_string(k.shape()));
    }
    if (k.dim(0) != v.dim(0)) {
        throw DimensionError("scaled_dot_attention: k/v token counts differ: " +
                             shape_to_string(k.shape()) + " vs " + shape_to_string(v.shape()));
    }
    if (!(scale_divisor > 0.0)) throw ValidationError("scaled_dot_attention: divisor must be > 0");
    const std::size_t tq = q.dim(0), tk = k.dim(0), dk = q.dim(1), dv = v.dim(1);

    Tensor logits = Tensor::zeros({tq, tk});
    for (std::size_t i = 0; i < tq; ++i)
        for (std::size_t j = 0; j < tk; ++j) {
            double dot = 0.0;
            for (std::size_t d = 0; d < dk; ++d) dot += q.at2(i, d) * k.at2(j, d);
            logits.at2(i, j) = dot / scale_divisor;
        }
    const Tensor weights = softmax(logits, 1);

    Tensor out = Tensor::zeros({tq, dv});
    for (std::size_t i = 0; i < tq; ++i)
        for (std::size_t j = 0; j < tk; ++j) {
            const double wij = weights.at2(i, j);
            for (std::size_t d = 0; d < dv; ++d) out.at2(i, d) += wij * v.at2(j, d);
        }
    return out;
}

Tensor mhsa_feature(const Tensor& qk_src, const Tensor& v_src, const AttentionParams& p) {
    require_rank4(qk_src, "mhsa_feature");
    require_rank4(v_src, "mhsa_feature");
    const std::size_t n = qk_src.dim(0), h = qk_src.dim(2), w = qk_src.dim(3);
    if (v_src.dim(0) != n || v_src.dim(2) != h || v_src.dim(3) != w) {
        throw DimensionError("mhsa_feature: qk/v batch or spatial dims differ");
    }
    const Tensor q = conv2d(qk_src, p.projQ);
    const Tensor k = conv2d(qk_src, p.projK);
    const Tensor v = conv2d(v_src, p.projV);
    const std::size_t dk_total = q.dim(1), dv_total = v.dim(1);
    if (k.dim(1) != dk_total) {
        throw DimensionError("mhsa_feature: projQ/projK output channels differ");
    }
    if (p.heads == 0 || dk_total % p.heads != 0 || dv_total % p.heads != 0) {
        throw DimensionError("mhsa_feature: channel counts not divisible by head count");
    }
    if (!p.headScale.empty()) {
        if (p.headScale.size() != p.heads) {
            throw ValidationError("mhsa_feature: headScale size must equal head count");
        }
        for (double s : p.headScale) {
            if (!(s > 0.0)) throw ValidationError("mhsa_feature: headScale must be positive");
        }
    }
    const std::size_t dkh = dk_total / p.heads, dvh = dv_total / p.heads;
    const std::size_t tokens = h * w;

    Tensor out = Tensor::zeros({n, dv_total, h, w});
    Tensor qh = Tensor::zeros({tokens, dkh});
    Tensor kh = Tensor::zeros({tokens, dkh});
    Tensor vh = Tensor::zeros({tokens, dvh});
    for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t head = 0; head < p.heads; ++head) {
            for (std::size_t ti = 0; ti < tokens; ++ti) {
                const std::size_t y = ti / w, x = ti % w;
                for (std::size_t d = 0; d < dkh; ++d) {
                    qh.at2(ti, d) = q.at4(ni, head * dkh + d, y, x);
                    kh.at2(ti, d) = k.at4(ni, head * dkh + d, y, x);
                }
                for (std::size_t d = 0; d < dvh; ++d) {
                    vh.at2(ti, d) = v.at4(ni, head * dvh + d, y, x);
                }
            }
            const double divisor = p.headScale.empty() ? std::sqrt(static_cast<double>(dkh))
                                                       : p.headScale[head];
            const Tensor att = scaled_dot_attention(qh, kh, vh, divisor);
            for (std::size_t ti = 0; ti < tokens; ++ti) {
                const std::size_t y = ti / w, x = ti % w;
                for (std::size_t d = 0; d < dvh; ++d) {
                    out.at4(ni, head * dvh + d, y, x) = att.at2(ti, d);
                }
            }
        }
    }
    return out;
}

Tensor channel_shuffle(const Tensor& x, std::size_t groups) {
    require_rank4(x, "channel_shuffle");
    const std::size_t c = x.dim(1);
    if (groups == 0 || c % groups != 0) {
        throw DimensionError("channel_shuffle: channels " + std::to_string(c) +
                             " not divisible by groups " + std::to_string(groups));
    }
    const std::size_t cpg = c / groups;
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t g = 0; g < groups; ++g)
            for (std::size_t i = 0; i < cpg; ++i) {
                const std::size_t src = g * cpg + i;
                const std::size_t dst = i * groups + g;
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx)
                        out.at4(ni, dst, y, xx) = x.at4(ni, src, y, xx);
            }
    return out;
}

Tensor space_to_depth(const Tensor& x, std::size_t block) {
    require_rank4(x, "space_to_depth");
    if (block == 0) throw ValidationError("space_to_depth: block must be positive");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % block != 0 || w % block != 0) {
        throw DimensionError("space_to_depth: spatial dims " + std::to_string(h) + "x" +
                             std::to_string(w) + " not divisible by block " + std::to_string(block));
    }
    const std::size_t oh = h / block, ow = w / block;
    Tensor out = Tensor::zeros({n, c * block * block, oh, ow});
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t dy = 0; dy < block; ++dy)
            for (std::size_t dx = 0; dx < block; ++dx)
                for (std::size_t cc = 0; cc < c; ++cc) {
                    const std::size_t oc = (dy * block + dx) * c + cc;
                    for (std::size_t y = 0; y < oh; ++y)
                        for (std::size_t xx = 0; xx < ow; ++xx)
                            out.at4(ni, oc, y, xx) = x.at4(ni, cc, y * block + dy, xx * block + dx);
                }
    return out;
}

Tensor depth_to_space(const Tensor& x, std::size_t block) {
    require_rank4(x, "depth_to_space");
    if (block == 0) throw ValidationError("depth_to_space: block must be positive");
    const std::size_t n = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (c_in % (block * block) != 0) {
        throw DimensionError("depth_to_space: channels not divisible by block^2");
    }
    const std::size_t c = c_in / (block * block);
    Tensor out = Tensor::zeros({n, c, h * block, w * block});
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t dy = 0; dy < block; ++dy)
            for (std::size_t dx = 0; dx < block; ++dx)
                for (std::size_t cc = 0; cc < c; ++cc) {
                    const std::size_t ic = (dy * block + dx) * c + cc;
                    for (std::size_t y = 0; y < h; ++y)
                        for (std::size_t xx = 0; xx < w; ++xx)
                            out.at4(ni, cc, y * block + dy, xx * block + dx) = x.at4(ni, ic, y, xx);
                }
    return out;
}

Tensor resize_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w) {
    require_rank4(x, "resize_bilinear");
    if (out_h == 0 || out_w == 0) throw ValidationError("resize_bilinear: output dims must be positive");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (out_h == h && out_w == w) return x;

    const double sy = static_cast<double>(h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(w) / static_cast<double>(out_w);
    Tensor out = Tensor::zeros({n, c, out_h, out_w});
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - static_cast<double>(x0);
            for (std::size_t ni = 0; ni < n; ++ni)
                for (std::size_t cc = 0; cc < c; ++cc) {
                    const double top = x.at4(ni, cc, y0, x0) * (1.0 - wx) + x.at4(ni, cc, y0, x1) * wx;
                    const double bot = x.at4(ni, cc, y1, x0) * (1.0 - wx) + x.at4(ni, cc, y1, x1) * wx;
                    out.at4(ni, cc, oy, ox) = top * (1.0 - wy) + bot * wy;
                }
        }
    }
    return out;
}

Tensor batch_norm_inference(const Tensor& x, const BatchNormStats& s) {
    if (s.var + s.eps <= 0.0) throw ValidationError("batch_norm_inference: var + eps must be > 0");
    const double inv = 1.0 / std::sqrt(s.var + s.eps);
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (out[i] - s.mean) * inv * s.gamma + s.beta;
    return out;
}

Tensor concat_channels(const std::vector<const Tensor*>& parts) {
    if (parts.empty()) throw ValidationError("concat_channels: no inputs");
    const Tensor& first = *parts.front();
    require_rank4(first, "concat_channels");
    const std::size_t n = first.dim(0), h = first.dim(2), w = first.dim(3);
    std::size_t c_total = 0;
    for (const Tensor* t : parts) {
        require_rank4(*t, "concat_channels");
        if (t->dim(0) != n || t->dim(2) != h || t->dim(3) != w) {
            throw DimensionError("concat_channels: batch/spatial dims differ: " +
                                 shape_to_string(first.shape()) + " vs " +
                                 shape_to_string(t->shape()));
        }
        c_total += t->dim(1);
    }
    Tensor out = Tensor::zeros({n, c_total, h, w});
    std::size_t c_base = 0;
    for (const Tensor* t : parts) {
        const std::size_t c = t->dim(1);
        for (std::size_t ni = 0; ni < n; ++ni)
            for (std::size_t cc = 0; cc < c; ++cc)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx)
                        out.at4(ni, c_base + cc, y, xx) = t->at4(ni, cc, y, xx);
        c_base += c;
    }
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    return concat_channels(std::vector<const Tensor*>{&a, &b});
}

ConvParams make_conv(std::size_t out_c, std::size_t in_c, std::size_t kernel,
                     std::size_t stride, std::size_t padding, std::size_t groups,
                     Rng& rng, bool zero_init, bool with_bias) {
    if (groups == 0 || in_c % groups != 0 || out_c % groups != 0) {
        throw DimensionError("make_conv: channels not divisible by groups");
    }
    ConvParams p;
    p.stride = stride;
    p.padding = padding;
    p.groups = groups;
    const std::vector<std::size_t> wshape{out_c, in_c / groups, kernel, kernel};
    p.weights = zero_init ? Tensor::zeros(wshape)
                          : Tensor::random_uniform(wshape, rng, -0.05, 0.05);
    if (with_bias) {
        p.bias = zero_init ? Tensor::zeros({out_c})
                           : Tensor::random_uniform({out_c}, rng, -0.05, 0.05);
    }
    return p;
}

ConvParams make_depthwise(std::size_t channels, std::size_t kernel, Rng& rng,
                          bool zero_init, bool with_bias) {
    return make_conv(channels, channels, kernel, 1, kernel / 2, channels, rng, zero_init, with_bias);
}

} // namespace unipcb
