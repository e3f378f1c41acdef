#include "unipcb/detector.hpp"

#include <cmath>

#include "unipcb/rng.hpp"

namespace unipcb::det {

// ---- shift-wise convolution ----

const std::vector<std::pair<int, int>>& all_shift_directions() {
    static const std::vector<std::pair<int, int>> dirs = {
        {-1, 0}, {1, 0}, {0, -1}, {0, 1}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1},
    };
    return dirs;
}

ShiftSpec make_shift_spec(std::size_t channels, std::size_t groups, Rng& rng) {
    if (groups == 0 || groups > 8) throw ValidationError("make_shift_spec: need 1 <= groups <= 8");
    if (channels % groups != 0) {
        throw DimensionError("make_shift_spec: channels " + std::to_string(channels) +
                             " not divisible by groups " + std::to_string(groups));
    }
    ShiftSpec s;
    s.groups = groups;
    const auto& all = all_shift_directions();
    s.directions.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(groups));
    s.dwConv = make_depthwise(channels, 3, rng);
    return s;
}

static void validate_shift_spec(const Tensor& x, const ShiftSpec& s) {
    const std::size_t c = x.dim(1);
    if (s.groups == 0 || s.groups > 8 || c % s.groups != 0) {
        throw DimensionError("shift_wise_conv: channels " + std::to_string(c) +
                             " not divisible by groups " + std::to_string(s.groups));
    }
    if (s.directions.size() != s.groups) {
        throw ValidationError("shift_wise_conv: one direction required per group");
    }
    for (const auto& [dy, dx] : s.directions) {
        if (dy < -1 || dy > 1 || dx < -1 || dx > 1 || (dy == 0 && dx == 0)) {
            throw ValidationError("shift_wise_conv: directions must be non-zero unit offsets");
        }
    }
}

Tensor shift_wise_conv(const Tensor& x, const ShiftSpec& s) {
    if (x.rank() != 4) {
        throw DimensionError("shift_wise_conv: expected rank-4 input, got " +
                             shape_to_string(x.shape()));
    }
    validate_shift_spec(x, s);
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t cpg = c / s.groups;

    Tensor shifted = Tensor::zeros(x.shape());
    for (std::size_t g = 0; g < s.groups; ++g) {
        const auto [dy, dx] = s.directions[g];
        for (std::size_t ni = 0; ni < n; ++ni)
            for (std::size_t cc = g * cpg; cc < (g + 1) * cpg; ++cc)
                for (std::size_t y = 0; y < h; ++y) {
                    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) - dy;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx) - dx;
                        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
                        shifted.at4(ni, cc, y, xx) =
                            x.at4(ni, cc, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
                    }
                }
    }
    const Tensor out = conv2d(shifted, s.dwConv);
    if (!out.same_shape(x)) {
        throw DimensionError("shift_wise_conv: depthwise conv must preserve the input shape");
    }
    return out;
}

// ---- IRSA ----

IrsaParams make_irsa(std::size_t channels, std::size_t ratio, std::size_t shift_groups,
                     std::size_t heads, Rng& rng, bool zero_merge) {
    if (ratio < 1) throw ValidationError("make_irsa: expansion ratio must be >= 1");
    const std::size_t expanded = channels * ratio;
    if (heads == 0 || channels % heads != 0 || expanded % heads != 0) {
        throw DimensionError("make_irsa: channel counts not divisible by head count");
    }
    IrsaParams p;
    p.cbr = make_conv(channels, channels, 3, 1, 1, 1, rng);
    p.bn = BatchNormStats{};
    p.expand = make_conv(expanded, channels, 1, 1, 0, 1, rng);
    p.attn.projQ = make_conv(channels, channels, 1, 1, 0, 1, rng);
    p.attn.projK = make_conv(channels, channels, 1, 1, 0, 1, rng);
    p.attn.projV = make_conv(expanded, expanded, 1, 1, 0, 1, rng);
    p.attn.heads = heads;
    p.shift = make_shift_spec(expanded, shift_groups, rng);
    p.merge = make_conv(channels, expanded, 1, 1, 0, 1, rng, zero_merge);
    return p;
}

Tensor irsa_pre(const Tensor& x, const IrsaParams& p) {
    const Tensor pre = map_relu(batch_norm_inference(conv2d(x, p.cbr), p.bn));
    if (!pre.same_shape(x)) {
        throw DimensionError("irsa_forward: the CBR stem must preserve the input shape");
    }
    return pre;
}

Tensor irsa_forward(const Tensor& x, const IrsaParams& p) {
    if (x.rank() != 4) {
        throw DimensionError("irsa_forward: expected rank-4 input, got " +
                             shape_to_string(x.shape()));
    }
    const Tensor pre = irsa_pre(x, p);
    const Tensor expanded = conv2d(pre, p.expand);
    const Tensor att = mhsa_feature(pre, expanded, p.attn);
    const Tensor swc = shift_wise_conv(att, p.shift);
    const Tensor merged = conv2d(add(att, swc), p.merge);
    if (!merged.same_shape(x)) {
        throw DimensionError("irsa_forward: the merge projection must restore the input shape");
    }
    return add(add(x, pre), merged);
}

// ---- DPCA / CLCF ----

DpcaParams make_dpca(std::size_t channels, std::size_t heads, Rng& rng, bool zero_gate) {
    if (channels == 0 || channels % 4 != 0) {
        throw DimensionError("make_dpca: channels must be a positive multiple of 4");
    }
    if (heads == 0 || channels % heads != 0) {
        throw DimensionError("make_dpca: channels not divisible by head count");
    }
    DpcaParams p;
    p.qkvProj = make_conv(channels, 2 * channels, 1, 1, 0, 1, rng);
    p.localDw = make_depthwise(channels, 3, rng);
    p.shuffleGroups = 4;
    p.localGroup = make_conv(channels, channels, 3, 1, 1, 4, rng);
    p.globalAttn.projQ = make_conv(channels, channels, 1, 1, 0, 1, rng);
    p.globalAttn.projK = make_conv(channels, channels, 1, 1, 0, 1, rng);
    p.globalAttn.projV = make_conv(channels, channels, 1, 1, 0, 1, rng);
    p.globalAttn.heads = heads;
    p.globalAttn.headScale.assign(
        heads, std::sqrt(static_cast<double>(channels / heads)));
    p.globalProj = make_conv(channels, channels, 1, 1, 0, 1, rng);
    p.gateConv = make_conv(channels, 4 * channels, 7, 1, 3, 4, rng, zero_gate);
    return p;
}

GateMap dpca_gate(const Tensor& x, const DpcaParams& p) {
    if (x.rank() != 4) {
        throw DimensionError("dpca_gate: expected rank-4 input, got " + shape_to_string(x.shape()));
    }
    if (x.dim(1) % 2 != 0 || p.qkvProj.out_channels() != x.dim(1) / 2) {
        throw DimensionError("dpca_gate: input must concatenate two operands of " +
                             std::to_string(p.qkvProj.out_channels()) + " channels each");
    }
    const Tensor x_qkv = conv2d(x, p.qkvProj);
    const Tensor x_loc =
        conv2d(channel_shuffle(conv2d(x_qkv, p.localDw), p.shuffleGroups), p.localGroup);
    const Tensor x_glo =
        add(conv2d(mhsa_feature(x_qkv, x_qkv, p.globalAttn), p.globalProj), x_qkv);
    const Tensor gate_in =
        channel_shuffle(concat_channels({&x_loc, &x_glo, &x}), p.shuffleGroups);
    const GateMap w = map_sigmoid(conv2d(gate_in, p.gateConv));
    if (!w.same_shape(x_qkv)) {
        throw DimensionError("dpca_gate: gate channels must match the fused feature channels");
    }
    return w;
}

Tensor clcf_mix(const Tensor& fl, const Tensor& fh, const GateMap& w) {
    if (!fl.same_shape(fh) || !fl.same_shape(w)) {
        throw DimensionError("clcf_mix: operand and gate shapes must match");
    }
    Tensor out = fl;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double s = fl[i] + fh[i];
        const double d = fl[i] - fh[i];
        out[i] = (0.5 * s + (w[i] - 0.5) * d) + s;
    }
    return out;
}

Tensor clcf_fuse(const Tensor& fl, const Tensor& fh, const DpcaParams& p,
                 const ConvParams& proj) {
    if (!fl.same_shape(fh)) {
        throw DimensionError("clcf_fuse: operands must be aligned to the same shape, got " +
                             shape_to_string(fl.shape()) + " vs " + shape_to_string(fh.shape()));
    }
    const GateMap w = dpca_gate(concat_channels(fl, fh), p);
    return conv2d(clcf_mix(fl, fh, w), proj);
}

Tensor clcf_grad_fl_frozen_gate(const Tensor& fl, const Tensor& fh, const GateMap& w,
                                const ConvParams& proj) {
    if (!fl.same_shape(fh) || !fl.same_shape(w)) {
        throw DimensionError("clcf_grad_fl_frozen_gate: operand and gate shapes must match");
    }
    if (proj.kernel_h() != 1 || proj.kernel_w() != 1 || proj.groups != 1 ||
        proj.in_channels() != fl.dim(1)) {
        throw DimensionError("clcf_grad_fl_frozen_gate: proj must be an ungrouped 1x1 conv "
                             "over the operand channels");
    }
    // d sum(Proj(mix)) / d fl = (w + 1) * sum over output channels of the
    // projection column for fl's channel.
    const std::size_t c_in = fl.dim(1), c_out = proj.out_channels();
    std::vector<double> colsum(c_in, 0.0);
    for (std::size_t ci = 0; ci < c_in; ++ci) {
        for (std::size_t co = 0; co < c_out; ++co) colsum[ci] += proj.weights.at4(co, ci, 0, 0);
    }
    Tensor out = fl;
    const std::size_t n = fl.dim(0), h = fl.dim(2), ww = fl.dim(3);
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t cc = 0; cc < c_in; ++cc)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t xx = 0; xx < ww; ++xx)
                    out.at4(ni, cc, y, xx) = (w.at4(ni, cc, y, xx) + 1.0) * colsum[cc];
    return out;
}

// ---- backbone / neck assembly ----

BackboneParams make_backbone(Rng& rng) {
    static constexpr std::size_t kChannels[5] = {3, 8, 16, 32, 64};
    BackboneParams stages;
    for (std::size_t i = 0; i < 4; ++i) {
        const std::size_t stride = i == 0 ? 4 : 2;
        stages[i].down = make_conv(kChannels[i + 1], kChannels[i], 3, stride, 1, 1, rng);
        stages[i].irsa = make_irsa(kChannels[i + 1], 2, 8, 2, rng);
    }
    return stages;
}

PyramidFeatures backbone_forward(const Tensor& img, const BackboneParams& stages) {
    if (img.rank() != 4 || img.dim(1) != stages[0].down.in_channels()) {
        throw DimensionError("backbone_forward: expected (N," +
                             std::to_string(stages[0].down.in_channels()) + ",H,W), got " +
                             shape_to_string(img.shape()));
    }
    if (img.dim(2) % 32 != 0 || img.dim(3) % 32 != 0) {
        throw DimensionError("backbone_forward: spatial dims must be divisible by 32");
    }
    PyramidFeatures pyr;
    Tensor x = img;
    for (std::size_t i = 0; i < 4; ++i) {
        x = irsa_forward(conv2d(x, stages[i].down), stages[i].irsa);
        if (i == 1) pyr.s3 = x;
        if (i == 2) pyr.s4 = x;
        if (i == 3) pyr.s5 = x;
    }
    return pyr;
}

NeckParams make_neck(Rng& rng) {
    // Channel plan matches make_backbone taps: s3 16, s4 32, s5 64.
    NeckParams p;
    p.l.dpca = make_dpca(16, 2, rng);
    p.l.proj = make_conv(16, 16, 1, 1, 0, 1, rng);
    p.l.lateral = make_conv(16, 32, 1, 1, 0, 1, rng);
    p.m.dpca = make_dpca(32, 2, rng);
    p.m.proj = make_conv(32, 32, 1, 1, 0, 1, rng);
    p.m.lateral = make_conv(32, 64, 1, 1, 0, 1, rng);
    p.s.dpca = make_dpca(64, 2, rng);
    p.s.proj = make_conv(64, 64, 1, 1, 0, 1, rng);
    p.s.lateral = make_conv(64, 64, 1, 1, 0, 1, rng);
    return p;
}

std::array<Tensor, 3> neck_high_inputs(const PyramidFeatures& pyr, const NeckParams& p) {
    std::array<Tensor, 3> high;
    high[0] = resize_bilinear(conv2d(pyr.s4, p.l.lateral), pyr.s3.dim(2), pyr.s3.dim(3));
    high[1] = resize_bilinear(conv2d(pyr.s5, p.m.lateral), pyr.s4.dim(2), pyr.s4.dim(3));
    // The deepest level has no deeper neighbor; re-sample its own lateral
    // projection through a 2x round trip to obtain an aligned second operand.
    const Tensor lat5 = conv2d(pyr.s5, p.s.lateral);
    const std::size_t h5 = pyr.s5.dim(2), w5 = pyr.s5.dim(3);
    const Tensor halved =
        resize_bilinear(lat5, std::max<std::size_t>(1, h5 / 2), std::max<std::size_t>(1, w5 / 2));
    high[2] = resize_bilinear(halved, h5, w5);
    return high;
}

PyramidFeatures neck_fuse(const PyramidFeatures& pyr, const NeckParams& p) {
    const std::array<Tensor, 3> high = neck_high_inputs(pyr, p);
    PyramidFeatures out;
    out.s3 = clcf_fuse(pyr.s3, high[0], p.l.dpca, p.l.proj);
    out.s4 = clcf_fuse(pyr.s4, high[1], p.m.dpca, p.m.proj);
    out.s5 = clcf_fuse(pyr.s5, high[2], p.s.dpca, p.s.proj);
    return out;
}

} // namespace unipcb::det
