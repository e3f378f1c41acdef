#include "unipcb/cond_inject.hpp"

#include <cmath>

#include "unipcb/rng.hpp"

namespace unipcb::diff {

ScaleEncoderParams make_scale_encoder(std::size_t in_c, std::size_t width,
                                      const std::array<std::size_t, kNumInjectScales>& out_c,
                                      Rng& rng) {
    if (in_c == 0 || width == 0) throw ValidationError("make_scale_encoder: zero channel count");
    ScaleEncoderParams p;
    p.spdBlock = 2;
    const std::size_t spd_c = width * p.spdBlock * p.spdBlock;
    p.alignConvs[0] = make_conv(width, in_c, 3, 1, 1, 1, rng);
    p.alignConvs[1] = make_conv(width, spd_c, 3, 1, 1, 1, rng);
    p.alignConvs[2] = make_conv(width, spd_c, 3, 1, 1, 1, rng);
    p.extraTapConv = make_conv(width, spd_c, 3, 1, 1, 1, rng);
    for (std::size_t i = 0; i < kNumInjectScales; ++i) {
        p.embedTaps[i].dw = make_depthwise(width, 3, rng);
        p.embedTaps[i].zero = make_conv(out_c[i], width, 1, 1, 0, 1, rng, /*zero_init=*/true);
    }
    return p;
}

ScalePyramid scale_align(const Tensor& cond, const ScaleEncoderParams& p) {
    if (cond.rank() != 4) {
        throw DimensionError("scale_align: expected rank-4 input, got " +
                             shape_to_string(cond.shape()));
    }
    if (cond.dim(2) != kInjectRes[0] || cond.dim(3) != kInjectRes[0]) {
        throw DimensionError("scale_align: expected 64x64 input, got " +
                             shape_to_string(cond.shape()));
    }
    ScalePyramid pyr;
    pyr.levels[0] = map_silu(conv2d(cond, p.alignConvs[0]));
    Tensor t = space_to_depth(pyr.levels[0], p.spdBlock);
    pyr.levels[1] = map_silu(conv2d(t, p.alignConvs[1]));
    t = space_to_depth(pyr.levels[1], p.spdBlock);
    pyr.levels[2] = map_silu(conv2d(t, p.alignConvs[2]));
    t = space_to_depth(pyr.levels[2], p.spdBlock);
    pyr.levels[3] = map_silu(conv2d(t, p.extraTapConv));
    return pyr;
}

std::array<Tensor, kNumInjectScales> scale_embed(const ScalePyramid& pyr,
                                                 const ScaleEncoderParams& p) {
    std::array<Tensor, kNumInjectScales> out;
    for (std::size_t i = 0; i < kNumInjectScales; ++i) {
        const Tensor refined = map_silu(conv2d(pyr.levels[i], p.embedTaps[i].dw));
        out[i] = conv2d(refined, p.embedTaps[i].zero);
    }
    return out;
}

CondModParams make_cond_mod(std::size_t channels, std::size_t groups, Rng& rng) {
    if (channels == 0 || groups == 0 || channels % groups != 0) {
        throw DimensionError("make_cond_mod: channels not divisible by groups");
    }
    CondModParams p;
    p.groups = groups;
    p.alphaConv = make_depthwise(channels, 3, rng, /*zero_init=*/false, /*with_bias=*/false);
    p.betaConv = make_depthwise(channels, 3, rng, /*zero_init=*/false, /*with_bias=*/false);
    return p;
}

Tensor cond_mod(const Tensor& noise_feat, const Tensor& cond_feat, const Tensor& text_emb,
                const CondModParams& p) {
    if (noise_feat.rank() != 4 || !noise_feat.same_shape(cond_feat)) {
        throw DimensionError("cond_mod: noise/condition features must share (N,C,H,W), got " +
                             shape_to_string(noise_feat.shape()) + " vs " +
                             shape_to_string(cond_feat.shape()));
    }
    const std::size_t c = noise_feat.dim(1);
    if (!text_emb.empty() && (text_emb.rank() != 1 || text_emb.dim(0) != c)) {
        throw DimensionError("cond_mod: text embedding must be a (C) vector, got " +
                             shape_to_string(text_emb.shape()));
    }
    const Tensor gn = group_norm(noise_feat, p.groups, p.eps);
    const Tensor alpha = conv2d(cond_feat, p.alphaConv);
    const Tensor beta = conv2d(cond_feat, p.betaConv);
    if (!alpha.same_shape(noise_feat) || !beta.same_shape(noise_feat)) {
        throw DimensionError("cond_mod: alpha/beta convolutions must preserve the feature shape");
    }
    Tensor out = gn;
    const std::size_t n = out.dim(0), h = out.dim(2), w = out.dim(3);
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t cc = 0; cc < c; ++cc) {
            const double text = text_emb.empty() ? 0.0 : text_emb[cc];
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t xx = 0; xx < w; ++xx)
                    out.at4(ni, cc, y, xx) = gn.at4(ni, cc, y, xx) * (1.0 + alpha.at4(ni, cc, y, xx)) +
                                             beta.at4(ni, cc, y, xx) + text;
        }
    return out;
}

Tensor cond_mod_grad_x(const Tensor& noise_feat, const Tensor& cond_feat,
                       const CondModParams& p) {
    if (!noise_feat.same_shape(cond_feat)) {
        throw DimensionError("cond_mod_grad_x: feature shape mismatch");
    }
    const Tensor alpha = conv2d(cond_feat, p.alphaConv);
    Tensor g = alpha;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 1.0 + alpha[i];
    return group_norm_backward(noise_feat, g, p.groups, p.eps);
}

// ---- toy U-Net ----

namespace {

Tensor sinusoidal_time(std::size_t t, std::size_t dim) {
    const std::size_t half = dim / 2;
    std::vector<double> v(dim, 0.0);
    for (std::size_t i = 0; i < half; ++i) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
        v[2 * i] = std::sin(static_cast<double>(t) * freq);
        v[2 * i + 1] = std::cos(static_cast<double>(t) * freq);
    }
    return Tensor::from_data({dim}, std::move(v));
}

// y = W (r x c) * v (c) [+ b (r)]
Tensor matvec(const Tensor& w, const Tensor& v, const Tensor& b) {
    const std::size_t r = w.dim(0), c = w.dim(1);
    if (v.rank() != 1 || v.dim(0) != c) {
        throw DimensionError("matvec: vector dim " + shape_to_string(v.shape()) +
                             " does not match matrix " + shape_to_string(w.shape()));
    }
    Tensor out = Tensor::zeros({r});
    for (std::size_t i = 0; i < r; ++i) {
        double acc = b.empty() ? 0.0 : b[i];
        for (std::size_t j = 0; j < c; ++j) acc += w.at2(i, j) * v[j];
        out[i] = acc;
    }
    return out;
}

void add_channel_bias(Tensor& x, const Tensor& bias) {
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (bias.rank() != 1 || bias.dim(0) != c) {
        throw DimensionError("add_channel_bias: bias must be a (C) vector");
    }
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t cc = 0; cc < c; ++cc)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t xx = 0; xx < w; ++xx) x.at4(ni, cc, y, xx) += bias[cc];
}

} // namespace

ToyUNet::ToyUNet(std::size_t latent_c, std::array<std::size_t, kNumInjectScales> widths,
                 std::size_t text_dim, std::uint64_t seed)
    : latent_c_(latent_c), widths_(widths), text_dim_(text_dim) {
    if (latent_c == 0 || text_dim == 0) throw ValidationError("ToyUNet: zero channel count");
    for (std::size_t w : widths) {
        if (w == 0 || w % kNormGroups != 0) {
            throw DimensionError("ToyUNet: stage widths must be positive multiples of " +
                                 std::to_string(kNormGroups));
        }
    }
    Rng rng(seed);
    in_conv_ = make_conv(widths[0], latent_c, 3, 1, 1, 1, rng);
    for (std::size_t i = 0; i < 3; ++i) {
        down_convs_[i] = make_conv(widths[i + 1], widths[i], 3, 2, 1, 1, rng);
    }
    mid_conv_ = make_conv(widths[3], widths[3], 3, 1, 1, 1, rng);
    up_convs_[0] = make_conv(widths[2], widths[3] + widths[2], 3, 1, 1, 1, rng);
    up_convs_[1] = make_conv(widths[1], widths[2] + widths[1], 3, 1, 1, 1, rng);
    up_convs_[2] = make_conv(widths[0], widths[1] + widths[0], 3, 1, 1, 1, rng);
    out_conv_ = make_conv(latent_c, widths[0], 1, 1, 0, 1, rng);
    time_proj_ = Tensor::random_uniform({widths[0], kTimeDim}, rng, -0.05, 0.05);
    time_bias_ = Tensor::random_uniform({widths[0]}, rng, -0.05, 0.05);
    for (std::size_t i = 0; i < kNumInjectScales; ++i) {
        text_projs_[i] = Tensor::random_uniform({widths[i], text_dim}, rng, -0.05, 0.05);
    }
}

Tensor ToyUNet::stage_feature(const Tensor& x, std::size_t scale,
                              const std::array<Tensor, kNumInjectScales>* cond_feats,
                              const Tensor* text_emb,
                              const std::array<CondModParams, kNumInjectScales>* mods) const {
    if (!mods) return group_norm(x, kNormGroups, kNormEps);
    const Tensor text_c = matvec(text_projs_[scale], *text_emb, Tensor{});
    return cond_mod(x, (*cond_feats)[scale], text_c, (*mods)[scale]);
}

Tensor ToyUNet::forward(const Tensor& z, std::size_t t,
                        const std::array<Tensor, kNumInjectScales>* cond_feats,
                        const Tensor* text_emb,
                        const std::array<CondModParams, kNumInjectScales>* mods) const {
    const bool conditioned = mods != nullptr;
    if ((cond_feats != nullptr) != conditioned || (text_emb != nullptr) != conditioned) {
        throw ValidationError("ToyUNet: condition features, text, and mods must be "
                              "provided together or not at all");
    }
    if (z.rank() != 4 || z.dim(1) != latent_c_ || z.dim(2) != kInjectRes[0] ||
        z.dim(3) != kInjectRes[0]) {
        throw DimensionError("ToyUNet: expected (N," + std::to_string(latent_c_) +
                             ",64,64) latent, got " + shape_to_string(z.shape()));
    }
    if (conditioned && (text_emb->rank() != 1 || text_emb->dim(0) != text_dim_)) {
        throw DimensionError("ToyUNet: text embedding must be (" + std::to_string(text_dim_) +
                             "), got " + shape_to_string(text_emb->shape()));
    }

    const Tensor t_bias = matvec(time_proj_, sinusoidal_time(t, kTimeDim), time_bias_);

    std::array<Tensor, kNumInjectScales> skips;
    Tensor x = conv2d(z, in_conv_);
    add_channel_bias(x, t_bias);
    x = map_silu(stage_feature(x, 0, cond_feats, text_emb, mods));
    skips[0] = x;
    for (std::size_t s = 1; s < kNumInjectScales; ++s) {
        x = conv2d(x, down_convs_[s - 1]);
        x = map_silu(stage_feature(x, s, cond_feats, text_emb, mods));
        skips[s] = x;
    }

    Tensor u = map_silu(conv2d(skips[3], mid_conv_));
    for (std::size_t s = 3; s-- > 0;) {
        u = resize_bilinear(u, kInjectRes[s], kInjectRes[s]);
        u = map_silu(conv2d(concat_channels(u, skips[s]), up_convs_[2 - s]));
    }
    return conv2d(u, out_conv_);
}

// ---- injection wiring ----

Tensor condition_input(const cond::ConditionSet& set) {
    set.edgeMap.validate();
    if (set.edgeMap.empty()) throw ValidationError("condition_input: empty edge map");
    const std::size_t h = set.edgeMap.height, w = set.edgeMap.width;
    if (set.depthMap.rank() != 4 || set.depthMap.dim(0) != 1 || set.depthMap.dim(1) != 1 ||
        set.depthMap.dim(2) != h || set.depthMap.dim(3) != w) {
        throw DimensionError("condition_input: depth map must be (1,1,H,W) matching the edge map");
    }
    std::vector<double> edge(h * w);
    for (std::size_t i = 0; i < edge.size(); ++i) {
        edge[i] = static_cast<double>(set.edgeMap.data[i]) / 255.0;
    }
    const Tensor edge_t = Tensor::from_data({1, 1, h, w}, std::move(edge));
    return concat_channels(edge_t, set.depthMap);
}

Tensor injection_forward(const Tensor& z_t, std::size_t t, const cond::ConditionSet& set,
                         const DenoiserInterface& denoiser, const ScaleEncoderParams& enc,
                         const std::array<CondModParams, kNumInjectScales>& mods) {
    const Tensor cond_in = condition_input(set);
    const ScalePyramid pyr = scale_align(cond_in, enc);
    const std::array<Tensor, kNumInjectScales> feats = scale_embed(pyr, enc);
    return denoiser.forward(z_t, t, &feats, &set.textEmbedding, &mods);
}

Tensor ddim_sample(const Tensor& z_init, const DenoiserInterface& denoiser,
                   const NoiseSchedule& sched, std::size_t steps,
                   const std::array<Tensor, kNumInjectScales>* cond_feats,
                   const Tensor* text_emb,
                   const std::array<CondModParams, kNumInjectScales>* mods) {
    const std::vector<std::size_t> ts = skip_timesteps(sched, steps);
    Tensor z = z_init;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        const Tensor eps = denoiser.forward(z, ts[i], cond_feats, text_emb, mods);
        z = ddim_step(z, eps, ts[i], ts[i + 1], sched);
    }
    return z;
}

} // namespace unipcb::diff
