#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "unipcb/tensor.hpp"

namespace unipcb {

class Rng;

/// 2-D convolution parameters. Weight layout (outC, inC/groups, kH, kW);
/// bias is (outC) or empty for bias-free convolutions.
struct ConvParams {
    Tensor weights;
    Tensor bias;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t groups = 1;

    std::size_t out_channels() const { return weights.dim(0); }
    std::size_t in_channels() const { return weights.dim(1) * groups; }
    std::size_t kernel_h() const { return weights.dim(2); }
    std::size_t kernel_w() const { return weights.dim(3); }
    bool has_bias() const { return !bias.empty(); }
};

/// Attention projections as 1x1 convolutions over feature maps. When
/// headScale is empty the logit scale is 1/sqrt(d_k); a non-empty
/// headScale holds one positive temperature per head used as the logit
/// divisor instead (XCiT-style learned scaling).
struct AttentionParams {
    ConvParams projQ;
    ConvParams projK;
    ConvParams projV;
    std::size_t heads = 1;
    std::vector<double> headScale;
};

// ---- scalar activations ----

// Numerically stable logistic sigmoid (branch on sign avoids overflow).
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double silu(double x) { return x * sigmoid(x); }

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

Tensor map_sigmoid(const Tensor& x);
Tensor map_silu(const Tensor& x);
Tensor map_relu(const Tensor& x);

// ---- core kernels ----

/// Standard strided, zero-padded, grouped 2-D convolution (cross-correlation)
/// over (N,C,H,W). groups == C with one-channel kernels realizes a depthwise
/// convolution; a 1x1 kernel realizes a pointwise projection.
Tensor conv2d(const Tensor& x, const ConvParams& p);

/// GroupNorm without learned affine parameters: per sample and per channel
/// group, subtract the mean and divide by sqrt(var + eps).
Tensor group_norm(const Tensor& x, std::size_t num_groups, double eps = 1e-5);

/// Gradient of sum(group_norm(x) * g) with respect to x. With y the
/// normalized output and sigma the per-group stddev, each element gets
/// (g - mean(g) - y * mean(g*y)) / sigma, means taken over its group.
Tensor group_norm_backward(const Tensor& x, const Tensor& g, std::size_t num_groups,
                           double eps = 1e-5);

/// Max-subtracted softmax along one axis of an arbitrary-rank tensor.
Tensor softmax(const Tensor& x, std::size_t axis);

/// Single-head attention over row-major token matrices: q (Tq, dk),
/// k (Tk, dk), v (Tk, dv) -> (Tq, dv). Logits are q.k / scale_divisor,
/// so the canonical 1/sqrt(dk) scaling uses scale_divisor = sqrt(dk).
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            double scale_divisor);

/// Multi-head attention over feature maps with spatial positions as tokens
/// and channels as features. Q and K are projected from qk_src, V from
/// v_src; output channels match the V projection. Per head the logit
/// divisor is headScale[h] when set, else sqrt(per-head key dim).
Tensor mhsa_feature(const Tensor& qk_src, const Tensor& v_src, const AttentionParams& p);

/// Fixed channel permutation: reshape C -> (groups, C/groups), transpose,
/// flatten. channel_shuffle(channel_shuffle(x, g), C/g) == x.
Tensor channel_shuffle(const Tensor& x, std::size_t groups);

/// (N,C,H,W) -> (N, C*block^2, H/block, W/block). Output channel
/// (dy*block + dx)*C + c holds input channel c sampled at block offset
/// (dy, dx): offset-major, then channel. Lossless.
Tensor space_to_depth(const Tensor& x, std::size_t block);

/// Exact inverse of space_to_depth.
Tensor depth_to_space(const Tensor& x, std::size_t block);

/// Bilinear resize with the align-corners=false convention; a same-size
/// resize returns a bitwise-equal copy.
Tensor resize_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w);

/// Inference-mode batch normalization with fixed statistics; the default
/// identity statistics (mean 0, var 1, eps 0) make it a no-op so composed
/// blocks stay oracle-friendly.
struct BatchNormStats {
    double mean = 0.0;
    double var = 1.0;
    double gamma = 1.0;
    double beta = 0.0;
    double eps = 0.0;
};
Tensor batch_norm_inference(const Tensor& x, const BatchNormStats& s);

/// Concatenate rank-4 tensors along the channel axis.
Tensor concat_channels(const std::vector<const Tensor*>& parts);
Tensor concat_channels(const Tensor& a, const Tensor& b);

// ---- parameter construction ----

/// Seeded uniform[-0.05, 0.05] weights and bias. zero_init forces every
/// weight and bias to exactly 0 (zero-convolution initialization).
ConvParams make_conv(std::size_t out_c, std::size_t in_c, std::size_t kernel,
                     std::size_t stride, std::size_t padding, std::size_t groups,
                     Rng& rng, bool zero_init = false, bool with_bias = true);

/// Depthwise convenience: groups == channels, square kernel, same-padding.
ConvParams make_depthwise(std::size_t channels, std::size_t kernel, Rng& rng,
                          bool zero_init = false, bool with_bias = true);

} // namespace unipcb
