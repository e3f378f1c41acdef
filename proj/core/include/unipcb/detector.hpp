#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "unipcb/nn_ops.hpp"
#include "unipcb/tensor.hpp"

namespace unipcb::det {

// ---- shift-wise convolution ----

/// Channel groups each translated by one unit offset (dy, dx) with zero
/// fill, then aggregated by a depthwise convolution.
struct ShiftSpec {
    std::size_t groups = 8;
    std::vector<std::pair<int, int>> directions;  // (dy, dx), one per group
    ConvParams dwConv;
};

/// Canonical direction order: up, down, left, right, then the four
/// diagonals (upper-left, upper-right, lower-left, lower-right).
const std::vector<std::pair<int, int>>& all_shift_directions();

ShiftSpec make_shift_spec(std::size_t channels, std::size_t groups, Rng& rng);

Tensor shift_wise_conv(const Tensor& x, const ShiftSpec& s);

// ---- IRSA ----

/// Inverted-residual shift attention block: CBR stem, channel expansion,
/// spatial self-attention (Q,K from the stem output, V from the expanded
/// feature), shift-wise convolution, merge projection, and the double
/// residual input + stem + merged output.
struct IrsaParams {
    ConvParams cbr;
    BatchNormStats bn;
    ConvParams expand;   // 1x1, C -> C'
    AttentionParams attn;
    ShiftSpec shift;
    ConvParams merge;    // 1x1, C' -> C
};

IrsaParams make_irsa(std::size_t channels, std::size_t ratio, std::size_t shift_groups,
                     std::size_t heads, Rng& rng, bool zero_merge = false);

Tensor irsa_forward(const Tensor& x, const IrsaParams& p);

/// The intermediate stem feature (CBR output); exposed because the block's
/// residual identity is stated in terms of it.
Tensor irsa_pre(const Tensor& x, const IrsaParams& p);

// ---- DPCA / CLCF ----

using GateMap = Tensor;

/// Dual-path cross attention gate. Input is the channel concatenation of
/// the two aligned fusion operands (2C channels); the gate has C channels.
struct DpcaParams {
    ConvParams qkvProj;           // 1x1, 2C -> C
    ConvParams localDw;           // 3x3 depthwise over C
    std::size_t shuffleGroups = 4;
    ConvParams localGroup;        // 3x3 grouped, C -> C
    AttentionParams globalAttn;   // headScale holds the learnable per-head divisor
    ConvParams globalProj;        // 1x1 inside the global path, residual added after
    ConvParams gateConv;          // 7x7 grouped, 4C -> C, sigmoid output
};

DpcaParams make_dpca(std::size_t channels, std::size_t heads, Rng& rng,
                     bool zero_gate = false);

/// Per-pixel fusion weights, strictly inside (0,1). A zeroed gateConv
/// yields 0.5 everywhere.
GateMap dpca_gate(const Tensor& x, const DpcaParams& p);

/// w*fl + (1-w)*fh + (fl+fh), evaluated as 0.5*s + (w-0.5)*d + s with
/// s = fl+fh and d = fl-fh. That ordering keeps two special cases exact in
/// floating point: equal inputs give 3*fl and a neutral 0.5 gate gives
/// 1.5*(fl+fh).
Tensor clcf_mix(const Tensor& fl, const Tensor& fh, const GateMap& w);

/// Gated cross-level fusion: Proj(clcf_mix(fl, fh, dpca_gate([fl|fh]))).
Tensor clcf_fuse(const Tensor& fl, const Tensor& fh, const DpcaParams& p,
                 const ConvParams& proj);

/// Gradient of sum(clcf_fuse) with respect to fl with the gate treated as
/// a constant: each input element contributes through the mix weight
/// (w + 1) times the column sums of the projection.
Tensor clcf_grad_fl_frozen_gate(const Tensor& fl, const Tensor& fh, const GateMap& w,
                                const ConvParams& proj);

// ---- backbone / neck assembly ----

struct PyramidFeatures {
    Tensor s3;  // stride 8
    Tensor s4;  // stride 16
    Tensor s5;  // stride 32
};

struct BackboneStage {
    ConvParams down;
    IrsaParams irsa;
};

using BackboneParams = std::array<BackboneStage, 4>;

/// Stage channel plan 3 -> 8 -> 16 -> 32 -> 64 with strides 4,2,2,2.
BackboneParams make_backbone(Rng& rng);

/// Four downsample+IRSA stages; returns the stride 8/16/32 taps.
PyramidFeatures backbone_forward(const Tensor& img, const BackboneParams& stages);

struct ClcfParams {
    DpcaParams dpca;
    ConvParams proj;     // 1x1 fusion projection
    ConvParams lateral;  // 1x1 aligning the high-level input's channels
};

/// One CLCF per pyramid level, largest spatial level first.
struct NeckParams {
    ClcfParams l;  // fuses s3 with upsampled s4
    ClcfParams m;  // fuses s4 with upsampled s5
    ClcfParams s;  // fuses s5 with its own re-sampled projection
};

NeckParams make_neck(Rng& rng);

/// The aligned high-level operand fed to each CLCF: the next-deeper level
/// laterally projected and resized; the deepest level uses a halved and
/// restored copy of its own projection.
std::array<Tensor, 3> neck_high_inputs(const PyramidFeatures& pyr, const NeckParams& p);

PyramidFeatures neck_fuse(const PyramidFeatures& pyr, const NeckParams& p);

} // namespace unipcb::det
