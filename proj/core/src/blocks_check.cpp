#include "unipcb/blocks_check.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "unipcb/detector.hpp"
#include "unipcb/errors.hpp"
#include "unipcb/grad_check.hpp"
#include "unipcb/nn_ops.hpp"
#include "unipcb/parallel.hpp"
#include "unipcb/rng.hpp"
#include "unipcb/tolerances.hpp"

namespace unipcb::det {

namespace {

// Every case seeds its own generator from its name; no shared state.
Rng case_rng(const std::string& name) { return Rng(mix_seed(fnv1a64(name))); }

void require(bool ok, const std::string& what) {
    if (!ok) throw NumericError(what);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::string check_irsa_shape_sweep() {
    Rng rng = case_rng("irsa-shape-sweep");
    std::size_t valid = 0, rejected = 0;
    for (std::size_t c : {4u, 8u, 16u}) {
        for (std::size_t ratio : {1u, 2u, 4u}) {
            for (std::size_t g : {1u, 2u, 4u, 8u}) {
                const std::size_t expanded = c * ratio;
                if (expanded % g != 0) {
                    bool threw = false;
                    try {
                        (void)make_irsa(c, ratio, g, 1, rng);
                    } catch (const DimensionError&) {
                        threw = true;
                    }
                    require(threw, "indivisible combo accepted: C=" + std::to_string(c) +
                                       " ratio=" + std::to_string(ratio) + " G=" + std::to_string(g));
                    ++rejected;
                    continue;
                }
                const IrsaParams p = make_irsa(c, ratio, g, 1, rng);
                const Tensor x = Tensor::random_uniform({1, c, 6, 6}, rng);
                const Tensor y = irsa_forward(x, p);
                require(y.same_shape(x), "shape change at C=" + std::to_string(c) +
                                             " ratio=" + std::to_string(ratio) +
                                             " G=" + std::to_string(g));
                y.assert_finite("irsa-shape-sweep");
                ++valid;
            }
        }
    }
    return std::to_string(valid) + " combos preserved shape, " + std::to_string(rejected) +
           " indivisible combos rejected";
}

std::string check_irsa_zero_merge_residual() {
    Rng rng = case_rng("irsa-zero-merge-residual");
    const IrsaParams p = make_irsa(8, 2, 4, 2, rng, /*zero_merge=*/true);
    const Tensor x = Tensor::random_uniform({2, 8, 5, 5}, rng);
    const Tensor expected = add(x, irsa_pre(x, p));
    const double diff = max_abs_diff(irsa_forward(x, p), expected);
    require(diff == 0.0, "zero-merge residual differs by " + fmt(diff));
    return "output equals input + stem exactly";
}

std::string check_attention_convex_hull() {
    Rng rng = case_rng("attention-convex-hull");
    for (int rep = 0; rep < 5; ++rep) {
        const Tensor q = Tensor::random_uniform({6, 4}, rng, -2.0, 2.0);
        const Tensor k = Tensor::random_uniform({9, 4}, rng, -2.0, 2.0);
        const Tensor v = Tensor::random_uniform({9, 3}, rng, -5.0, 5.0);
        const Tensor out = scaled_dot_attention(q, k, v, 2.0);
        for (std::size_t col = 0; col < 3; ++col) {
            double lo = v.at2(0, col), hi = lo;
            for (std::size_t r = 1; r < 9; ++r) {
                lo = std::min(lo, v.at2(r, col));
                hi = std::max(hi, v.at2(r, col));
            }
            for (std::size_t r = 0; r < 6; ++r)
                require(out.at2(r, col) >= lo - 1e-12 && out.at2(r, col) <= hi + 1e-12,
                        "attention output escapes the convex hull of V");
        }
    }
    return "rows stay inside the value hull";
}

std::string check_softmax_rows() {
    Rng rng = case_rng("softmax-rows");
    Tensor x = Tensor::random_uniform({7, 11}, rng, -30.0, 30.0);
    x[3] = 500.0;   // extreme logits must not overflow
    x[17] = -500.0;
    const Tensor s = softmax(x, 1);
    s.assert_finite("softmax-rows");
    for (std::size_t r = 0; r < 7; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 11; ++c) {
            require(s.at2(r, c) >= 0.0, "negative softmax mass");
            sum += s.at2(r, c);
        }
        require(std::fabs(sum - 1.0) <= tolerances().softmax_row_sum,
                "row " + std::to_string(r) + " sums to " + fmt(sum));
    }
    return "row sums within " + fmt(tolerances().softmax_row_sum) + " of 1";
}

std::string check_group_norm_stats() {
    Rng rng = case_rng("group-norm-stats");
    const Tensor x = Tensor::random_uniform({2, 8, 6, 6}, rng);
    const Tensor y = group_norm(x, 4, 1e-5);
    const std::size_t cpg = 2, plane = 36, group_size = cpg * plane;
    for (std::size_t n = 0; n < 2; ++n) {
        for (std::size_t g = 0; g < 4; ++g) {
            double mean = 0.0, var = 0.0;
            for (std::size_t c = g * cpg; c < (g + 1) * cpg; ++c)
                for (std::size_t i = 0; i < plane; ++i)
                    mean += y[((n * 8 + c) * plane) + i];
            mean /= static_cast<double>(group_size);
            for (std::size_t c = g * cpg; c < (g + 1) * cpg; ++c)
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = y[((n * 8 + c) * plane) + i] - mean;
                    var += d * d;
                }
            var /= static_cast<double>(group_size);
            require(std::fabs(mean) <= tolerances().group_norm_mean,
                    "group mean " + fmt(mean) + " off zero");
            require(std::fabs(var - 1.0) <= tolerances().group_norm_var,
                    "group variance " + fmt(var) + " off one");
        }
    }
    return "normalized groups have zero mean, unit variance";
}

std::string check_shift_translation() {
    Rng rng = case_rng("shift-translation");
    ShiftSpec spec;
    spec.groups = 8;
    spec.directions = all_shift_directions();
    // Identity depthwise kernel: the aggregation must not mask the shift.
    spec.dwConv.weights = Tensor::zeros({8, 1, 3, 3});
    for (std::size_t c = 0; c < 8; ++c) spec.dwConv.weights.at4(c, 0, 1, 1) = 1.0;
    spec.dwConv.stride = 1;
    spec.dwConv.padding = 1;
    spec.dwConv.groups = 8;

    const Tensor x = Tensor::random_uniform({1, 8, 5, 5}, rng);
    const Tensor y = shift_wise_conv(x, spec);
    for (std::size_t c = 0; c < 8; ++c) {
        const auto [dy, dx] = spec.directions[c];
        for (int py = 0; py < 5; ++py) {
            for (int px = 0; px < 5; ++px) {
                const int sy = py - dy, sx = px - dx;
                const double expect = (sy >= 0 && sy < 5 && sx >= 0 && sx < 5)
                                          ? x.at4(0, c, sy, sx)
                                          : 0.0;
                require(y.at4(0, c, py, px) == expect, "channel " + std::to_string(c) +
                                                           " not translated by its direction");
            }
        }
    }
    return "each group translated by its unit offset, zero fill at borders";
}

std::string check_channel_shuffle_roundtrip() {
    Rng rng = case_rng("channel-shuffle-roundtrip");
    const Tensor x = Tensor::random_uniform({2, 12, 3, 3}, rng);
    const Tensor once = channel_shuffle(x, 4);
    const Tensor back = channel_shuffle(once, 3);  // inverse uses C/g groups
    require(bitwise_equal(back, x), "shuffle(4) then shuffle(3) is not the identity on C=12");
    // The shuffle permutes whole channel planes; verify one known image.
    require(bitwise_equal(Tensor::from_data({1, 1, 3, 3},
                                            std::vector<double>(once.data(), once.data() + 9)),
                          Tensor::from_data({1, 1, 3, 3},
                                            std::vector<double>(x.data(), x.data() + 9))),
            "channel 0 must stay in place");
    return "interleave and inverse restore the input";
}

std::string check_dpca_gate_interval() {
    Rng rng = case_rng("dpca-gate-interval");
    const DpcaParams p = make_dpca(8, 2, rng);
    const Tensor x = Tensor::random_uniform({1, 16, 4, 4}, rng);
    const GateMap w = dpca_gate(x, p);
    require(w.rank() == 4 && w.dim(1) == 8 && w.dim(2) == 4 && w.dim(3) == 4,
            "gate shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i)
        require(w[i] > 0.0 && w[i] < 1.0, "gate value " + fmt(w[i]) + " leaves (0,1)");
    return "all gate values strictly inside (0,1)";
}

std::string check_clcf_equal_inputs() {
    Rng rng = case_rng("clcf-equal-inputs");
    const Tensor fl = Tensor::random_uniform({1, 8, 4, 4}, rng, -3.0, 3.0);
    const Tensor w = Tensor::random_uniform({1, 8, 4, 4}, rng, 0.01, 0.99);
    const double diff = max_abs_diff(clcf_mix(fl, fl, w), scale(fl, 3.0));
    require(diff == 0.0, "equal inputs drift from 3*fl by " + fmt(diff));
    return "equal operands mix to exactly three times the input";
}

std::string check_clcf_zero_gate() {
    Rng rng = case_rng("clcf-zero-gate");
    const DpcaParams p = make_dpca(8, 2, rng, /*zero_gate=*/true);
    const Tensor fl = Tensor::random_uniform({1, 8, 4, 4}, rng, -3.0, 3.0);
    const Tensor fh = Tensor::random_uniform({1, 8, 4, 4}, rng, -3.0, 3.0);
    const GateMap w = dpca_gate(concat_channels(fl, fh), p);
    for (std::size_t i = 0; i < w.size(); ++i)
        require(w[i] == 0.5, "zeroed gate conv must sigmoid to exactly 0.5");
    const double diff = max_abs_diff(clcf_mix(fl, fh, w), scale(add(fl, fh), 1.5));
    require(diff == 0.0, "neutral gate drifts from 1.5*(fl+fh) by " + fmt(diff));
    return "neutral gate mixes to exactly 1.5*(fl+fh)";
}

std::string check_clcf_frozen_gate_gradient() {
    Rng rng = case_rng("clcf-frozen-gate-gradient");
    const DpcaParams dp = make_dpca(4, 2, rng);
    const ConvParams proj = make_conv(4, 4, 1, 1, 0, 1, rng);
    const Tensor fl0 = Tensor::random_uniform({1, 4, 5, 5}, rng);
    const Tensor fh = Tensor::random_uniform({1, 4, 5, 5}, rng);
    const GateMap w = dpca_gate(concat_channels(fl0, fh), dp);

    const auto f = [&](const Tensor& fl) {
        const Tensor out = conv2d(clcf_mix(fl, fh, w), proj);
        return kahan_sum(out.data(), out.size());
    };
    const auto g = [&](const Tensor& fl) { return clcf_grad_fl_frozen_gate(fl, fh, w, proj); };
    const double rel = grad_check(f, g, fl0, 1e-5);
    require(rel <= tolerances().grad_check_rel,
            "frozen-gate gradient error " + fmt(rel) + " exceeds tolerance");
    return "analytic gradient matches central differences (rel " + fmt(rel) + ")";
}

std::string check_backbone_pyramid() {
    Rng rng = case_rng("backbone-pyramid");
    const BackboneParams bb = make_backbone(rng);
    const Tensor img = Tensor::random_uniform({1, 3, 64, 64}, rng);
    const PyramidFeatures pyr = backbone_forward(img, bb);
    const auto expect = [&](const Tensor& t, std::size_t c, std::size_t hw, const char* lvl) {
        require(t.rank() == 4 && t.dim(0) == 1 && t.dim(1) == c && t.dim(2) == hw && t.dim(3) == hw,
                std::string(lvl) + " tap has shape " + shape_to_string(t.shape()));
        t.assert_finite(lvl);
    };
    expect(pyr.s3, 16, 8, "s3");
    expect(pyr.s4, 32, 4, "s4");
    expect(pyr.s5, 64, 2, "s5");
    return "taps at strides 8/16/32 with channel plan 16/32/64";
}

std::string check_neck_composition() {
    Rng rng = case_rng("neck-composition");
    const NeckParams neck = make_neck(rng);
    PyramidFeatures pyr;
    pyr.s3 = Tensor::random_uniform({1, 16, 8, 8}, rng);
    pyr.s4 = Tensor::random_uniform({1, 32, 4, 4}, rng);
    pyr.s5 = Tensor::random_uniform({1, 64, 2, 2}, rng);

    const auto high = neck_high_inputs(pyr, neck);
    const PyramidFeatures fused = neck_fuse(pyr, neck);
    require(bitwise_equal(fused.s3, clcf_fuse(pyr.s3, high[0], neck.l.dpca, neck.l.proj)),
            "level l fusion is not clcf_fuse of the published operands");
    require(bitwise_equal(fused.s4, clcf_fuse(pyr.s4, high[1], neck.m.dpca, neck.m.proj)),
            "level m fusion is not clcf_fuse of the published operands");
    require(bitwise_equal(fused.s5, clcf_fuse(pyr.s5, high[2], neck.s.dpca, neck.s.proj)),
            "level s fusion is not clcf_fuse of the published operands");
    require(fused.s3.same_shape(pyr.s3) && fused.s4.same_shape(pyr.s4) &&
                fused.s5.same_shape(pyr.s5),
            "fusion must preserve per-level shapes");
    return "neck output composes exactly from gate, mix and projection";
}

struct CheckCase {
    const char* name;
    std::function<std::string()> run;
};

const std::vector<CheckCase>& registry() {
    static const std::vector<CheckCase> cases = {
        {"irsa-shape-sweep", check_irsa_shape_sweep},
        {"irsa-zero-merge-residual", check_irsa_zero_merge_residual},
        {"attention-convex-hull", check_attention_convex_hull},
        {"softmax-rows", check_softmax_rows},
        {"group-norm-stats", check_group_norm_stats},
        {"shift-translation", check_shift_translation},
        {"channel-shuffle-roundtrip", check_channel_shuffle_roundtrip},
        {"dpca-gate-interval", check_dpca_gate_interval},
        {"clcf-equal-inputs", check_clcf_equal_inputs},
        {"clcf-zero-gate", check_clcf_zero_gate},
        {"clcf-frozen-gate-gradient", check_clcf_frozen_gate_gradient},
        {"backbone-pyramid", check_backbone_pyramid},
        {"neck-composition", check_neck_composition},
    };
    return cases;
}

} // namespace

std::vector<std::string> block_check_names() {
    std::vector<std::string> names;
    for (const auto& c : registry()) names.emplace_back(c.name);
    return names;
}

std::vector<CheckResult> run_block_checks(const std::string& filter, std::size_t workers) {
    std::vector<const CheckCase*> selected;
    for (const auto& c : registry())
        if (filter.empty() || std::string(c.name).find(filter) != std::string::npos)
            selected.push_back(&c);

    return parallel_map<CheckResult>(
        selected.size(),
        [&](std::size_t i) {
            CheckResult r;
            r.name = selected[i]->name;
            try {
                r.detail = selected[i]->run();
                r.passed = true;
            } catch (const std::exception& e) {
                r.passed = false;
                r.detail = e.what();
            }
            return r;
        },
        workers);
}

} // namespace unipcb::det
