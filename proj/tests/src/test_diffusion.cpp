#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "naive_ref.hpp"
#include "unipcb/cond_inject.hpp"
#include "unipcb/diffusion.hpp"
#include "unipcb/errors.hpp"
#include "unipcb/grad_check.hpp"
#include "unipcb/rng.hpp"

using namespace unipcb;
using namespace unipcb::diff;

namespace {

// Minimal all-zero condition bundle at 64x64 whose text embedding has the
// denoiser's text dimension. Fresh zero convolutions plus a zero embedding
// must make the conditioned path coincide with the unconditioned one.
cond::ConditionSet zero_condition_set(std::size_t text_dim) {
    cond::ConditionSet set;
    set.edgeMap = GrayImage(64, 64, 0);
    set.depthMap = Tensor::zeros({1, 1, 64, 64});
    set.prompt = "";
    set.textEmbedding = Tensor::zeros({text_dim});
    return set;
}

} // namespace

TEST_CASE("make_schedule produces a linear, strictly decaying schedule") {
    const NoiseSchedule s = make_schedule(50, 1e-4, 0.02);
    REQUIRE(s.T == 50);
    REQUIRE(s.betas.size() == 50);
    REQUIRE(s.alphaBars.size() == 51);
    CHECK(s.betas.front() == 1e-4);
    CHECK(s.betas.back() == 0.02);
    for (std::size_t i = 1; i < s.betas.size(); ++i) CHECK(s.betas[i] > s.betas[i - 1]);
    // Uniform spacing.
    const double step = (0.02 - 1e-4) / 49.0;
    for (std::size_t i = 0; i < s.betas.size(); ++i)
        CHECK(std::fabs(s.betas[i] - (1e-4 + step * static_cast<double>(i))) <= 1e-15);

    CHECK(s.alphaBars[0] == 1.0);
    for (std::size_t t = 1; t <= 50; ++t) {
        CHECK(s.alphaBars[t] < s.alphaBars[t - 1]);
        CHECK(s.alphaBars[t] > 0.0);
        // Definition check against an independent product.
        double prod = 1.0;
        for (std::size_t i = 0; i < t; ++i) prod *= 1.0 - s.betas[i];
        CHECK(std::fabs(s.alpha_bar(t) - prod) <= 1e-15);
    }

    const NoiseSchedule one = make_schedule(1, 0.01, 0.01);
    CHECK(one.betas == std::vector<double>{0.01});
    CHECK(one.alphaBars[1] == 0.99);

    CHECK_THROWS_AS(make_schedule(0, 1e-4, 0.02), ValidationError);
    CHECK_THROWS_AS(make_schedule(10, 0.0, 0.02), ValidationError);
    CHECK_THROWS_AS(make_schedule(10, 0.02, 1e-4), ValidationError);
    CHECK_THROWS_AS(make_schedule(10, 0.5, 1.0), ValidationError);
    CHECK_THROWS_AS(s.alpha_bar(51), ValidationError);
}

TEST_CASE("forward_noising interpolates exactly per element") {
    const NoiseSchedule s = make_schedule(50, 1e-4, 0.02);
    Rng rng(mix_seed(fnv1a64("forward-noising")));
    const Tensor z0 = Tensor::random_uniform({2, 4, 8, 8}, rng, -2.0, 2.0);
    const Tensor eps = Tensor::random_uniform({2, 4, 8, 8}, rng, -2.0, 2.0);

    CHECK(bitwise_equal(forward_noising(z0, 0, eps, s), z0));

    for (std::size_t t : {1u, 25u, 50u}) {
        const Tensor zt = forward_noising(z0, t, eps, s);
        const double sa = std::sqrt(s.alpha_bar(t)), sn = std::sqrt(1.0 - s.alpha_bar(t));
        for (std::size_t i = 0; i < zt.size(); ++i)
            CHECK(zt[i] == sa * z0[i] + sn * eps[i]);  // same arithmetic, no reordering
    }

    CHECK_THROWS_AS(forward_noising(z0, 1, Tensor::zeros({1, 1, 2, 2}), s), DimensionError);
    CHECK_THROWS_AS(forward_noising(z0, 51, eps, s), ValidationError);
}

TEST_CASE("ddim_step inverts forward_noising when given the true noise") {
    const NoiseSchedule s = make_schedule(50, 1e-4, 0.02);
    Rng rng(mix_seed(fnv1a64("ddim-roundtrip")));
    const Tensor z0 = Tensor::random_uniform({1, 4, 8, 8}, rng, -1.5, 1.5);
    const Tensor eps = Tensor::random_uniform({1, 4, 8, 8}, rng, -1.5, 1.5);

    for (std::size_t t : {1u, 10u, 25u, 49u}) {
        const Tensor zt = forward_noising(z0, t, eps, s);
        const Tensor back = ddim_step(zt, eps, t, 0, s);
        CHECK(max_abs_diff(back, z0) < 1e-9);
    }

    const Tensor zt = forward_noising(z0, 30, eps, s);
    CHECK(bitwise_equal(ddim_step(zt, eps, 30, 30, s), zt));  // tPrev == t is the identity
    CHECK_THROWS_AS(ddim_step(zt, eps, 30, 31, s), ValidationError);
    CHECK_THROWS_AS(ddim_step(zt, eps, 30, 0, s, 0.5), ValidationError);
    CHECK_THROWS_AS(ddim_step(zt, Tensor::zeros({1, 1, 2, 2}), 30, 0, s), DimensionError);
}

TEST_CASE("skip_timesteps spaces the schedule evenly down to zero") {
    const NoiseSchedule s = make_schedule(50, 1e-4, 0.02);
    const std::vector<std::size_t> expect = {50, 45, 40, 35, 30, 25, 20, 15, 10, 5, 0};
    CHECK(skip_timesteps(s, 10) == expect);
    CHECK(skip_timesteps(s, 1) == std::vector<std::size_t>{50, 0});
    CHECK(skip_timesteps(s, 50).size() == 51);
    CHECK_THROWS_AS(skip_timesteps(s, 0), ValidationError);
    CHECK_THROWS_AS(skip_timesteps(s, 51), ValidationError);
}

TEST_CASE("ddim_sample with an oracle denoiser recovers the clean latent") {
    const NoiseSchedule s = make_schedule(50, 1e-4, 0.02);
    Rng rng(mix_seed(fnv1a64("oracle-sample")));
    const Tensor z0 = Tensor::random_uniform({1, 4, 8, 8}, rng, -1.0, 1.0);
    const Tensor eps = Tensor::random_uniform({1, 4, 8, 8}, rng, -1.0, 1.0);
    const Tensor zT = forward_noising(z0, 50, eps, s);

    const OracleDenoiser oracle(eps);
    const Tensor out = ddim_sample(zT, oracle, s, 10);
    CHECK(max_abs_diff(out, z0) < 1e-7);

    // Every chain length lands on the same clean latent.
    for (std::size_t steps : {1u, 2u, 5u, 25u, 50u})
        CHECK(max_abs_diff(ddim_sample(zT, oracle, s, steps), z0) < 1e-7);
}

TEST_CASE("scale_align emits the four-tap pyramid") {
    Rng rng(mix_seed(fnv1a64("scale-align")));
    const std::array<std::size_t, kNumInjectScales> out_c = {6, 6, 6, 6};
    const ScaleEncoderParams enc = make_scale_encoder(2, 8, out_c, rng);
    const Tensor cond = Tensor::random_uniform({1, 2, 64, 64}, rng);

    const ScalePyramid pyr = scale_align(cond, enc);
    for (std::size_t i = 0; i < kNumInjectScales; ++i) {
        CHECK(pyr.levels[i].dim(0) == 1);
        CHECK(pyr.levels[i].dim(1) == 8);
        CHECK(pyr.levels[i].dim(2) == kInjectRes[i]);
        CHECK(pyr.levels[i].dim(3) == kInjectRes[i]);
    }

    const auto feats = scale_embed(pyr, enc);
    for (std::size_t i = 0; i < kNumInjectScales; ++i) {
        CHECK(feats[i].dim(1) == out_c[i]);
        CHECK(feats[i].dim(2) == kInjectRes[i]);
        // Fresh zero convolutions must silence the taps exactly.
        for (std::size_t j = 0; j < feats[i].size(); ++j) CHECK(feats[i][j] == 0.0);
    }

    CHECK_THROWS_AS(scale_align(Tensor::zeros({1, 2, 32, 32}), enc), DimensionError);
    CHECK_THROWS_AS(scale_align(Tensor::zeros({1, 3, 64, 64}), enc), DimensionError);
}

TEST_CASE("cond_mod matches an elementwise reimplementation") {
    Rng rng(mix_seed(fnv1a64("cond-mod-oracle")));
    const std::size_t C = 8;
    const CondModParams p = make_cond_mod(C, 4, rng);
    const Tensor x = Tensor::random_uniform({2, C, 5, 5}, rng, -2.0, 2.0);
    const Tensor c = Tensor::random_uniform({2, C, 5, 5}, rng, -1.0, 1.0);
    const Tensor text = Tensor::random_uniform({C}, rng, -0.5, 0.5);

    const Tensor got = cond_mod(x, c, text, p);
    const Tensor gn = naive::group_norm(x, p.groups, p.eps);
    const Tensor alpha = naive::conv2d(c, p.alphaConv);
    const Tensor beta = naive::conv2d(c, p.betaConv);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t ch = 0; ch < C; ++ch)
            for (std::size_t y = 0; y < 5; ++y)
                for (std::size_t xx = 0; xx < 5; ++xx) {
                    const double want = gn.at4(n, ch, y, xx) * (1.0 + alpha.at4(n, ch, y, xx)) +
                                        beta.at4(n, ch, y, xx) + text[ch];
                    CHECK(std::fabs(got.at4(n, ch, y, xx) - want) <= 1e-12);
                }
}

TEST_CASE("cond_mod collapses to group_norm on zero conditions") {
    Rng rng(mix_seed(fnv1a64("cond-mod-identity")));
    const CondModParams p = make_cond_mod(8, 4, rng);
    const Tensor x = Tensor::random_uniform({1, 8, 6, 6}, rng, -3.0, 3.0);
    const Tensor zero_c = Tensor::zeros({1, 8, 6, 6});

    const Tensor with_empty_text = cond_mod(x, zero_c, Tensor(), p);
    CHECK(max_abs_diff(with_empty_text, group_norm(x, p.groups, p.eps)) == 0.0);

    const Tensor with_zero_text = cond_mod(x, zero_c, Tensor::zeros({8}), p);
    CHECK(max_abs_diff(with_zero_text, group_norm(x, p.groups, p.eps)) == 0.0);
}

TEST_CASE("cond_mod_grad_x agrees with central differences") {
    Rng rng(mix_seed(fnv1a64("cond-mod-grad")));
    const CondModParams p = make_cond_mod(4, 2, rng);
    const Tensor x0 = Tensor::random_uniform({1, 4, 4, 4}, rng, -1.0, 1.0);
    const Tensor c = Tensor::random_uniform({1, 4, 4, 4}, rng, -1.0, 1.0);
    const Tensor text = Tensor::random_uniform({4}, rng);

    const auto f = [&](const Tensor& x) {
        const Tensor y = cond_mod(x, c, text, p);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += y[i];
        return acc;
    };
    const auto g = [&](const Tensor& x) { return cond_mod_grad_x(x, c, p); };
    CHECK(grad_check(f, g, x0, 1e-5) <= 1e-4);
}

TEST_CASE("toy denoiser is shape-preserving, seeded, and time-sensitive") {
    const std::array<std::size_t, kNumInjectScales> widths = {8, 12, 16, 20};
    const ToyUNet net(4, widths, 16, 99);
    CHECK(net.latent_channels() == 4);
    CHECK(net.text_dim() == 16);

    Rng rng(mix_seed(fnv1a64("toy-unet")));
    const Tensor z = Tensor::random_uniform({1, 4, 64, 64}, rng, -1.0, 1.0);
    const Tensor e1 = net.forward_unconditioned(z, 1);
    REQUIRE(e1.same_shape(z));
    CHECK(bitwise_equal(net.forward_unconditioned(z, 1), e1));  // repeatable
    CHECK_FALSE(bitwise_equal(net.forward_unconditioned(z, 40), e1));

    const ToyUNet same(4, widths, 16, 99);
    CHECK(bitwise_equal(same.forward_unconditioned(z, 1), e1));
    const ToyUNet other(4, widths, 16, 100);
    CHECK_FALSE(bitwise_equal(other.forward_unconditioned(z, 1), e1));
}

TEST_CASE("zeroed conditions reproduce the unconditioned denoiser exactly") {
    const std::array<std::size_t, kNumInjectScales> widths = {8, 12, 16, 20};
    const ToyUNet net(4, widths, 16, 7);
    Rng rng(mix_seed(fnv1a64("zero-cond")));
    Rng enc_rng(mix_seed(fnv1a64("zero-cond-enc")));
    const ScaleEncoderParams enc = make_scale_encoder(2, 8, widths, enc_rng);
    std::array<CondModParams, kNumInjectScales> mods;
    for (std::size_t i = 0; i < kNumInjectScales; ++i)
        mods[i] = make_cond_mod(widths[i], ToyUNet::kNormGroups, enc_rng);
    const cond::ConditionSet set = zero_condition_set(16);

    const Tensor z = Tensor::random_uniform({1, 4, 64, 64}, rng, -1.0, 1.0);
    const Tensor conditioned = injection_forward(z, 25, set, net, enc, mods);
    const Tensor plain = net.forward_unconditioned(z, 25);
    CHECK(bitwise_equal(conditioned, plain));

    // Perturbing one zero-conv weight breaks the equivalence: the injected
    // features now reach the modulation path.
    ScaleEncoderParams poked = enc;
    poked.embedTaps[0].zero.weights[0] = 0.25;
    cond::ConditionSet lit = set;
    lit.edgeMap = GrayImage(64, 64, 255);
    const Tensor nudged = injection_forward(z, 25, lit, net, poked, mods);
    CHECK_FALSE(bitwise_equal(nudged, plain));
}

TEST_CASE("condition_input stacks scaled edge and depth planes") {
    cond::ConditionSet set;
    set.edgeMap = GrayImage(4, 3, 0);
    set.edgeMap.at(1, 2) = 255;
    set.depthMap = Tensor::full({1, 1, 3, 4}, 0.75);
    const Tensor in = condition_input(set);
    REQUIRE(in.dim(1) == 2);
    CHECK(in.at4(0, 0, 2, 1) == 1.0);
    CHECK(in.at4(0, 0, 0, 0) == 0.0);
    CHECK(in.at4(0, 1, 1, 1) == 0.75);

    set.depthMap = Tensor::zeros({1, 1, 4, 4});  // mismatched height
    CHECK_THROWS_AS(condition_input(set), DimensionError);
}
