#include <doctest.h>

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "unipcb/condgen.hpp"
#include "unipcb/defect.hpp"
#include "unipcb/errors.hpp"
#include "unipcb/image.hpp"
#include "unipcb/rng.hpp"

using namespace unipcb;
using namespace unipcb::cond;
using testutil::data_file;

namespace {

// Independent Otsu: recompute both class statistics from the histogram for
// every candidate threshold instead of carrying running sums. Class 0 holds
// intensities <= t; ties go to the smallest t; a single-intensity histogram
// falls back to that intensity.
int otsu_by_exhaustion(const GrayImage& img) {
    std::array<std::size_t, 256> hist{};
    for (std::uint8_t v : img.data) ++hist[v];
    const double total = static_cast<double>(img.size());
    int best_t = 0;
    double best_var = -1.0;
    for (int t = 0; t < 256; ++t) {
        double w0 = 0.0, sum0 = 0.0;
        for (int v = 0; v <= t; ++v) {
            w0 += static_cast<double>(hist[v]);
            sum0 += static_cast<double>(v) * static_cast<double>(hist[v]);
        }
        double w1 = 0.0, sum1 = 0.0;
        for (int v = t + 1; v < 256; ++v) {
            w1 += static_cast<double>(hist[v]);
            sum1 += static_cast<double>(v) * static_cast<double>(hist[v]);
        }
        double var = 0.0;
        if (w0 > 0.0 && w1 > 0.0) {
            const double mu0 = sum0 / w0, mu1 = sum1 / w1;
            var = (w0 / total) * (w1 / total) * (mu0 - mu1) * (mu0 - mu1);
        }
        if (var > best_var) {
            best_var = var;
            best_t = t;
        }
    }
    if (best_var <= 0.0) {
        int v = 0;
        while (hist[v] == 0) ++v;
        return v;
    }
    return best_t;
}

GrayImage vertical_step(std::size_t w, std::size_t h, std::uint8_t left, std::uint8_t right) {
    GrayImage img(w, h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) img.at(x, y) = x < w / 2 ? left : right;
    return img;
}

DefectInstance make_inst(DefectClass c, double x, double y, double w, double h) {
    DefectInstance d;
    d.classId = c;
    d.box = Box{x, y, w, h};
    return d;
}

} // namespace

TEST_CASE("otsu_threshold matches per-threshold recomputation") {
    // The histogram statistics are integer-valued, so the running-sum scan
    // and the exhaustive recomputation agree exactly, not just within eps.
    Rng rng(mix_seed(fnv1a64("otsu-oracle")));
    for (int trial = 0; trial < 100; ++trial) {
        GrayImage img(16, 16);
        // Mix of distributions so thresholds land all over the range.
        const int mode = trial % 3;
        for (auto& p : img.data) {
            if (mode == 0) {
                p = static_cast<std::uint8_t>(rng.uniform_int(256));
            } else if (mode == 1) {
                const bool hi = rng.uniform() < 0.4;
                p = static_cast<std::uint8_t>((hi ? 180 : 50) + rng.uniform_int(30));
            } else {
                p = static_cast<std::uint8_t>(rng.uniform_int(8) * 36);
            }
        }
        CHECK(otsu_threshold(img) == otsu_by_exhaustion(img));
    }

    const GrayImage flat(8, 8, 77);
    CHECK(otsu_threshold(flat) == 77);

    GrayImage two(4, 1, 10);
    two.at(2, 0) = 200;
    two.at(3, 0) = 200;
    CHECK(otsu_threshold(two) == otsu_by_exhaustion(two));
    CHECK(otsu_threshold(two) == 10);  // tie range [10,199] resolves low
}

TEST_CASE("canny_thresholds scales and clamps the hysteresis pair") {
    EdgeConfig cfg;
    const auto [lo, hi] = canny_thresholds(100, cfg);
    CHECK(lo == 50.0);
    CHECK(hi == 150.0);
    const auto [lo2, hi2] = canny_thresholds(200, cfg);
    CHECK(hi2 == 255.0);  // 1.5 * 200 clamps

    EdgeConfig bad;
    bad.lowFactor = 2.0;
    bad.highFactor = 1.0;
    CHECK_THROWS_AS(canny_thresholds(100, bad), ValidationError);
}

TEST_CASE("adaptive_canny reduces a clean step to one pixel-wide line") {
    const GrayImage img = vertical_step(16, 16, 40, 200);
    const GrayImage edges = adaptive_canny(img, EdgeConfig{});
    REQUIRE(edges.width == 16);
    REQUIRE(edges.height == 16);
    for (std::uint8_t v : edges.data) CHECK((v == 0 || v == 255));

    // Every row carries exactly one edge pixel, all in the same column near
    // the step; non-maximum suppression must collapse the blurred ramp.
    int col = -1;
    for (std::size_t y = 0; y < 16; ++y) {
        int count = 0, where = -1;
        for (std::size_t x = 0; x < 16; ++x)
            if (edges.at(x, y) == 255) {
                ++count;
                where = static_cast<int>(x);
            }
        CHECK(count == 1);
        if (col < 0) col = where;
        CHECK(where == col);
    }
    CHECK(col >= 6);
    CHECK(col <= 9);
}

TEST_CASE("hysteresis drops weak-only responses and keeps connected ones") {
    // Contrast 40 around mid-gray: the gradient tops out between the two
    // default thresholds, so with no strong seed anywhere the output is empty.
    const GrayImage weak = vertical_step(16, 16, 100, 140);
    const GrayImage none = adaptive_canny(weak, EdgeConfig{});
    for (std::uint8_t v : none.data) CHECK(v == 0);

    // Same local contrast at the bottom of a ramped step, now connected along
    // the column to high-contrast rows above: the weak rows get promoted.
    GrayImage ramp(16, 16);
    for (std::size_t y = 0; y < 16; ++y) {
        const double c = 200.0 - static_cast<double>(y) * (140.0 / 15.0);
        const auto left = static_cast<std::uint8_t>(std::lround(128.0 - c / 2.0));
        const auto right = static_cast<std::uint8_t>(std::lround(128.0 + c / 2.0));
        for (std::size_t x = 0; x < 16; ++x) ramp.at(x, y) = x < 8 ? left : right;
    }
    // Pin absolute thresholds (100, 300) regardless of each image's Otsu
    // value so the weak/strong split is the one constructed above.
    const int o = otsu_threshold(ramp);
    EdgeConfig pinned;
    pinned.lowFactor = 100.0 / o;
    pinned.highFactor = 300.0 / o;
    const GrayImage traced = adaptive_canny(ramp, pinned);
    bool bottom_fired = false;
    for (std::size_t x = 0; x < 16; ++x)
        if (traced.at(x, 15) == 255) bottom_fired = true;
    CHECK(bottom_fired);

    const int ow = otsu_threshold(weak);
    EdgeConfig pinned_weak;
    pinned_weak.lowFactor = 100.0 / ow;
    pinned_weak.highFactor = 300.0 / ow;
    const GrayImage still_none = adaptive_canny(weak, pinned_weak);
    for (std::uint8_t v : still_none.data) CHECK(v == 0);
}

TEST_CASE("blur-inverse depth is bounded, shaped, and intensity-inverted") {
    GrayImage img(8, 6, 0);
    for (std::size_t x = 0; x < 8; ++x)
        for (std::size_t y = 0; y < 6; ++y) img.at(x, y) = static_cast<std::uint8_t>(x * 30);
    const BlurInverseDepth provider(1.0);
    const Tensor d = provider.depth(img);
    REQUIRE(d.rank() == 4);
    CHECK(d.dim(0) == 1);
    CHECK(d.dim(1) == 1);
    CHECK(d.dim(2) == 6);
    CHECK(d.dim(3) == 8);
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(d[i] >= 0.0);
        CHECK(d[i] <= 1.0);
    }
    // Bright columns read nearer (smaller depth) than dark ones.
    CHECK(d.at4(0, 0, 3, 7) < d.at4(0, 0, 3, 0));

    const Tensor flat = provider.depth(GrayImage(4, 4, 255));
    for (std::size_t i = 0; i < flat.size(); ++i) CHECK(flat[i] == 0.0);
}

TEST_CASE("classify_scale splits on the two area thresholds") {
    const ScaleThresholds t;
    CHECK(classify_scale(Box{0, 0, 30, 30}, t) == ScaleClass::Small);    // 900
    CHECK(classify_scale(Box{0, 0, 32, 32}, t) == ScaleClass::Medium);   // exactly t1
    CHECK(classify_scale(Box{0, 0, 64, 64}, t) == ScaleClass::Medium);
    CHECK(classify_scale(Box{0, 0, 96, 96}, t) == ScaleClass::Medium);   // exactly t2
    CHECK(classify_scale(Box{0, 0, 97, 97}, t) == ScaleClass::Large);
    CHECK_THROWS_AS(classify_scale(Box{0, 0, 0, 5}, t), ValidationError);
    CHECK_THROWS_AS(classify_scale(Box{0, 0, 5, 5}, ScaleThresholds{9.0, 9.0}), ValidationError);
}

TEST_CASE("locate_cell covers the grid and clamps the far boundary") {
    const double lo = 0.1, mid = 0.5, hi = 0.9;
    CHECK(locate_cell(lo, lo) == GridCell::TopLeft);
    CHECK(locate_cell(mid, lo) == GridCell::Top);
    CHECK(locate_cell(hi, lo) == GridCell::TopRight);
    CHECK(locate_cell(lo, mid) == GridCell::Left);
    CHECK(locate_cell(mid, mid) == GridCell::Center);
    CHECK(locate_cell(hi, mid) == GridCell::Right);
    CHECK(locate_cell(lo, hi) == GridCell::BottomLeft);
    CHECK(locate_cell(mid, hi) == GridCell::Bottom);
    CHECK(locate_cell(hi, hi) == GridCell::BottomRight);

    CHECK(locate_cell(0.0, 0.0) == GridCell::TopLeft);
    CHECK(locate_cell(1.0, 1.0) == GridCell::BottomRight);  // upper edge clamps
    CHECK(locate_cell(0.5, 1.0) == GridCell::Bottom);
    CHECK_THROWS_AS(locate_cell(-0.01, 0.5), ValidationError);
    CHECK_THROWS_AS(locate_cell(0.5, 1.01), ValidationError);
}

TEST_CASE("build_prompt renders instance clauses in input order") {
    const TemplateLibrary lib = default_templates();
    const PromptConfig cfg;

    const std::vector<DefectInstance> one = {make_inst(DefectClass::Short, 24, 24, 16, 16)};
    CHECK(build_prompt(one, 64, 64, cfg, lib) ==
          "a PCB image with 1 small short defect at the center");

    const std::vector<DefectInstance> two = {
        make_inst(DefectClass::Open, 400, 20, 50, 30),       // large-image top-right
        make_inst(DefectClass::MouseBite, 10, 400, 40, 40),  // bottom-left
    };
    CHECK(build_prompt(two, 512, 512, cfg, lib) ==
          "a PCB image with 1 medium open defect at the top-right, "
          "1 medium mouse bite defect at the bottom-left");

    CHECK_THROWS_AS(build_prompt({}, 64, 64, cfg, lib), ValidationError);
    const std::vector<DefectInstance> outside = {make_inst(DefectClass::Short, 60, 60, 10, 10)};
    CHECK_THROWS_AS(build_prompt(outside, 64, 64, cfg, lib), ValidationError);
}

TEST_CASE("build_prompt aggregates above the count threshold") {
    const TemplateLibrary lib = default_templates();
    const PromptConfig cfg;  // countThreshold 6, spreadThreshold 5

    // Seven defects in seven distinct grid cells: region level, scattered.
    std::vector<DefectInstance> spread;
    const double centers[7][2] = {{0.15, 0.15}, {0.5, 0.15}, {0.85, 0.15}, {0.15, 0.5},
                                  {0.85, 0.5},  {0.15, 0.85}, {0.5, 0.85}};
    for (const auto& c : centers)
        spread.push_back(make_inst(DefectClass::Short, c[0] * 600 - 5, c[1] * 600 - 5, 10, 10));
    CHECK(build_prompt(spread, 600, 600, cfg, lib) ==
          "a PCB image with 7 short defects scattered across the board");

    // Same count stacked inside one cell: locally clustered.
    std::vector<DefectInstance> stacked;
    for (int i = 0; i < 7; ++i)
        stacked.push_back(make_inst(DefectClass::Spur, 290 + i, 292, 10, 10));
    CHECK(build_prompt(stacked, 600, 600, cfg, lib) ==
          "a PCB image with 7 spur defects locally clustered across the board");

    // Mixed categories aggregate per class (category order), singulars keep
    // the singular template.
    std::vector<DefectInstance> mixed;
    for (int i = 0; i < 6; ++i)
        mixed.push_back(make_inst(DefectClass::Open, 280 + 3 * i, 300, 12, 12));
    mixed.push_back(make_inst(DefectClass::Short, 300, 320, 12, 12));
    CHECK(build_prompt(mixed, 600, 600, cfg, lib) ==
          "a PCB image with 1 short defect, 6 open defects locally clustered across the board");

    // Exactly at the threshold stays instance level.
    std::vector<DefectInstance> at_thresh(stacked.begin(), stacked.begin() + 6);
    const std::string p = build_prompt(at_thresh, 600, 600, cfg, lib);
    CHECK(p.find("at the center") != std::string::npos);
}

TEST_CASE("template parsing keeps raw values and requires every key") {
    const TemplateLibrary alt = load_templates(data_file("templates_alt.txt"));
    for (const auto& [k, v] : default_templates()) CHECK(alt.count(k) == 1);

    // Values are taken verbatim after '=', including trailing spaces.
    const TemplateLibrary spaced = parse_templates(
        "prefix=board shows \njoiner=; \ninstance={quantity} {category}\n"
        "region={quantity} {category}\nregion_plural={quantity} {category}s\n"
        "region_suffix= ({distribution})\nscattered=spread out\nclustered=bunched\n");
    CHECK(spaced.at("prefix") == "board shows ");
    const std::vector<DefectInstance> one = {make_inst(DefectClass::Open, 1, 1, 4, 4)};
    CHECK(build_prompt(one, 64, 64, PromptConfig{}, spaced) == "board shows 1 open");

    CHECK_THROWS_AS(parse_templates("prefix=a\n"), ValidationError);         // missing keys
    CHECK_THROWS_AS(parse_templates("no equals sign here\n"), ValidationError);
    CHECK_THROWS_AS(load_templates("/nonexistent/templates.txt"), IoError);

    // Comments and blank lines are skipped.
    std::string text = "# comment\n\n";
    for (const auto& [k, v] : default_templates()) text += k + "=" + v + "\n";
    const TemplateLibrary parsed = parse_templates(text);
    CHECK(parsed == default_templates());
}

TEST_CASE("alternate template wording changes only the rendering") {
    const TemplateLibrary alt = load_templates(data_file("templates_alt.txt"));
    const std::vector<DefectInstance> one = {make_inst(DefectClass::Short, 24, 24, 16, 16)};
    const std::string with_alt = build_prompt(one, 64, 64, PromptConfig{}, alt);
    const std::string with_default = build_prompt(one, 64, 64, PromptConfig{}, default_templates());
    CHECK(with_alt != with_default);
    CHECK(with_alt.find("short") != std::string::npos);
}

TEST_CASE("text_embed_stub is unit norm, deterministic, and input-sensitive") {
    const Tensor a = text_embed_stub("one short defect", 64, 0);
    const Tensor b = text_embed_stub("one short defect", 64, 0);
    REQUIRE(a.rank() == 1);
    REQUIRE(a.dim(0) == 64);
    CHECK(bitwise_equal(a, b));

    double norm_sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) norm_sq += a[i] * a[i];
    CHECK(std::fabs(std::sqrt(norm_sq) - 1.0) <= 1e-9);

    CHECK_FALSE(bitwise_equal(a, text_embed_stub("one open defect", 64, 0)));
    CHECK_FALSE(bitwise_equal(a, text_embed_stub("one short defect", 64, 1)));
    CHECK(text_embed_stub("x", 1, 0).dim(0) == 1);
    CHECK_THROWS_AS(text_embed_stub("x", 0, 0), ValidationError);
}

TEST_CASE("generate_conditions bundles all three branches deterministically") {
    const GrayImage img = load_pgm(data_file("sample_64.pgm"));
    REQUIRE(img.width == 64);
    REQUIRE(img.height == 64);
    const std::vector<DefectInstance> insts = {make_inst(DefectClass::Short, 24, 24, 16, 16)};
    const CondGenConfig cfg;
    const BlurInverseDepth depth;

    const ConditionSet s1 = generate_conditions(img, insts, cfg, default_templates(), depth);
    CHECK(s1.edgeMap.width == 64);
    CHECK(s1.edgeMap.height == 64);
    std::size_t edge_px = 0;
    for (std::uint8_t v : s1.edgeMap.data) {
        CHECK((v == 0 || v == 255));
        if (v == 255) ++edge_px;
    }
    CHECK(edge_px > 0);  // the traced board has real structure
    CHECK(s1.depthMap.dim(2) == 64);
    CHECK(s1.prompt == "a PCB image with 1 small short defect at the center");
    CHECK(s1.textEmbedding.dim(0) == 64);

    const ConditionSet s2 = generate_conditions(img, insts, cfg, default_templates(), depth);
    CHECK(s2.edgeMap.data == s1.edgeMap.data);
    CHECK(bitwise_equal(s2.depthMap, s1.depthMap));
    CHECK(bitwise_equal(s2.textEmbedding, s1.textEmbedding));
}

TEST_CASE("defect class names round trip") {
    for (std::size_t i = 0; i < kNumDefectClasses; ++i) {
        const auto c = static_cast<DefectClass>(i);
        CHECK(defect_class_from_name(defect_class_name(c)) == c);
    }
    CHECK(defect_class_from_name("mouse_bite") == DefectClass::MouseBite);
    CHECK_THROWS_AS(defect_class_from_name("scratch"), ValidationError);
}
