#include "unipcb/condgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include "unipcb/rng.hpp"

namespace unipcb {

std::string_view defect_class_name(DefectClass c) {
    switch (c) {
        case DefectClass::Short: return "short";
        case DefectClass::Spur: return "spur";
        case DefectClass::SpuriousCopper: return "spurious copper";
        case DefectClass::Open: return "open";
        case DefectClass::MouseBite: return "mouse bite";
        case DefectClass::HoleBreakout: return "hole breakout";
    }
    throw ValidationError("unknown defect class id");
}

DefectClass defect_class_from_name(std::string_view name) {
    std::string norm(name);
    std::replace(norm.begin(), norm.end(), '_', ' ');
    for (std::size_t i = 0; i < kNumDefectClasses; ++i) {
        const auto c = static_cast<DefectClass>(i);
        if (norm == defect_class_name(c)) return c;
    }
    throw ValidationError("unknown defect class name: '" + std::string(name) + "'");
}

} // namespace unipcb

namespace unipcb::cond {

// ---- edge branch ----

void EdgeConfig::validate() const {
    if (!(lowFactor > 0.0) || !(lowFactor < highFactor)) {
        throw ValidationError("EdgeConfig: need 0 < lowFactor < highFactor");
    }
    if (!(gaussianSigma > 0.0)) throw ValidationError("EdgeConfig: sigma must be positive");
}

int otsu_threshold(const GrayImage& img) {
    img.validate();
    if (img.empty()) throw ValidationError("otsu_threshold: empty image");

    std::array<std::size_t, 256> hist{};
    for (std::uint8_t v : img.data) ++hist[v];
    const double total = static_cast<double>(img.size());

    double sum_all = 0.0;
    for (int v = 0; v < 256; ++v) sum_all += static_cast<double>(v) * static_cast<double>(hist[v]);

    // Class 0 holds intensities <= t. Running sums make the scan O(256).
    int best_t = 0;
    double best_var = -1.0;
    double w0 = 0.0, sum0 = 0.0;
    for (int t = 0; t < 256; ++t) {
        w0 += static_cast<double>(hist[t]);
        sum0 += static_cast<double>(t) * static_cast<double>(hist[t]);
        const double w1 = total - w0;
        double var = 0.0;
        if (w0 > 0.0 && w1 > 0.0) {
            const double mu0 = sum0 / w0;
            const double mu1 = (sum_all - sum0) / w1;
            var = (w0 / total) * (w1 / total) * (mu0 - mu1) * (mu0 - mu1);
        }
        if (var > best_var) {
            best_var = var;
            best_t = t;
        }
    }
    if (best_var <= 0.0) {
        // Degenerate histogram (single intensity): return that intensity.
        int v = 0;
        while (hist[v] == 0) ++v;
        return v;
    }
    return best_t;
}

std::pair<double, double> canny_thresholds(int otsu_value, const EdgeConfig& cfg) {
    cfg.validate();
    const double low = std::clamp(cfg.lowFactor * static_cast<double>(otsu_value), 0.0, 255.0);
    const double high = std::clamp(cfg.highFactor * static_cast<double>(otsu_value), 0.0, 255.0);
    return {low, high};
}

namespace {

struct GradientField {
    std::vector<double> mag;
    std::vector<int> bin;  // 0: horizontal gradient, 1: 45 deg, 2: vertical, 3: 135 deg
};

GradientField sobel_field(const std::vector<double>& img, std::size_t w, std::size_t h) {
    GradientField f;
    f.mag.assign(w * h, 0.0);
    f.bin.assign(w * h, 0);
    const auto sample = [&](std::ptrdiff_t x, std::ptrdiff_t y) {
        x = std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(w) - 1);
        y = std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(h) - 1);
        return img[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
    };
    for (std::ptrdiff_t y = 0; y < static_cast<std::ptrdiff_t>(h); ++y) {
        for (std::ptrdiff_t x = 0; x < static_cast<std::ptrdiff_t>(w); ++x) {
            const double gx = -sample(x - 1, y - 1) + sample(x + 1, y - 1)
                              - 2.0 * sample(x - 1, y) + 2.0 * sample(x + 1, y)
                              - sample(x - 1, y + 1) + sample(x + 1, y + 1);
            const double gy = -sample(x - 1, y - 1) - 2.0 * sample(x, y - 1) - sample(x + 1, y - 1)
                              + sample(x - 1, y + 1) + 2.0 * sample(x, y + 1) + sample(x + 1, y + 1);
            const std::size_t i = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
            f.mag[i] = std::hypot(gx, gy);

            double deg = std::atan2(gy, gx) * 180.0 / 3.14159265358979323846;
            if (deg < 0.0) deg += 180.0;
            if (deg >= 180.0) deg -= 180.0;
            // 45-degree bins; boundary angles fall into the lower bin.
            int b;
            if (deg <= 22.5) b = 0;
            else if (deg <= 67.5) b = 1;
            else if (deg <= 112.5) b = 2;
            else if (deg <= 157.5) b = 3;
            else b = 0;
            f.bin[i] = b;
        }
    }
    return f;
}

} // namespace

GrayImage adaptive_canny(const GrayImage& img, const EdgeConfig& cfg) {
    cfg.validate();
    img.validate();
    if (img.empty()) throw ValidationError("adaptive_canny: empty image");
    const std::size_t w = img.width, h = img.height;

    const auto [low, high] = canny_thresholds(otsu_threshold(img), cfg);
    const std::vector<double> smooth = gaussian_blur_f(img, cfg.gaussianSigma, cfg.gaussianRadius);
    const GradientField f = sobel_field(smooth, w, h);

    // Non-maximum suppression along the quantized gradient direction. The
    // comparison is strict against the first neighbor and non-strict against
    // the second, so a two-pixel magnitude plateau keeps exactly one pixel.
    const auto mag_at = [&](std::ptrdiff_t x, std::ptrdiff_t y) -> double {
        if (x < 0 || y < 0 || x >= static_cast<std::ptrdiff_t>(w) ||
            y >= static_cast<std::ptrdiff_t>(h)) {
            return 0.0;
        }
        return f.mag[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
    };
    static constexpr std::ptrdiff_t kOffsets[4][2][2] = {
        {{-1, 0}, {1, 0}},    // horizontal gradient: left / right
        {{-1, -1}, {1, 1}},   // 45 deg
        {{0, -1}, {0, 1}},    // vertical gradient: up / down
        {{1, -1}, {-1, 1}},   // 135 deg
    };
    std::vector<double> nms(w * h, 0.0);
    for (std::ptrdiff_t y = 0; y < static_cast<std::ptrdiff_t>(h); ++y) {
        for (std::ptrdiff_t x = 0; x < static_cast<std::ptrdiff_t>(w); ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
            const double m = f.mag[i];
            const auto& off = kOffsets[f.bin[i]];
            const double a = mag_at(x + off[0][0], y + off[0][1]);
            const double b = mag_at(x + off[1][0], y + off[1][1]);
            if (m > a && m >= b) nms[i] = m;
        }
    }

    // Hysteresis: strong pixels seed an 8-connected flood through weak ones.
    GrayImage out(w, h, 0);
    std::vector<std::uint8_t> weak(w * h, 0);
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < nms.size(); ++i) {
        if (nms[i] > high) {
            out.data[i] = 255;
            queue.push_back(i);
        } else if (nms[i] > low) {
            weak[i] = 1;
        }
    }
    while (!queue.empty()) {
        const std::size_t i = queue.front();
        queue.pop_front();
        const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(i % w);
        const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i / w);
        for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
            for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
                const std::ptrdiff_t nx = x + dx, ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= static_cast<std::ptrdiff_t>(w) ||
                    ny >= static_cast<std::ptrdiff_t>(h)) {
                    continue;
                }
                const std::size_t j = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
                if (weak[j] && out.data[j] == 0) {
                    out.data[j] = 255;
                    queue.push_back(j);
                }
            }
        }
    }
    return out;
}

// ---- depth branch ----

Tensor BlurInverseDepth::depth(const GrayImage& img) const {
    const std::vector<double> blurred = gaussian_blur_f(img, sigma_);
    std::vector<double> d(blurred.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = std::clamp(1.0 - blurred[i] / 255.0, 0.0, 1.0);
    }
    return Tensor::from_data({1, 1, img.height, img.width}, std::move(d));
}

// ---- text branch ----

std::string_view scale_class_name(ScaleClass s) {
    switch (s) {
        case ScaleClass::Small: return "small";
        case ScaleClass::Medium: return "medium";
        case ScaleClass::Large: return "large";
    }
    throw ValidationError("unknown scale class id");
}

std::string_view grid_cell_name(GridCell c) {
    switch (c) {
        case GridCell::TopLeft: return "top-left";
        case GridCell::Top: return "top";
        case GridCell::TopRight: return "top-right";
        case GridCell::Left: return "left";
        case GridCell::Center: return "center";
        case GridCell::Right: return "right";
        case GridCell::BottomLeft: return "bottom-left";
        case GridCell::Bottom: return "bottom";
        case GridCell::BottomRight: return "bottom-right";
    }
    throw ValidationError("unknown grid cell id");
}

ScaleClass classify_scale(const Box& box, const ScaleThresholds& t) {
    box.validate();
    if (!(t.t1 < t.t2)) throw ValidationError("ScaleThresholds: need t1 < t2");
    const double area = box.area();
    if (area < t.t1) return ScaleClass::Small;
    if (area <= t.t2) return ScaleClass::Medium;
    return ScaleClass::Large;
}

GridCell locate_cell(double cx, double cy) {
    if (!(cx >= 0.0 && cx <= 1.0 && cy >= 0.0 && cy <= 1.0)) {
        throw ValidationError("locate_cell: coordinates must lie in [0,1]");
    }
    const int col = std::min(static_cast<int>(std::floor(3.0 * cx)), 2);
    const int row = std::min(static_cast<int>(std::floor(3.0 * cy)), 2);
    return static_cast<GridCell>(row * 3 + col);
}

TemplateLibrary default_templates() {
    return {
        {"prefix", "a PCB image with "},
        {"joiner", ", "},
        {"instance", "{quantity} {scale} {category} defect at the {location}"},
        {"region", "{quantity} {category} defect"},
        {"region_plural", "{quantity} {category} defects"},
        {"region_suffix", " {distribution} across the board"},
        {"scattered", "scattered"},
        {"clustered", "locally clustered"},
    };
}

static const std::array<const char*, 8> kRequiredTemplateKeys = {
    "prefix", "joiner", "instance", "region", "region_plural",
    "region_suffix", "scattered", "clustered",
};

TemplateLibrary parse_templates(const std::string& text) {
    TemplateLibrary lib;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ValidationError("template line " + std::to_string(lineno) +
                                  ": expected name=template");
        }
        lib[line.substr(0, eq)] = line.substr(eq + 1);
    }
    for (const char* key : kRequiredTemplateKeys) {
        if (!lib.count(key)) {
            throw ValidationError(std::string("template library missing key '") + key + "'");
        }
    }
    return lib;
}

TemplateLibrary load_templates(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open template library: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_templates(buf.str());
}

static std::string substitute(std::string tpl, std::string_view key, std::string_view value) {
    const std::string needle = "{" + std::string(key) + "}";
    std::size_t pos = 0;
    while ((pos = tpl.find(needle, pos)) != std::string::npos) {
        tpl.replace(pos, needle.size(), value);
        pos += value.size();
    }
    return tpl;
}

static const std::string& template_at(const TemplateLibrary& lib, const std::string& key) {
    const auto it = lib.find(key);
    if (it == lib.end()) {
        throw ValidationError("template library missing key '" + key + "'");
    }
    return it->second;
}

std::string build_prompt(const std::vector<DefectInstance>& instances,
                         std::size_t image_w, std::size_t image_h,
                         const PromptConfig& cfg, const TemplateLibrary& templates) {
    if (instances.empty()) throw ValidationError("build_prompt: no defect instances");
    if (image_w == 0 || image_h == 0) throw ValidationError("build_prompt: empty image dims");

    std::vector<PromptSpec> specs;
    specs.reserve(instances.size());
    std::set<GridCell> occupied;
    const PromptMode mode = instances.size() > cfg.countThreshold ? PromptMode::RegionLevel
                                                                  : PromptMode::InstanceLevel;
    for (const DefectInstance& inst : instances) {
        inst.box.validate();
        if (inst.box.x < 0.0 || inst.box.y < 0.0 ||
            inst.box.x + inst.box.w > static_cast<double>(image_w) ||
            inst.box.y + inst.box.h > static_cast<double>(image_h)) {
            throw ValidationError("build_prompt: box outside image bounds");
        }
        PromptSpec s;
        s.category = inst.classId;
        s.scale = classify_scale(inst.box, cfg.scaleThresholds);
        s.location = locate_cell(inst.box.cx() / static_cast<double>(image_w),
                                 inst.box.cy() / static_cast<double>(image_h));
        s.quantity = 1;
        s.mode = mode;
        specs.push_back(s);
        occupied.insert(s.location);
    }

    std::string out = template_at(templates, "prefix");
    const std::string& joiner = template_at(templates, "joiner");

    if (mode == PromptMode::InstanceLevel) {
        for (std::size_t i = 0; i < specs.size(); ++i) {
            if (i) out += joiner;
            std::string clause = template_at(templates, "instance");
            clause = substitute(clause, "quantity", std::to_string(specs[i].quantity));
            clause = substitute(clause, "scale", scale_class_name(specs[i].scale));
            clause = substitute(clause, "category", defect_class_name(specs[i].category));
            clause = substitute(clause, "location", grid_cell_name(specs[i].location));
            out += clause;
        }
        return out;
    }

    std::array<std::size_t, kNumDefectClasses> counts{};
    for (const PromptSpec& s : specs) ++counts[static_cast<std::size_t>(s.category)];

    bool first = true;
    for (std::size_t c = 0; c < kNumDefectClasses; ++c) {
        if (counts[c] == 0) continue;
        if (!first) out += joiner;
        first = false;
        std::string clause =
            template_at(templates, counts[c] > 1 ? "region_plural" : "region");
        clause = substitute(clause, "quantity", std::to_string(counts[c]));
        clause = substitute(clause, "category", defect_class_name(static_cast<DefectClass>(c)));
        out += clause;
    }
    const std::string& word = template_at(
        templates, occupied.size() >= cfg.spreadThreshold ? "scattered" : "clustered");
    out += substitute(template_at(templates, "region_suffix"), "distribution", word);
    return out;
}

Tensor text_embed_stub(const std::string& prompt, std::size_t dim, std::uint64_t seed) {
    if (dim == 0) throw ValidationError("text_embed_stub: dim must be >= 1");
    const std::uint64_t s = mix_seed(fnv1a64(prompt) ^ mix_seed(seed ^ static_cast<std::uint64_t>(dim)));
    Rng rng(s);
    std::vector<double> v(dim);
    double norm_sq = 0.0;
    for (double& x : v) {
        x = rng.normal();
        norm_sq += x * x;
    }
    if (norm_sq < 1e-24) {
        v[0] = 1.0;
        norm_sq = 1.0;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : v) x *= inv;
    return Tensor::from_data({dim}, std::move(v));
}

ConditionSet generate_conditions(const GrayImage& img,
                                 const std::vector<DefectInstance>& instances,
                                 const CondGenConfig& cfg,
                                 const TemplateLibrary& templates,
                                 const DepthProvider& depth) {
    ConditionSet set;
    set.edgeMap = adaptive_canny(img, cfg.edge);
    set.depthMap = depth.depth(img);
    set.prompt = build_prompt(instances, img.width, img.height, cfg.prompt, templates);
    set.textEmbedding = text_embed_stub(set.prompt, cfg.embedDim, cfg.embedSeed);
    return set;
}

} // namespace unipcb::cond
