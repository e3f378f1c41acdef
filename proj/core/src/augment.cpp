#include "unipcb/augment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "unipcb/errors.hpp"
#include "unipcb/rng.hpp"

namespace unipcb::data {

namespace fs = std::filesystem;

const char* augment_kind_name(AugmentKind k) {
    switch (k) {
        case AugmentKind::HFlip: return "hflip";
        case AugmentKind::VFlip: return "vflip";
        case AugmentKind::Rotate90: return "rotate90";
        case AugmentKind::GaussianBlur: return "blur";
    }
    throw ValidationError("unknown augment kind");
}

void AugmentOp::validate() const {
    if (kind == AugmentKind::Rotate90 && (quarterTurns < 1 || quarterTurns > 3))
        throw ValidationError("augment: quarterTurns must be 1, 2 or 3");
    if (kind == AugmentKind::GaussianBlur && !(sigma > 0.0))
        throw ValidationError("augment: blur sigma must be positive");
}

std::string AugmentOp::describe() const {
    switch (kind) {
        case AugmentKind::HFlip: return "hflip";
        case AugmentKind::VFlip: return "vflip";
        case AugmentKind::Rotate90: return "rotate90 k=" + std::to_string(quarterTurns);
        case AugmentKind::GaussianBlur: {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "blur sigma=%.4g", sigma);
            return buf;
        }
    }
    throw ValidationError("unknown augment kind");
}

Box hflip_box(const Box& b, double width) { return {width - b.x - b.w, b.y, b.w, b.h}; }

Box vflip_box(const Box& b, double height) { return {b.x, height - b.y - b.h, b.w, b.h}; }

// One CCW quarter turn maps point (x, y) of a WxH image to (y, W - x) in
// the resulting HxW image, so a box becomes (y, W - x - w, h, w).
Box rotate90_box(const Box& b, double width, double /*height*/) {
    return {b.y, width - b.x - b.w, b.h, b.w};
}

namespace {

GrayImage hflip_image(const GrayImage& img) {
    GrayImage out(img.width, img.height);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            out.data[y * out.width + (img.width - 1 - x)] = img.at(x, y);
    return out;
}

GrayImage vflip_image(const GrayImage& img) {
    GrayImage out(img.width, img.height);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            out.data[(img.height - 1 - y) * out.width + x] = img.at(x, y);
    return out;
}

// Pixel (x, y) -> (y, W - 1 - x): the right edge rotates to the top row.
GrayImage rotate90_image(const GrayImage& img) {
    GrayImage out(img.height, img.width);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            out.data[(img.width - 1 - x) * out.width + y] = img.at(x, y);
    return out;
}

void check_in_bounds(const std::vector<DefectInstance>& instances, const GrayImage& img) {
    const auto w = static_cast<double>(img.width);
    const auto h = static_cast<double>(img.height);
    for (const auto& inst : instances) {
        inst.box.validate();
        if (inst.box.x < 0.0 || inst.box.y < 0.0 || inst.box.x + inst.box.w > w ||
            inst.box.y + inst.box.h > h)
            throw ValidationError("augment: transformed box escapes image bounds");
    }
}

} // namespace

AugmentedSample apply_augment(const GrayImage& image, const std::vector<DefectInstance>& instances,
                              const AugmentOp& op) {
    image.validate();
    op.validate();
    check_in_bounds(instances, image);

    AugmentedSample out{image, instances};
    switch (op.kind) {
        case AugmentKind::HFlip:
            out.image = hflip_image(image);
            for (auto& inst : out.instances)
                inst.box = hflip_box(inst.box, static_cast<double>(image.width));
            break;
        case AugmentKind::VFlip:
            out.image = vflip_image(image);
            for (auto& inst : out.instances)
                inst.box = vflip_box(inst.box, static_cast<double>(image.height));
            break;
        case AugmentKind::Rotate90:
            for (int t = 0; t < op.quarterTurns; ++t) {
                const auto w = static_cast<double>(out.image.width);
                const auto h = static_cast<double>(out.image.height);
                out.image = rotate90_image(out.image);
                for (auto& inst : out.instances) inst.box = rotate90_box(inst.box, w, h);
            }
            break;
        case AugmentKind::GaussianBlur:
            out.image = gaussian_blur(image, op.sigma);
            break;
    }
    check_in_bounds(out.instances, out.image);
    return out;
}

namespace {

AugmentOp draw_op(Rng& rng) {
    AugmentOp op;
    switch (rng.uniform_int(4)) {
        case 0: op.kind = AugmentKind::HFlip; break;
        case 1: op.kind = AugmentKind::VFlip; break;
        case 2:
            op.kind = AugmentKind::Rotate90;
            op.quarterTurns = 1 + static_cast<int>(rng.uniform_int(3));
            break;
        default:
            op.kind = AugmentKind::GaussianBlur;
            op.sigma = rng.uniform(0.5, 1.5);
            break;
    }
    return op;
}

std::string resolve_path(const std::string& root, const std::string& path) {
    const fs::path p(path);
    if (p.is_absolute() || root.empty()) return path;
    return (fs::path(root) / p).string();
}

} // namespace

ExtendResult build_extend1(const DatasetManifest& m,
                           const std::array<std::size_t, kNumDefectClasses>& target_counts,
                           std::uint64_t seed, const std::string& image_root,
                           const std::string& out_dir) {
    m.validate();

    std::array<std::size_t, kNumDefectClasses> current{};
    for (const auto& e : m.entries)
        for (const auto& inst : e.instances) ++current[static_cast<std::size_t>(inst.classId)];
    for (std::size_t c = 0; c < kNumDefectClasses; ++c)
        if (target_counts[c] < current[c])
            throw ValidationError("build_extend1: target for class '" +
                                  std::string(defect_class_name(static_cast<DefectClass>(c))) +
                                  "' below current count " + std::to_string(current[c]));

    // Source pool per class: train-split entries containing that class.
    std::array<std::vector<std::size_t>, kNumDefectClasses> sources;
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        if (m.entries[i].split != Split::Train) continue;
        std::array<bool, kNumDefectClasses> present{};
        for (const auto& inst : m.entries[i].instances)
            present[static_cast<std::size_t>(inst.classId)] = true;
        for (std::size_t c = 0; c < kNumDefectClasses; ++c)
            if (present[c]) sources[c].push_back(i);
    }

    ExtendResult result;
    result.manifest = m;

    if (!out_dir.empty()) fs::create_directories(out_dir);
    Rng rng(mix_seed(seed ^ 0x455854454e4431ull));  // "EXTEND1"
    std::size_t serial = 0;

    for (std::size_t c = 0; c < kNumDefectClasses; ++c) {
        if (target_counts[c] <= current[c]) continue;
        if (sources[c].empty())
            throw ValidationError("build_extend1: no source image for deficient class '" +
                                  std::string(defect_class_name(static_cast<DefectClass>(c))) + "'");
        while (current[c] < target_counts[c]) {
            const auto& src = m.entries[sources[c][rng.uniform_int(sources[c].size())]];
            const AugmentOp op = draw_op(rng);
            const GrayImage img = load_image(resolve_path(image_root, src.imagePath));
            AugmentedSample sample = apply_augment(img, src.instances, op);

            char name[64];
            std::snprintf(name, sizeof(name), "aug_%05zu_%s.png", serial++,
                          augment_kind_name(op.kind));
            const std::string out_path = (fs::path(out_dir) / name).string();
            save_image(out_path, sample.image);

            ManifestEntry entry;
            entry.imagePath = out_path;
            entry.split = Split::Train;
            entry.instances = std::move(sample.instances);
            // The generated image carries every instance of its source, so
            // other classes may overshoot their targets; targets are floors.
            for (const auto& inst : entry.instances)
                ++current[static_cast<std::size_t>(inst.classId)];
            result.manifest.entries.push_back(std::move(entry));
            result.records.push_back({src.imagePath, out_path, op});
        }
    }
    result.manifest.validate();
    return result;
}

} // namespace unipcb::data
