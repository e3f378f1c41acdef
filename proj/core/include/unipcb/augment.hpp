#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "unipcb/defect.hpp"
#include "unipcb/image.hpp"
#include "unipcb/manifest.hpp"

namespace unipcb::data {

enum class AugmentKind { HFlip, VFlip, Rotate90, GaussianBlur };

const char* augment_kind_name(AugmentKind k);

struct AugmentOp {
    AugmentKind kind = AugmentKind::HFlip;
    int quarterTurns = 1;  // Rotate90 only: counter-clockwise turns in {1, 2, 3}
    double sigma = 1.0;    // GaussianBlur only: > 0

    void validate() const;
    std::string describe() const;  // e.g. "rotate90 k=2", "blur sigma=0.83"
};

// Box transforms matching the image transforms below; width/height are the
// dimensions of the image the box lives in before the transform.
Box hflip_box(const Box& b, double width);
Box vflip_box(const Box& b, double height);
Box rotate90_box(const Box& b, double width, double height);  // one CCW turn

struct AugmentedSample {
    GrayImage image;
    std::vector<DefectInstance> instances;
};

/// Applies one op to an image and its boxes. Geometric ops move boxes with
/// the pixels; blur leaves them. Outputs are re-validated in-bounds.
AugmentedSample apply_augment(const GrayImage& image, const std::vector<DefectInstance>& instances,
                              const AugmentOp& op);

struct ExtendRecord {
    std::string sourcePath;
    std::string outputPath;
    AugmentOp op;
};

struct ExtendResult {
    DatasetManifest manifest;  // input entries plus generated train entries
    std::vector<ExtendRecord> records;
};

/// Raises per-class defect counts to at least target_counts by sampling
/// train-split source images containing the deficient class and applying
/// random ops (flips, quarter turns, blur with sigma in [0.5, 1.5]).
/// Deterministic for a fixed seed. Targets below current counts, or a
/// deficit with no source image, raise ValidationError.
ExtendResult build_extend1(const DatasetManifest& m,
                           const std::array<std::size_t, kNumDefectClasses>& target_counts,
                           std::uint64_t seed, const std::string& image_root,
                           const std::string& out_dir);

} // namespace unipcb::data
