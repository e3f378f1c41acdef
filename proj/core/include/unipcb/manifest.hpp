#pragma once

#include <array>
#include <string>
#include <vector>

#include "unipcb/defect.hpp"

namespace unipcb::data {

enum class Split { Train, Val };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct ManifestEntry {
    std::string imagePath;
    Split split = Split::Train;
    std::vector<DefectInstance> instances;
};

/// Dataset index: one entry per image plus the intended train fraction.
/// Image paths must be unique; boxes must be well formed.
struct DatasetManifest {
    double trainRatio = 0.8;
    std::vector<ManifestEntry> entries;

    void validate() const;
};

/// Throws unless the actual train/val counts match the recorded ratio
/// within rounding. Checked separately from validate() because augmented
/// supersets intentionally skew toward train.
void check_split_ratio(const DatasetManifest& m);

struct DatasetStats {
    std::size_t totalImages = 0;
    std::size_t trainImages = 0;
    std::size_t valImages = 0;
    std::size_t totalDefects = 0;
    // Images are counted once per class present; defects once per instance.
    std::array<std::size_t, kNumDefectClasses> imagesPerClass{};
    std::array<std::size_t, kNumDefectClasses> defectsPerClass{};
};

DatasetStats dataset_stats(const DatasetManifest& m);

/// Appends externally produced entries (e.g. synthetic boards with verified
/// annotations) to a base manifest. The base keeps its ratio and order;
/// duplicate image paths across the two inputs are rejected.
DatasetManifest merge_manifests(const DatasetManifest& base, const DatasetManifest& extra);

/// JSON-lines file: a header record carrying train_ratio, then one record
/// per image. Round trip preserves every field exactly.
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const DatasetManifest& m);

} // namespace unipcb::data
