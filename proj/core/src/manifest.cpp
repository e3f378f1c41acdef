#include "unipcb/manifest.hpp"

#include <cmath>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "unipcb/errors.hpp"

namespace unipcb::data {

using nlohmann::json;

const char* split_name(Split s) { return s == Split::Train ? "train" : "val"; }

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    throw ValidationError("unknown split '" + name + "'");
}

void DatasetManifest::validate() const {
    if (!(trainRatio > 0.0 && trainRatio < 1.0))
        throw ValidationError("manifest: trainRatio must be in (0, 1)");
    std::unordered_set<std::string> seen;
    for (const auto& e : entries) {
        if (e.imagePath.empty()) throw ValidationError("manifest: empty image path");
        if (!seen.insert(e.imagePath).second)
            throw ValidationError("manifest: duplicate image path " + e.imagePath);
        for (const auto& inst : e.instances) inst.box.validate();
    }
}

void check_split_ratio(const DatasetManifest& m) {
    m.validate();
    if (m.entries.empty()) throw ValidationError("manifest: no entries to check split ratio");
    std::size_t train = 0;
    for (const auto& e : m.entries)
        if (e.split == Split::Train) ++train;
    const double expected = m.trainRatio * static_cast<double>(m.entries.size());
    const auto lo = static_cast<std::size_t>(std::floor(expected));
    const auto hi = static_cast<std::size_t>(std::ceil(expected));
    if (train < lo || train > hi)
        throw ValidationError("manifest: train count " + std::to_string(train) +
                              " outside rounding of ratio " + std::to_string(m.trainRatio) + " over " +
                              std::to_string(m.entries.size()) + " images");
}

DatasetStats dataset_stats(const DatasetManifest& m) {
    m.validate();
    DatasetStats st;
    st.totalImages = m.entries.size();
    for (const auto& e : m.entries) {
        (e.split == Split::Train ? st.trainImages : st.valImages) += 1;
        std::array<bool, kNumDefectClasses> present{};
        for (const auto& inst : e.instances) {
            const auto c = static_cast<std::size_t>(inst.classId);
            ++st.defectsPerClass[c];
            ++st.totalDefects;
            present[c] = true;
        }
        for (std::size_t c = 0; c < kNumDefectClasses; ++c)
            if (present[c]) ++st.imagesPerClass[c];
    }
    return st;
}

DatasetManifest merge_manifests(const DatasetManifest& base, const DatasetManifest& extra) {
    base.validate();
    extra.validate();
    DatasetManifest merged = base;
    merged.entries.insert(merged.entries.end(), extra.entries.begin(), extra.entries.end());
    merged.validate();  // rejects paths shared between the inputs
    return merged;
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_manifest: cannot open " + path);
    DatasetManifest m;
    bool have_header = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw IoError("load_manifest: " + path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        try {
            if (!have_header) {
                m.trainRatio = j.at("train_ratio").get<double>();
                have_header = true;
                continue;
            }
            ManifestEntry entry;
            entry.imagePath = j.at("image").get<std::string>();
            entry.split = split_from_name(j.at("split").get<std::string>());
            for (const auto& ji : j.at("instances")) {
                DefectInstance inst;
                inst.classId = defect_class_from_name(ji.at("class").get<std::string>());
                const auto& bbox = ji.at("bbox");
                if (!bbox.is_array() || bbox.size() != 4)
                    throw ValidationError("bbox must be [x, y, w, h]");
                inst.box = Box{bbox[0].get<double>(), bbox[1].get<double>(), bbox[2].get<double>(),
                               bbox[3].get<double>()};
                entry.instances.push_back(inst);
            }
            m.entries.push_back(std::move(entry));
        } catch (const json::exception& e) {
            throw IoError("load_manifest: " + path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header) throw IoError("load_manifest: missing header record in " + path);
    m.validate();
    return m;
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
    m.validate();
    std::ofstream out(path);
    if (!out) throw IoError("save_manifest: cannot open " + path);
    out << json{{"train_ratio", m.trainRatio}}.dump() << '\n';
    for (const auto& e : m.entries) {
        json instances = json::array();
        for (const auto& inst : e.instances)
            instances.push_back({{"class", defect_class_name(inst.classId)},
                                 {"bbox", {inst.box.x, inst.box.y, inst.box.w, inst.box.h}}});
        const json j{{"image", e.imagePath}, {"split", split_name(e.split)}, {"instances", instances}};
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("save_manifest: write failed for " + path);
}

} // namespace unipcb::data
