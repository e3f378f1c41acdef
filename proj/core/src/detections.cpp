#include "unipcb/detections.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "unipcb/errors.hpp"

namespace unipcb::metrics {

using nlohmann::json;

void DetectionRecord::validate(bool is_prediction) const {
    if (imageId.empty()) throw ValidationError("DetectionRecord: empty imageId");
    box.validate();
    if (is_prediction) {
        if (!score) throw ValidationError("DetectionRecord: prediction missing score");
        if (!(*score >= 0.0 && *score <= 1.0))
            throw ValidationError("DetectionRecord: score must be in [0, 1]");
    } else if (score) {
        throw ValidationError("DetectionRecord: ground truth must not carry a score");
    }
}

double iou(const Box& a, const Box& b) {
    a.validate();
    b.validate();
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return inter <= 0.0 ? 0.0 : inter / uni;
}

MatchResult match_detections(const std::vector<DetectionRecord>& preds,
                             const std::vector<DetectionRecord>& gts, double iou_thresh) {
    if (!(iou_thresh > 0.0 && iou_thresh <= 1.0))
        throw ValidationError("match_detections: IoU threshold must be in (0, 1]");
    for (const auto& p : preds) p.validate(true);
    for (const auto& g : gts) g.validate(false);

    MatchResult res;
    res.predOrder.resize(preds.size());
    std::iota(res.predOrder.begin(), res.predOrder.end(), std::size_t{0});
    std::stable_sort(res.predOrder.begin(), res.predOrder.end(),
                     [&](std::size_t a, std::size_t b) { return *preds[a].score > *preds[b].score; });

    std::vector<bool> gt_used(gts.size(), false);
    res.isTp.resize(preds.size(), false);
    std::size_t matched = 0;
    for (std::size_t rank = 0; rank < res.predOrder.size(); ++rank) {
        const auto& p = preds[res.predOrder[rank]];
        double best = 0.0;
        std::size_t best_gt = gts.size();
        for (std::size_t gi = 0; gi < gts.size(); ++gi) {
            if (gt_used[gi]) continue;
            const double v = iou(p.box, gts[gi].box);
            if (v >= iou_thresh && v > best) {
                best = v;
                best_gt = gi;
            }
        }
        if (best_gt < gts.size()) {
            gt_used[best_gt] = true;
            res.isTp[rank] = true;
            ++matched;
        }
    }
    res.falseNegatives = gts.size() - matched;
    return res;
}

PRCurve pr_curve(const std::vector<bool>& tp_ranked, std::size_t num_gt) {
    if (num_gt == 0) throw ValidationError("pr_curve: no ground truth");
    PRCurve c;
    c.numGt = num_gt;
    c.recall.reserve(tp_ranked.size());
    c.precision.reserve(tp_ranked.size());
    std::size_t tp = 0;
    for (std::size_t k = 0; k < tp_ranked.size(); ++k) {
        if (tp_ranked[k]) ++tp;
        c.recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
        c.precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    }
    c.envelope = c.precision;
    for (std::size_t k = c.envelope.size(); k-- > 1;)
        c.envelope[k - 1] = std::max(c.envelope[k - 1], c.envelope[k]);
    return c;
}

double average_precision(const PRCurve& curve, bool all_point) {
    if (curve.numGt == 0) throw ValidationError("average_precision: no ground truth");
    if (curve.recall.empty()) return 0.0;

    if (all_point) {
        double ap = 0.0;
        double prev_recall = 0.0;
        for (std::size_t k = 0; k < curve.recall.size(); ++k) {
            ap += (curve.recall[k] - prev_recall) * curve.envelope[k];
            prev_recall = curve.recall[k];
        }
        return ap;
    }

    double total = 0.0;
    std::size_t idx = 0;
    for (int g = 0; g <= 100; ++g) {
        const double r = static_cast<double>(g) / 100.0;
        while (idx < curve.recall.size() && curve.recall[idx] < r) ++idx;
        if (idx < curve.recall.size()) total += curve.envelope[idx];
    }
    return total / 101.0;
}

namespace {

// Predictions of one class ranked by score across images, with TP labels
// from per-image greedy matching at the given IoU threshold.
std::vector<bool> ranked_tp_labels(const std::vector<const DetectionRecord*>& preds,
                                   const std::map<std::string, std::vector<DetectionRecord>>& gt_by_image,
                                   double iou_thresh) {
    std::map<std::string, std::vector<DetectionRecord>> pred_by_image;
    std::map<std::string, std::vector<std::size_t>> index_by_image;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        pred_by_image[preds[i]->imageId].push_back(*preds[i]);
        index_by_image[preds[i]->imageId].push_back(i);
    }

    std::vector<bool> tp_by_input(preds.size(), false);
    static const std::vector<DetectionRecord> kNoGt;
    for (const auto& [image, image_preds] : pred_by_image) {
        const auto git = gt_by_image.find(image);
        const auto& gts = git == gt_by_image.end() ? kNoGt : git->second;
        const MatchResult m = match_detections(image_preds, gts, iou_thresh);
        const auto& input_idx = index_by_image[image];
        for (std::size_t rank = 0; rank < m.predOrder.size(); ++rank)
            tp_by_input[input_idx[m.predOrder[rank]]] = m.isTp[rank];
    }

    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return *preds[a]->score > *preds[b]->score; });
    std::vector<bool> ranked(preds.size());
    for (std::size_t k = 0; k < order.size(); ++k) ranked[k] = tp_by_input[order[k]];
    return ranked;
}

} // namespace

MeanApResult mean_ap(const std::vector<DetectionRecord>& preds,
                     const std::vector<DetectionRecord>& gts, bool all_point) {
    if (gts.empty()) throw ValidationError("mean_ap: no ground truth records");
    for (const auto& p : preds) p.validate(true);
    for (const auto& g : gts) g.validate(false);

    std::map<DefectClass, std::vector<const DetectionRecord*>> preds_by_class;
    std::map<DefectClass, std::map<std::string, std::vector<DetectionRecord>>> gts_by_class;
    std::map<DefectClass, std::size_t> gt_counts;
    for (const auto& p : preds) preds_by_class[p.classId].push_back(&p);
    for (const auto& g : gts) {
        gts_by_class[g.classId][g.imageId].push_back(g);
        ++gt_counts[g.classId];
    }

    MeanApResult result;
    double sum50 = 0.0, sum5095 = 0.0;
    for (const auto& [cls, count] : gt_counts) {
        static const std::vector<const DetectionRecord*> kNoPreds;
        const auto pit = preds_by_class.find(cls);
        const auto& cls_preds = pit == preds_by_class.end() ? kNoPreds : pit->second;

        ClassAp entry;
        entry.numGt = count;
        double acc = 0.0;
        for (int step = 0; step < 10; ++step) {
            const double thresh = 0.5 + 0.05 * static_cast<double>(step);
            const auto labels = ranked_tp_labels(cls_preds, gts_by_class[cls], thresh);
            const double ap = average_precision(pr_curve(labels, count), all_point);
            if (step == 0) entry.ap50 = ap;
            acc += ap;
        }
        entry.ap5095 = acc / 10.0;
        sum50 += entry.ap50;
        sum5095 += entry.ap5095;
        result.perClass[cls] = entry;
    }
    const double n_classes = static_cast<double>(result.perClass.size());
    result.map50 = sum50 / n_classes;
    result.map5095 = sum5095 / n_classes;
    return result;
}

OperatingPoint best_f1_point(const std::vector<DetectionRecord>& preds,
                             const std::vector<DetectionRecord>& gts, double iou_thresh) {
    if (gts.empty()) throw ValidationError("best_f1_point: no ground truth records");

    // Class-wise per-image matching, pooled into one micro-averaged ranking.
    std::map<DefectClass, std::vector<const DetectionRecord*>> preds_by_class;
    std::map<DefectClass, std::map<std::string, std::vector<DetectionRecord>>> gts_by_class;
    for (const auto& p : preds) {
        p.validate(true);
        preds_by_class[p.classId].push_back(&p);
    }
    for (const auto& g : gts) {
        g.validate(false);
        gts_by_class[g.classId][g.imageId].push_back(g);
    }

    std::vector<std::pair<double, bool>> pooled;  // (score, tp)
    pooled.reserve(preds.size());
    for (const auto& [cls, cls_preds] : preds_by_class) {
        static const std::map<std::string, std::vector<DetectionRecord>> kNoGt;
        const auto git = gts_by_class.find(cls);
        const auto& cls_gts = git == gts_by_class.end() ? kNoGt : git->second;
        const auto labels = ranked_tp_labels(cls_preds, cls_gts, iou_thresh);

        std::vector<std::size_t> order(cls_preds.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return *cls_preds[a]->score > *cls_preds[b]->score;
        });
        for (std::size_t k = 0; k < order.size(); ++k)
            pooled.emplace_back(*cls_preds[order[k]]->score, labels[k]);
    }
    std::stable_sort(pooled.begin(), pooled.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });

    OperatingPoint best;
    best.scoreThreshold = 1.0;
    std::size_t tp = 0;
    const double total_gt = static_cast<double>(gts.size());
    for (std::size_t k = 0; k < pooled.size(); ++k) {
        if (pooled[k].second) ++tp;
        // Thresholding at a score keeps every prediction with that score.
        if (k + 1 < pooled.size() && pooled[k + 1].first == pooled[k].first) continue;
        const double precision = static_cast<double>(tp) / static_cast<double>(k + 1);
        const double recall = static_cast<double>(tp) / total_gt;
        const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        if (f1 > best.f1) {
            best.precision = precision;
            best.recall = recall;
            best.f1 = f1;
            best.scoreThreshold = pooled[k].first;
        }
    }
    return best;
}

std::vector<DetectionRecord> load_detections(const std::string& path, bool predictions) {
    std::ifstream in(path);
    if (!in) throw IoError("load_detections: cannot open " + path);
    std::vector<DetectionRecord> records;
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
            throw IoError("load_detections: " + path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        DetectionRecord r;
        try {
            r.imageId = j.at("image_id").get<std::string>();
            r.classId = defect_class_from_name(j.at("class").get<std::string>());
            const auto& bbox = j.at("bbox");
            if (!bbox.is_array() || bbox.size() != 4)
                throw ValidationError("bbox must be [x, y, w, h]");
            r.box = Box{bbox[0].get<double>(), bbox[1].get<double>(), bbox[2].get<double>(),
                        bbox[3].get<double>()};
            if (j.contains("score")) r.score = j.at("score").get<double>();
        } catch (const json::exception& e) {
            throw IoError("load_detections: " + path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        r.validate(predictions);
        records.push_back(std::move(r));
    }
    return records;
}

void save_detections(const std::string& path, const std::vector<DetectionRecord>& records) {
    std::ofstream out(path);
    if (!out) throw IoError("save_detections: cannot open " + path);
    for (const auto& r : records) {
        json j;
        j["image_id"] = r.imageId;
        j["class"] = defect_class_name(r.classId);
        j["bbox"] = {r.box.x, r.box.y, r.box.w, r.box.h};
        if (r.score) j["score"] = *r.score;
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("save_detections: write failed for " + path);
}

} // namespace unipcb::metrics
