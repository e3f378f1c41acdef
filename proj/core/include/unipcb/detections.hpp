#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unipcb/defect.hpp"

namespace unipcb::metrics {

/// One predicted or ground-truth box. Ground truth carries no score.
struct DetectionRecord {
    std::string imageId;
    DefectClass classId = DefectClass::Short;
    Box box;
    std::optional<double> score;  // predictions: required, in [0, 1]

    void validate(bool is_prediction) const;
};

/// Intersection-over-union of two boxes; disjoint boxes give 0.
double iou(const Box& a, const Box& b);

/// Greedy matching for one class on one image: predictions in descending
/// score order (ties keep input order) each claim the unmatched ground
/// truth with the highest IoU >= iouThresh.
struct MatchResult {
    std::vector<std::size_t> predOrder;  // indices into preds, sorted by score
    std::vector<bool> isTp;              // parallel to predOrder
    std::size_t falseNegatives = 0;
};
MatchResult match_detections(const std::vector<DetectionRecord>& preds,
                             const std::vector<DetectionRecord>& gts, double iou_thresh);

/// Precision/recall prefixes over score-ranked predictions plus the
/// non-increasing interpolated precision envelope.
struct PRCurve {
    std::vector<double> recall;
    std::vector<double> precision;
    std::vector<double> envelope;
    std::size_t numGt = 0;
};
PRCurve pr_curve(const std::vector<bool>& tp_ranked, std::size_t num_gt);

/// Area under the envelope. Default samples 101 evenly spaced recall
/// points {0, 0.01, ..., 1}; all_point integrates the exact step curve.
double average_precision(const PRCurve& curve, bool all_point = false);

struct ClassAp {
    double ap50 = 0.0;
    double ap5095 = 0.0;
    std::size_t numGt = 0;
};

struct MeanApResult {
    double map50 = 0.0;
    double map5095 = 0.0;
    std::map<DefectClass, ClassAp> perClass;  // classes with ground truth only
};

/// COCO-style mAP over IoU thresholds {0.50, 0.55, ..., 0.95}. Classes
/// without ground truth are excluded; empty ground truth is an error.
MeanApResult mean_ap(const std::vector<DetectionRecord>& preds,
                     const std::vector<DetectionRecord>& gts, bool all_point = false);

/// Micro-averaged operating point maximizing F1 over score thresholds at
/// the given IoU; reported threshold is the score of the last kept
/// prediction.
struct OperatingPoint {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double scoreThreshold = 0.0;
};
OperatingPoint best_f1_point(const std::vector<DetectionRecord>& preds,
                             const std::vector<DetectionRecord>& gts, double iou_thresh = 0.5);

/// JSON-lines I/O: one record per line with image_id, class, bbox [x,y,w,h]
/// and, for predictions, score.
std::vector<DetectionRecord> load_detections(const std::string& path, bool predictions);
void save_detections(const std::string& path, const std::vector<DetectionRecord>& records);

} // namespace unipcb::metrics
