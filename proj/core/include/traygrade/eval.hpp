#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "traygrade/detect.hpp"
#include "traygrade/error.hpp"

namespace traygrade {

// Predictions and ground truth for one scene view.
struct DetectionSample {
    std::vector<DetBox> preds;
    std::vector<DetBox> gts;
};

// Outcome per prediction, parallel to the input prediction list.
struct DetectionOutcome {
    bool tp = false;
    int gt_index = -1;      // matched ground truth, -1 for FP
    double iou_value = 0.0; // IoU with the matched ground truth
    double conf = 0.0;
    int class_id = 0;
};

struct MatchResult {
    std::vector<DetectionOutcome> detections;
    std::vector<bool> gt_matched;
    double iou_threshold = 0.5;
};

// Greedy per-class matching: predictions in confidence-descending order
// (ties keep input order) each claim the unmatched same-class ground truth
// of highest IoU, provided that IoU reaches the threshold. IoU ties take the
// lowest ground-truth index.
MatchResult match_detections(const std::vector<DetBox>& preds, const std::vector<DetBox>& gts,
                             double iou_threshold);

// Area under the precision-recall curve with the monotone precision
// envelope, sampled at recalls 0.00, 0.01, ..., 1.00. Detections may be
// pooled from several scenes; they are ranked by confidence (ties keep list
// order). Returns nullopt when gt_count is 0 and there are no detections
// (excluded from averaging); 0 when gt_count is 0 but detections exist.
std::optional<double> average_precision(const MatchResult& matches, std::size_t gt_count);

struct EvalSummary {
    std::vector<double> thresholds;
    // ap[t][c]: AP of class c at thresholds[t]; nullopt = class excluded
    // (no ground truth and no predictions).
    std::vector<std::vector<std::optional<double>>> ap;
    double map50 = 0.0;
    double map50_95 = 0.0;
    double precision = 0.0; // micro, at threshold 0.50
    double recall = 0.0;
    double f1 = 0.0;
    double miou = 0.0; // mean IoU over true positives at threshold 0.50
    // (K+1) x (K+1); row = ground-truth class, column = predicted class,
    // index K = unmatched. Built by class-agnostic IoU matching at 0.50 so
    // cross-class mistakes are visible; row sums over real classes equal
    // ground-truth counts, column sums equal prediction counts.
    std::vector<std::vector<long long>> confusion;
};

// The standard threshold sweep 0.50, 0.55, ..., 0.95.
std::vector<double> coco_thresholds();

// Full detection evaluation over per-scene samples. Throws EmptyDataset when
// the samples contain no ground truth at all.
EvalSummary map_range(const std::vector<DetectionSample>& samples,
                      const std::vector<double>& thresholds, int num_classes);

// --- classification metrics ------------------------------------------------

// Entry (i, j) counts ground-truth class i predicted as class j. Throws
// ClassOutOfRange.
std::vector<std::vector<long long>> confusion_matrix(
    const std::vector<std::pair<int, int>>& pairs, int num_classes);

struct ClassificationMetrics {
    double accuracy = 0.0;
    double precision = 0.0; // macro
    double recall = 0.0;    // macro
    double f1 = 0.0;        // harmonic mean of the macro averages
    std::vector<int> precision_excluded; // classes with no predictions
    std::vector<int> recall_excluded;    // classes with no ground truth
};

// Throws EmptyMatrix when the matrix totals zero.
ClassificationMetrics summary_metrics(const std::vector<std::vector<long long>>& cm);

// --- report tables -----------------------------------------------------------

struct DetectionTableRow {
    std::string model;
    double f1 = 0.0, precision = 0.0, recall = 0.0, miou = 0.0, map50_95 = 0.0;
    double inference_ms = 0.0;   // caller-measured wall clock
    std::string resource_note;   // e.g. host memory; never measured here
};

struct ClassificationTableRow {
    std::string model;
    double accuracy = 0.0, f1 = 0.0, precision = 0.0, recall = 0.0;
    double inference_ms = 0.0;
    std::string resource_note;
};

// Aligned text tables in the published benchmark column orders:
// detection: Model | F1-Score | Precision | Recall | mIoU | mAP 0.5-0.95 |
//            Inference Time (ms) | GPU Usage
// classification: Model | Accuracy | F1-score | Precision | Recall |
//            Inference Time (ms) | GPU Usage (MiB)
std::string detection_table(const std::vector<DetectionTableRow>& rows);
std::string classification_table(const std::vector<ClassificationTableRow>& rows);

} // namespace traygrade
