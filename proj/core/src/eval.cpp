#include "traygrade/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace traygrade {

namespace {

std::vector<std::size_t> conf_order(const std::vector<DetBox>& preds) {
    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return preds[a].conf > preds[b].conf; });
    return order;
}

} // namespace

MatchResult match_detections(const std::vector<DetBox>& preds, const std::vector<DetBox>& gts,
                             double iou_threshold) {
    if (iou_threshold <= 0.0 || iou_threshold > 1.0)
        throw OutOfRange("match_detections: threshold outside (0,1]");

    MatchResult out;
    out.iou_threshold = iou_threshold;
    out.detections.resize(preds.size());
    out.gt_matched.assign(gts.size(), false);

    for (std::size_t idx : conf_order(preds)) {
        const DetBox& p = preds[idx];
        DetectionOutcome& d = out.detections[idx];
        d.conf = p.conf;
        d.class_id = p.class_id;

        int best = -1;
        double best_iou = 0.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (out.gt_matched[g] || gts[g].class_id != p.class_id) continue;
            const double v = iou(p, gts[g]);
            if (v > best_iou) {
                best_iou = v;
                best = static_cast<int>(g);
            }
        }
        if (best >= 0 && best_iou >= iou_threshold) {
            d.tp = true;
            d.gt_index = best;
            d.iou_value = best_iou;
            out.gt_matched[best] = true;
        }
    }
    return out;
}

std::optional<double> average_precision(const MatchResult& matches, std::size_t gt_count) {
    if (gt_count == 0) {
        if (matches.detections.empty()) return std::nullopt;
        return 0.0;
    }
    if (matches.detections.empty()) return 0.0;

    std::vector<std::size_t> order(matches.detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return matches.detections[a].conf > matches.detections[b].conf;
    });

    std::vector<double> precision(order.size()), recall(order.size());
    std::size_t tp = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (matches.detections[order[i]].tp) ++tp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(tp) / static_cast<double>(gt_count);
    }
    // Monotone envelope from the right.
    for (std::size_t i = precision.size() - 1; i-- > 0;)
        precision[i] = std::max(precision[i], precision[i + 1]);

    double sum = 0.0;
    for (int i = 0; i <= 100; ++i) {
        const double level = i / 100.0;
        double p = 0.0;
        for (std::size_t k = 0; k < recall.size(); ++k) {
            if (recall[k] >= level) {
                p = precision[k];
                break;
            }
        }
        sum += p;
    }
    return sum / 101.0;
}

std::vector<double> coco_thresholds() {
    std::vector<double> t;
    for (int i = 50; i <= 95; i += 5) t.push_back(i / 100.0);
    return t;
}

namespace {

// Class-agnostic greedy matching used only for the confusion matrix, so a
// mislabeled but well-localized detection shows up as cross-class confusion
// instead of an unrelated FP/FN pair.
void accumulate_confusion(const DetectionSample& s, double thr, int num_classes,
                          std::vector<std::vector<long long>>& cm) {
    std::vector<bool> gt_used(s.gts.size(), false);
    std::vector<bool> pred_matched(s.preds.size(), false);
    for (std::size_t idx : conf_order(s.preds)) {
        int best = -1;
        double best_iou = 0.0;
        for (std::size_t g = 0; g < s.gts.size(); ++g) {
            if (gt_used[g]) continue;
            const double v = iou(s.preds[idx], s.gts[g]);
            if (v > best_iou) {
                best_iou = v;
                best = static_cast<int>(g);
            }
        }
        if (best >= 0 && best_iou >= thr) {
            gt_used[best] = true;
            pred_matched[idx] = true;
            ++cm[s.gts[best].class_id][s.preds[idx].class_id];
        }
    }
    for (std::size_t idx = 0; idx < s.preds.size(); ++idx)
        if (!pred_matched[idx]) ++cm[num_classes][s.preds[idx].class_id];
    for (std::size_t g = 0; g < s.gts.size(); ++g)
        if (!gt_used[g]) ++cm[s.gts[g].class_id][num_classes];
}

} // namespace

EvalSummary map_range(const std::vector<DetectionSample>& samples,
                      const std::vector<double>& thresholds, int num_classes) {
    if (thresholds.empty()) throw OutOfRange("map_range: no thresholds");
    for (double t : thresholds)
        if (t <= 0.0 || t > 1.0) throw OutOfRange("map_range: threshold outside (0,1]");
    if (num_classes < 1) throw OutOfRange("map_range: num_classes < 1");

    std::vector<std::size_t> gt_per_class(num_classes, 0);
    std::vector<std::size_t> pred_per_class(num_classes, 0);
    std::size_t total_gt = 0;
    for (const DetectionSample& s : samples) {
        for (const DetBox& g : s.gts) {
            if (g.class_id < 0 || g.class_id >= num_classes)
                throw ClassOutOfRange("map_range: ground-truth class out of range");
            ++gt_per_class[g.class_id];
            ++total_gt;
        }
        for (const DetBox& p : s.preds) {
            if (p.class_id < 0 || p.class_id >= num_classes)
                throw ClassOutOfRange("map_range: prediction class out of range");
            ++pred_per_class[p.class_id];
        }
    }
    if (total_gt == 0) throw EmptyDataset("map_range: no ground truth in any sample");

    EvalSummary out;
    out.thresholds = thresholds;
    out.ap.resize(thresholds.size());

    const auto class_ap = [&](double thr, std::vector<std::optional<double>>& row,
                              std::vector<MatchResult>* keep) {
        std::vector<MatchResult> per_sample;
        per_sample.reserve(samples.size());
        for (const DetectionSample& s : samples)
            per_sample.push_back(match_detections(s.preds, s.gts, thr));

        row.resize(num_classes);
        for (int c = 0; c < num_classes; ++c) {
            MatchResult pooled;
            pooled.iou_threshold = thr;
            for (const MatchResult& m : per_sample)
                for (const DetectionOutcome& d : m.detections)
                    if (d.class_id == c) pooled.detections.push_back(d);
            row[c] = average_precision(pooled, gt_per_class[c]);
        }
        if (keep) *keep = std::move(per_sample);
    };

    for (std::size_t t = 0; t < thresholds.size(); ++t) class_ap(thresholds[t], out.ap[t], nullptr);

    // The 0.50 operating point drives the scalar metrics regardless of the
    // threshold list.
    std::vector<std::optional<double>> ap50;
    std::vector<MatchResult> at50;
    class_ap(0.5, ap50, &at50);

    double sum50 = 0.0;
    int included = 0;
    for (const std::optional<double>& v : ap50) {
        if (!v) continue;
        sum50 += *v;
        ++included;
    }
    out.map50 = included ? sum50 / included : 0.0;

    double sweep_sum = 0.0;
    int sweep_n = 0;
    for (const std::vector<std::optional<double>>& row : out.ap) {
        double s = 0.0;
        int n = 0;
        for (const std::optional<double>& v : row) {
            if (!v) continue;
            s += *v;
            ++n;
        }
        if (n) {
            sweep_sum += s / n;
            ++sweep_n;
        }
    }
    out.map50_95 = sweep_n ? sweep_sum / sweep_n : 0.0;

    std::size_t tp = 0, pred_total = 0;
    double iou_sum = 0.0;
    for (const MatchResult& m : at50) {
        pred_total += m.detections.size();
        for (const DetectionOutcome& d : m.detections) {
            if (!d.tp) continue;
            ++tp;
            iou_sum += d.iou_value;
        }
    }
    const std::size_t fp = pred_total - tp;
    const std::size_t fn = total_gt - tp;
    out.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    out.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    out.f1 = out.precision + out.recall > 0.0
                 ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
                 : 0.0;
    out.miou = tp ? iou_sum / static_cast<double>(tp) : 0.0;

    out.confusion.assign(num_classes + 1, std::vector<long long>(num_classes + 1, 0));
    for (const DetectionSample& s : samples) accumulate_confusion(s, 0.5, num_classes, out.confusion);

    return out;
}

// --- classification metrics ----------------------------------------------------

std::vector<std::vector<long long>> confusion_matrix(
    const std::vector<std::pair<int, int>>& pairs, int num_classes) {
    if (num_classes < 1) throw ClassOutOfRange("confusion_matrix: num_classes < 1");
    std::vector<std::vector<long long>> cm(num_classes, std::vector<long long>(num_classes, 0));
    for (const auto& [gt, pred] : pairs) {
        if (gt < 0 || gt >= num_classes || pred < 0 || pred >= num_classes)
            throw ClassOutOfRange("confusion_matrix: class id out of range");
        ++cm[gt][pred];
    }
    return cm;
}

ClassificationMetrics summary_metrics(const std::vector<std::vector<long long>>& cm) {
    const std::size_t k = cm.size();
    long long total = 0, trace = 0;
    std::vector<long long> row_sum(k, 0), col_sum(k, 0);
    for (std::size_t i = 0; i < k; ++i) {
        if (cm[i].size() != k) throw EmptyMatrix("summary_metrics: matrix not square");
        for (std::size_t j = 0; j < k; ++j) {
            total += cm[i][j];
            row_sum[i] += cm[i][j];
            col_sum[j] += cm[i][j];
        }
        trace += cm[i][i];
    }
    if (total == 0) throw EmptyMatrix("summary_metrics: empty confusion matrix");

    ClassificationMetrics m;
    m.accuracy = static_cast<double>(trace) / static_cast<double>(total);

    double psum = 0.0, rsum = 0.0;
    int pn = 0, rn = 0;
    for (std::size_t i = 0; i < k; ++i) {
        if (col_sum[i] > 0) {
            psum += static_cast<double>(cm[i][i]) / static_cast<double>(col_sum[i]);
            ++pn;
        } else {
            m.precision_excluded.push_back(static_cast<int>(i));
        }
        if (row_sum[i] > 0) {
            rsum += static_cast<double>(cm[i][i]) / static_cast<double>(row_sum[i]);
            ++rn;
        } else {
            m.recall_excluded.push_back(static_cast<int>(i));
        }
    }
    m.precision = pn ? psum / pn : 0.0;
    m.recall = rn ? rsum / rn : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                        : 0.0;
    return m;
}

// --- report tables ------------------------------------------------------------

namespace {

std::string fmt_metric(double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(5) << v;
    return s.str();
}

std::string fmt_ms(double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << v;
    return s.str();
}

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());

    std::ostringstream out;
    const auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << "  ";
            out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
        }
        out << '\n';
    };
    emit(header);
    std::size_t total = 0;
    for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
    out << std::string(total, '-') << '\n';
    for (const auto& row : rows) emit(row);
    return out.str();
}

} // namespace

std::string detection_table(const std::vector<DetectionTableRow>& rows) {
    const std::vector<std::string> header{"Model",        "F1-Score",
                                          "Precision",    "Recall",
                                          "mIoU",         "mAP 0.5-0.95",
                                          "Inference Time (ms)", "GPU Usage"};
    std::vector<std::vector<std::string>> cells;
    for (const DetectionTableRow& r : rows)
        cells.push_back({r.model, fmt_metric(r.f1), fmt_metric(r.precision), fmt_metric(r.recall),
                         fmt_metric(r.miou), fmt_metric(r.map50_95), fmt_ms(r.inference_ms),
                         r.resource_note});
    return render_table(header, cells);
}

std::string classification_table(const std::vector<ClassificationTableRow>& rows) {
    const std::vector<std::string> header{"Model",  "Accuracy", "F1-score", "Precision",
                                          "Recall", "Inference Time (ms)", "GPU Usage (MiB)"};
    std::vector<std::vector<std::string>> cells;
    for (const ClassificationTableRow& r : rows)
        cells.push_back({r.model, fmt_metric(r.accuracy), fmt_metric(r.f1), fmt_metric(r.precision),
                         fmt_metric(r.recall), fmt_ms(r.inference_ms), r.resource_note});
    return render_table(header, cells);
}

} // namespace traygrade
