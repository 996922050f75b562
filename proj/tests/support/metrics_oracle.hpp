#pragma once

// Brute-force detection metrics written directly from the PR-staircase
// definitions. Deliberately independent of the library implementation (its
// AP walks a monotone precision envelope; this one takes, per recall level,
// the best precision among all qualifying staircase points) so the two can
// cross-check each other to tight tolerances.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

namespace metrics_oracle {

struct Box {
    int cls = 0;
    double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
    double conf = 1.0;
};

struct Sample {
    std::vector<Box> preds;
    std::vector<Box> gts;
};

inline double iou(const Box& a, const Box& b) {
    const double ix0 = std::max(a.cx - a.w / 2.0, b.cx - b.w / 2.0);
    const double iy0 = std::max(a.cy - a.h / 2.0, b.cy - b.h / 2.0);
    const double ix1 = std::min(a.cx + a.w / 2.0, b.cx + b.w / 2.0);
    const double iy1 = std::min(a.cy + a.h / 2.0, b.cy + b.h / 2.0);
    const double inter = std::max(0.0, ix1 - ix0) * std::max(0.0, iy1 - iy0);
    const double uni = a.w * a.h + b.w * b.h - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

struct Matched {
    std::vector<int> pred_gt;     // -1 for FP
    std::vector<double> pred_iou; // IoU with the matched GT
};

// Greedy: predictions in confidence-descending order (stable over input
// order); each claims the unmatched same-class GT of highest IoU (ties to
// the lowest index), provided that IoU reaches the threshold.
inline Matched match(const Sample& s, double thr) {
    Matched m;
    m.pred_gt.assign(s.preds.size(), -1);
    m.pred_iou.assign(s.preds.size(), 0.0);
    std::vector<std::size_t> order(s.preds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return s.preds[a].conf > s.preds[b].conf;
    });
    std::vector<bool> used(s.gts.size(), false);
    for (std::size_t idx : order) {
        int best = -1;
        double best_iou = 0.0;
        for (std::size_t g = 0; g < s.gts.size(); ++g) {
            if (used[g] || s.gts[g].cls != s.preds[idx].cls) continue;
            const double v = iou(s.preds[idx], s.gts[g]);
            if (v > best_iou) {
                best_iou = v;
                best = static_cast<int>(g);
            }
        }
        if (best >= 0 && best_iou >= thr) {
            used[static_cast<std::size_t>(best)] = true;
            m.pred_gt[idx] = best;
            m.pred_iou[idx] = best_iou;
        }
    }
    return m;
}

// 101-point AP of one class at one threshold over the pooled dataset.
// nullopt when the class has no ground truth and no predictions.
inline std::optional<double> ap_class(const std::vector<Sample>& data, int cls, double thr) {
    struct RankedRow {
        double conf = 0.0;
        bool tp = false;
    };
    std::vector<RankedRow> rows;
    std::size_t gt_count = 0;
    for (const Sample& s : data) {
        const Matched m = match(s, thr);
        for (std::size_t i = 0; i < s.preds.size(); ++i)
            if (s.preds[i].cls == cls) rows.push_back({s.preds[i].conf, m.pred_gt[i] >= 0});
        for (const Box& g : s.gts)
            if (g.cls == cls) ++gt_count;
    }
    if (gt_count == 0) {
        if (rows.empty()) return std::nullopt;
        return 0.0;
    }
    if (rows.empty()) return 0.0;

    std::stable_sort(rows.begin(), rows.end(),
                     [](const RankedRow& a, const RankedRow& b) { return a.conf > b.conf; });
    std::vector<double> prec(rows.size()), rec(rows.size());
    std::size_t tp = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].tp) ++tp;
        prec[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        rec[i] = static_cast<double>(tp) / static_cast<double>(gt_count);
    }
    double sum = 0.0;
    for (int level = 0; level <= 100; ++level) {
        const double r = level / 100.0;
        double best = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rec[i] >= r && prec[i] > best) best = prec[i];
        sum += best;
    }
    return sum / 101.0;
}

struct Summary {
    double map50 = 0.0;
    double map50_95 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double miou = 0.0;
};

inline Summary evaluate(const std::vector<Sample>& data, int num_classes) {
    Summary out;

    const auto mean_ap = [&](double thr) -> std::optional<double> {
        double sum = 0.0;
        int n = 0;
        for (int c = 0; c < num_classes; ++c) {
            const std::optional<double> ap = ap_class(data, c, thr);
            if (!ap) continue;
            sum += *ap;
            ++n;
        }
        if (!n) return std::nullopt;
        return sum / n;
    };

    if (const auto m50 = mean_ap(0.5)) out.map50 = *m50;

    double sweep = 0.0;
    int sweep_n = 0;
    for (int t = 50; t <= 95; t += 5) {
        if (const auto m = mean_ap(t / 100.0)) {
            sweep += *m;
            ++sweep_n;
        }
    }
    out.map50_95 = sweep_n ? sweep / sweep_n : 0.0;

    std::size_t tp = 0, preds = 0, gts = 0;
    double iou_sum = 0.0;
    for (const Sample& s : data) {
        const Matched m = match(s, 0.5);
        preds += s.preds.size();
        gts += s.gts.size();
        for (std::size_t i = 0; i < s.preds.size(); ++i) {
            if (m.pred_gt[i] < 0) continue;
            ++tp;
            iou_sum += m.pred_iou[i];
        }
    }
    out.precision = preds ? static_cast<double>(tp) / static_cast<double>(preds) : 0.0;
    out.recall = gts ? static_cast<double>(tp) / static_cast<double>(gts) : 0.0;
    out.f1 = out.precision + out.recall > 0.0
                 ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
                 : 0.0;
    out.miou = tp ? iou_sum / static_cast<double>(tp) : 0.0;
    return out;
}

} // namespace metrics_oracle
