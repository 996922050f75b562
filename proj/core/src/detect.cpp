#include "traygrade/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "traygrade/rng.hpp"

namespace traygrade {

namespace {

struct Corners {
    double x1, y1, x2, y2;
};

Corners corners(const DetBox& b) {
    return {b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0, b.cy + b.h / 2.0};
}

} // namespace

double iou(const DetBox& a, const DetBox& b) {
    const Corners ca = corners(a), cb = corners(b);
    const double iw = std::min(ca.x2, cb.x2) - std::max(ca.x1, cb.x1);
    const double ih = std::min(ca.y2, cb.y2) - std::max(ca.y1, cb.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    // Areas come from the same corner differences as the intersection so
    // that iou(a, a) is exactly 1 (w*h rounds differently from x2-x1).
    const double inter = iw * ih;
    const double area_a = (ca.x2 - ca.x1) * (ca.y2 - ca.y1);
    const double area_b = (cb.x2 - cb.x1) * (cb.y2 - cb.y1);
    const double uni = area_a + area_b - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

IouGrad iou_grad(const DetBox& pred, const DetBox& gt) {
    IouGrad g;
    const Corners cp = corners(pred), cg = corners(gt);
    const double ix1 = std::max(cp.x1, cg.x1), ix2 = std::min(cp.x2, cg.x2);
    const double iy1 = std::max(cp.y1, cg.y1), iy2 = std::min(cp.y2, cg.y2);
    const double iw = ix2 - ix1, ih = iy2 - iy1;
    if (iw <= 0.0 || ih <= 0.0) return g; // flat zero region
    const double inter = iw * ih;
    const double area_p = (cp.x2 - cp.x1) * (cp.y2 - cp.y1);
    const double area_g = (cg.x2 - cg.x1) * (cg.y2 - cg.y1);
    const double uni = area_p + area_g - inter;
    if (uni <= 0.0) return g;
    g.value = inter / uni;

    // Which intersection edges move with the prediction.
    const double l = cp.x1 > cg.x1 ? 1.0 : 0.0; // left edge binds to pred
    const double r = cp.x2 < cg.x2 ? 1.0 : 0.0;
    const double t = cp.y1 > cg.y1 ? 1.0 : 0.0;
    const double b = cp.y2 < cg.y2 ? 1.0 : 0.0;

    const double diw_dcx = r - l;
    const double diw_dw = 0.5 * (r + l);
    const double dih_dcy = b - t;
    const double dih_dh = 0.5 * (b + t);

    const double di_dcx = ih * diw_dcx;
    const double di_dcy = iw * dih_dcy;
    const double di_dw = ih * diw_dw;
    const double di_dh = iw * dih_dh;

    // u = area(pred) + area(gt) - inter
    const double du_dcx = -di_dcx;
    const double du_dcy = -di_dcy;
    const double du_dw = pred.h - di_dw;
    const double du_dh = pred.w - di_dh;

    const double u2 = uni * uni;
    g.dcx = (di_dcx * uni - inter * du_dcx) / u2;
    g.dcy = (di_dcy * uni - inter * du_dcy) / u2;
    g.dw = (di_dw * uni - inter * du_dw) / u2;
    g.dh = (di_dh * uni - inter * du_dh) / u2;
    return g;
}

double confidence(bool has_object, const DetBox& pred, const DetBox* gt) {
    if (!has_object) return 0.0;
    if (gt == nullptr) throw MissingGroundTruth("confidence: object flagged but no ground truth");
    return iou(pred, *gt);
}

// --- detection loss -----------------------------------------------------------

namespace {

DetBox as_box(const BoxPrediction& p) { return DetBox{0, p.x, p.y, p.w, p.h, p.conf}; }

void check_shapes(const std::vector<CellPrediction>& preds,
                  const std::vector<CellTarget>& targets, const LossConfig& cfg) {
    const std::size_t cells = static_cast<std::size_t>(cfg.grid_side) * cfg.grid_side;
    if (cfg.grid_side < 1 || cfg.boxes_per_cell < 1 || cfg.num_classes < 1 ||
        cfg.lambda_coord < 0.0 || cfg.lambda_noobj < 0.0)
        throw ShapeMismatch("loss: invalid config");
    if (preds.size() != cells || targets.size() != cells)
        throw ShapeMismatch("loss: cell count != S*S");
    for (const CellPrediction& cell : preds) {
        if (cell.boxes.size() != static_cast<std::size_t>(cfg.boxes_per_cell))
            throw ShapeMismatch("loss: box count != B");
        if (cell.class_probs.size() != static_cast<std::size_t>(cfg.num_classes))
            throw ShapeMismatch("loss: class prob count mismatch");
    }
}

double loss_impl(const std::vector<CellPrediction>& preds,
                 const std::vector<CellTarget>& targets, const LossConfig& cfg,
                 YoloLossGrad* out) {
    check_shapes(preds, targets, cfg);
    if (out) {
        out->d.assign(preds.size(), CellPrediction{});
        for (std::size_t i = 0; i < preds.size(); ++i) {
            out->d[i].boxes.assign(preds[i].boxes.size(), BoxPrediction{});
            out->d[i].class_probs.assign(preds[i].class_probs.size(), 0.0);
        }
    }

    double loss = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const CellPrediction& cell = preds[i];
        const CellTarget& tgt = targets[i];

        if (!tgt.has_object) {
            for (std::size_t j = 0; j < cell.boxes.size(); ++j) {
                const double c = cell.boxes[j].conf;
                loss += cfg.lambda_noobj * c * c;
                if (out) out->d[i].boxes[j].conf += 2.0 * cfg.lambda_noobj * c;
            }
            continue;
        }

        if (tgt.w < 0.0 || tgt.h < 0.0) throw NegativeSize("loss: target size < 0");
        for (const BoxPrediction& b : cell.boxes)
            if (b.w < 0.0 || b.h < 0.0) throw NegativeSize("loss: predicted size < 0");
        if (tgt.class_id < 0 || tgt.class_id >= cfg.num_classes)
            throw ShapeMismatch("loss: target class out of range");

        const DetBox tbox{0, tgt.x, tgt.y, tgt.w, tgt.h, 1.0};
        std::size_t resp = 0;
        double best = -1.0;
        for (std::size_t j = 0; j < cell.boxes.size(); ++j) {
            const double v = iou(as_box(cell.boxes[j]), tbox);
            if (v > best) {
                best = v;
                resp = j;
            }
        }
        const BoxPrediction& r = cell.boxes[resp];

        const double dx = tgt.x - r.x, dy = tgt.y - r.y;
        loss += cfg.lambda_coord * (dx * dx + dy * dy);

        const double sw = std::sqrt(tgt.w) - std::sqrt(r.w);
        const double sh = std::sqrt(tgt.h) - std::sqrt(r.h);
        loss += cfg.lambda_coord * (sw * sw + sh * sh);

        const double c_target = iou(as_box(r), tbox);
        const double dc = c_target - r.conf;
        loss += dc * dc;

        for (int c = 0; c < cfg.num_classes; ++c) {
            const double p = c == tgt.class_id ? 1.0 : 0.0;
            const double dp = p - cell.class_probs[c];
            loss += dp * dp;
            if (out) out->d[i].class_probs[c] += -2.0 * dp;
        }

        if (out) {
            BoxPrediction& g = out->d[i].boxes[resp];
            g.x += -2.0 * cfg.lambda_coord * dx;
            g.y += -2.0 * cfg.lambda_coord * dy;
            if (r.w > 0.0) g.w += -cfg.lambda_coord * sw / std::sqrt(r.w);
            if (r.h > 0.0) g.h += -cfg.lambda_coord * sh / std::sqrt(r.h);
            g.conf += -2.0 * dc;
            // The confidence target is itself IoU(pred, gt), so coordinate
            // gradients flow through it.
            const IouGrad ig = iou_grad(as_box(r), tbox);
            g.x += 2.0 * dc * ig.dcx;
            g.y += 2.0 * dc * ig.dcy;
            g.w += 2.0 * dc * ig.dw;
            g.h += 2.0 * dc * ig.dh;
        }
    }
    return loss;
}

} // namespace

double yolo_loss(const std::vector<CellPrediction>& preds,
                 const std::vector<CellTarget>& targets, const LossConfig& cfg) {
    return loss_impl(preds, targets, cfg, nullptr);
}

YoloLossGrad yolo_loss_grad(const std::vector<CellPrediction>& preds,
                            const std::vector<CellTarget>& targets, const LossConfig& cfg) {
    YoloLossGrad g;
    g.loss = loss_impl(preds, targets, cfg, &g);
    return g;
}

// --- non-maximum suppression ----------------------------------------------------

std::vector<DetBox> nms(const std::vector<DetBox>& boxes, double iou_threshold) {
    std::vector<std::size_t> order(boxes.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (boxes[a].conf != boxes[b].conf) return boxes[a].conf > boxes[b].conf;
        if (boxes[a].class_id != boxes[b].class_id) return boxes[a].class_id < boxes[b].class_id;
        return a < b;
    });

    std::vector<DetBox> kept;
    kept.reserve(boxes.size());
    for (std::size_t idx : order) {
        const DetBox& cand = boxes[idx];
        bool keep = true;
        for (const DetBox& k : kept) {
            if (k.class_id != cand.class_id) continue;
            if (iou(k, cand) >= iou_threshold) {
                keep = false;
                break;
            }
        }
        if (keep) kept.push_back(cand);
    }
    return kept;
}

// --- letterbox --------------------------------------------------------------------

LetterboxGeom::LetterboxGeom(int sw, int sh, int sz) : src_w(sw), src_h(sh), size(sz) {
    if (sw < 1 || sh < 1 || sz < 1) throw NegativeSize("letterbox: non-positive dimension");
    const double scale = static_cast<double>(sz) / std::max(sw, sh);
    scaled_w = static_cast<int>(std::lround(sw * scale));
    scaled_h = static_cast<int>(std::lround(sh * scale));
    pad_x = (sz - scaled_w) / 2;
    pad_y = (sz - scaled_h) / 2;
}

namespace {

double letterbox_scale(const LetterboxGeom& g) {
    return static_cast<double>(g.size) / std::max(g.src_w, g.src_h);
}

} // namespace

DetBox LetterboxGeom::to_detector(const DetBox& canvas_box) const {
    const double s = letterbox_scale(*this);
    DetBox out = canvas_box;
    out.cx = (canvas_box.cx * src_w * s + pad_x) / size;
    out.cy = (canvas_box.cy * src_h * s + pad_y) / size;
    out.w = canvas_box.w * src_w * s / size;
    out.h = canvas_box.h * src_h * s / size;
    return out;
}

DetBox LetterboxGeom::from_detector(const DetBox& detector_box) const {
    const double s = letterbox_scale(*this);
    DetBox out = detector_box;
    out.cx = (detector_box.cx * size - pad_x) / (s * src_w);
    out.cy = (detector_box.cy * size - pad_y) / (s * src_h);
    out.w = detector_box.w * size / (s * src_w);
    out.h = detector_box.h * size / (s * src_h);
    return out;
}

Raster letterbox(const Raster& img, int size) {
    const LetterboxGeom g(img.width, img.height, size);
    const double s = letterbox_scale(g);
    Raster out(size, size, img.channels, 0);

    for (int y = g.pad_y; y < g.pad_y + g.scaled_h; ++y) {
        const double sy = (y - g.pad_y + 0.5) / s - 0.5;
        const double cy = std::clamp(sy, 0.0, static_cast<double>(img.height - 1));
        const int y0 = static_cast<int>(cy);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double fy = cy - y0;
        for (int x = g.pad_x; x < g.pad_x + g.scaled_w; ++x) {
            const double sx = (x - g.pad_x + 0.5) / s - 0.5;
            const double cx = std::clamp(sx, 0.0, static_cast<double>(img.width - 1));
            const int x0 = static_cast<int>(cx);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double fx = cx - x0;
            for (int c = 0; c < img.channels; ++c) {
                const double v = (1 - fy) * ((1 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c)) +
                                 fy * ((1 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c));
                out.at(x, y, c) = static_cast<std::uint8_t>(
                    std::clamp(std::floor(v + 0.5), 0.0, 255.0));
            }
        }
    }
    return out;
}

// --- oracle backend -----------------------------------------------------------------

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

class OracleBackend final : public InferenceBackend {
public:
    OracleBackend(AnnotationSet annotations, double jitter, std::uint64_t seed, LetterboxGeom geom)
        : annotations_(std::move(annotations)), jitter_(jitter), seed_(seed), geom_(geom) {}

    std::vector<DetBox> detect_scene(const Raster&, const std::string& view_key) override {
        const auto it = annotations_.views.find(view_key);
        if (it == annotations_.views.end())
            throw UnknownScene("oracle backend: no annotations for " + view_key);

        std::vector<DetBox> out;
        out.reserve(it->second.boxes.size());
        const Rng base = Rng(seed_).fork(fnv1a(view_key));
        for (std::size_t i = 0; i < it->second.boxes.size(); ++i) {
            const LabeledBox& lb = it->second.boxes[i];
            DetBox b{lb.class_id, lb.cx, lb.cy, lb.w, lb.h, 1.0};
            if (jitter_ > 0.0) {
                Rng r = base.fork(i);
                b.cx += r.uniform(-jitter_, jitter_);
                b.cy += r.uniform(-jitter_, jitter_);
            }
            if (geom_.size > 0) b = geom_.to_detector(b);
            out.push_back(b);
        }
        return out;
    }

    std::vector<double> classify_crop(const Raster&, int class_hint) override {
        const int k = num_classes();
        if (class_hint < 0 || class_hint >= k)
            throw UnknownClass("oracle backend: class hint out of range");
        std::vector<double> scores(k, 0.0);
        scores[class_hint] = 1.0;
        return scores;
    }

    int num_classes() const override { return static_cast<int>(annotations_.classes.size()); }

private:
    const AnnotationSet annotations_;
    const double jitter_;
    const std::uint64_t seed_;
    const LetterboxGeom geom_;
};

} // namespace

std::unique_ptr<InferenceBackend> oracle_backend(AnnotationSet annotations, double jitter,
                                                 std::uint64_t seed, LetterboxGeom geom) {
    return std::make_unique<OracleBackend>(std::move(annotations), jitter, seed, geom);
}

#ifndef TRAYGRADE_WITH_ONNX
std::unique_ptr<InferenceBackend> model_backend(const std::string&, int) {
    throw Unsupported("model backend requires a build with TRAYGRADE_WITH_ONNX");
}
#endif

} // namespace traygrade
