#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "traygrade/dataset.hpp"
#include "traygrade/error.hpp"
#include "traygrade/raster.hpp"

namespace traygrade {

// One detection in normalized center/size coordinates.
struct DetBox {
    int class_id = 0;
    double cx = 0.0, cy = 0.0;
    double w = 0.0, h = 0.0;
    double conf = 1.0;
};

// Intersection over union of two axis-aligned boxes; 0 when the union has
// zero area.
double iou(const DetBox& a, const DetBox& b);

// d(iou)/d{cx, cy, w, h} of the first argument, at points where IoU is
// differentiable. Used to validate the detection loss; not a training path.
struct IouGrad {
    double value = 0.0;
    double dcx = 0.0, dcy = 0.0, dw = 0.0, dh = 0.0;
};
IouGrad iou_grad(const DetBox& pred, const DetBox& gt);

// Target confidence: IoU(pred, gt) when an object is present, else 0.
// Throws MissingGroundTruth when has_object and gt is null.
double confidence(bool has_object, const DetBox& pred, const DetBox* gt);

// --- detection loss ------------------------------------------------------------

// One predicted box inside a grid cell: center, size, objectness confidence.
struct BoxPrediction {
    double x = 0.0, y = 0.0, w = 0.0, h = 0.0;
    double conf = 0.0;
};

struct CellPrediction {
    std::vector<BoxPrediction> boxes;  // length B
    std::vector<double> class_probs;   // length num_classes
};

struct CellTarget {
    bool has_object = false;
    double x = 0.0, y = 0.0, w = 0.0, h = 0.0;
    int class_id = 0;
};

struct LossConfig {
    int grid_side = 1;     // S
    int boxes_per_cell = 1; // B
    int num_classes = 1;
    double lambda_coord = 5.0;
    double lambda_noobj = 0.5;
};

// Sum-squared detection loss over an S*S grid:
//   lambda_coord * [coord + sqrt-size residuals of the responsible box]
//   + confidence residual (target = IoU of responsible box vs truth)
//   + class-probability residuals, over object cells;
//   lambda_noobj * confidence residuals over no-object cells.
// The responsible box is the highest-IoU box against the cell target, ties
// to the lowest index. Throws ShapeMismatch, NegativeSize.
double yolo_loss(const std::vector<CellPrediction>& preds,
                 const std::vector<CellTarget>& targets, const LossConfig& cfg);

// Loss plus d(loss)/d(every prediction scalar); same shapes as the input.
struct YoloLossGrad {
    double loss = 0.0;
    std::vector<CellPrediction> d; // gradients, boxes/class_probs mirrored
};
YoloLossGrad yolo_loss_grad(const std::vector<CellPrediction>& preds,
                            const std::vector<CellTarget>& targets, const LossConfig& cfg);

// --- non-maximum suppression -----------------------------------------------------

// Greedy class-wise NMS: confidence descending (ties: lower class id, then
// input order); a box survives iff its IoU with every kept box of the same
// class is strictly below the threshold.
std::vector<DetBox> nms(const std::vector<DetBox>& boxes, double iou_threshold);

// --- detector input boundary -------------------------------------------------------

// Aspect-preserving resize into a size x size square with centered black
// bars, plus the exact box mappings between canvas- and detector-normalized
// coordinates.
struct LetterboxGeom {
    int src_w = 0, src_h = 0;
    int size = 0;        // square detector input edge
    int scaled_w = 0, scaled_h = 0;
    int pad_x = 0, pad_y = 0;

    LetterboxGeom() = default;
    LetterboxGeom(int src_w, int src_h, int size);

    DetBox to_detector(const DetBox& canvas_box) const;
    DetBox from_detector(const DetBox& detector_box) const;
};

Raster letterbox(const Raster& img, int size);

// --- inference backend --------------------------------------------------------------

// Pluggable detector + classifier pair. Implementations must be safe for
// concurrent read-only calls or document themselves single-threaded.
//
// The scene key and class hint exist so a replay backend can resolve ground
// truth without hidden state; model-driven implementations ignore them.
class InferenceBackend {
public:
    virtual ~InferenceBackend() = default;

    // Detections in detector-input normalized coordinates.
    virtual std::vector<DetBox> detect_scene(const Raster& detector_input,
                                             const std::string& view_key) = 0;

    // Per-class scores summing to 1 (+-1e-6). class_hint carries the
    // detection-stage class of the crop; -1 when unknown.
    virtual std::vector<double> classify_crop(const Raster& crop, int class_hint) = 0;

    virtual int num_classes() const = 0;
};

// Annotation replay backend. detect_scene returns the view's ground-truth
// boxes with centers perturbed by uniform +-jitter (normalized units),
// derived deterministically from (seed, view key, box index); jitter 0 is
// exact replay. When geom has a nonzero size the boxes are then mapped into
// detector coordinates; a default geom replays annotation coordinates
// unchanged. classify_crop returns a one-hot of the class hint.
// Thread-safe; throws UnknownScene for views absent from the annotations.
std::unique_ptr<InferenceBackend> oracle_backend(AnnotationSet annotations, double jitter,
                                                 std::uint64_t seed, LetterboxGeom geom = {});

// Model-file backend behind the same contract; only available when the
// project is built with TRAYGRADE_WITH_ONNX.
std::unique_ptr<InferenceBackend> model_backend(const std::string& model_path, int num_classes);

} // namespace traygrade
