#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "traygrade/config.hpp"
#include "traygrade/dataset.hpp"
#include "traygrade/detect.hpp"
#include "traygrade/error.hpp"
#include "traygrade/eval.hpp"
#include "traygrade/grade.hpp"

namespace traygrade {

// Physical tray dimensions; the rectified canvas is this rectangle sampled
// at config.mm_per_px.
constexpr double tray_width_mm = 320.0;
constexpr double tray_height_mm = 450.0;

inline int canvas_width(const PipelineConfig& cfg) {
    return static_cast<int>(std::lround(tray_width_mm / cfg.mm_per_px));
}
inline int canvas_height(const PipelineConfig& cfg) {
    return static_cast<int>(std::lround(tray_height_mm / cfg.mm_per_px));
}

// Everything one scene pair produced. Failed scenes carry the error text
// and empty outputs.
struct SceneOutcome {
    std::string scene_id;
    bool ok = false;
    std::string error;
    BatchReport report; // single-scene report
    std::vector<DateRecord> records;
    std::vector<PredictedBox> preds_top;    // post-NMS, canvas-normalized
    std::vector<PredictedBox> preds_bottom;
    long long unassigned = 0;
    StageTimings timing;
};

struct PipelineResult {
    std::vector<SceneOutcome> scenes; // sorted by scene id
    BatchReport aggregate;
    std::vector<DateRecord> records;  // all scene records, scene-id order
};

// Runs decode -> rectify -> detect -> align -> classify -> grade -> report
// over every manifest scene. Scenes run on `workers` threads (clamped to
// [1, scene count]); outputs are merged in scene-id order so results do not
// depend on the worker count. A scene failure becomes a failure entry in the
// aggregate and never affects other scenes. Relative manifest paths resolve
// against base_dir. Throws EmptyManifest, ConfigError.
PipelineResult run_pipeline(const PipelineConfig& cfg, const Manifest& manifest,
                            InferenceBackend& backend, int workers,
                            const std::string& base_dir);

// Builds the backend named by cfg.backend: "oracle" replays manifest
// annotations (jitter 0, cfg.seed) through the run's letterbox geometry;
// "model:<path>" loads a model file. Throws ConfigError on other names.
std::unique_ptr<InferenceBackend> make_backend(const PipelineConfig& cfg,
                                               const Manifest& manifest,
                                               const std::string& base_dir);

// Detection evaluation of prediction files against manifest labels.
// Predictions live in predictions_dir as "<scene id>_top.txt" /
// "<scene id>_bottom.txt" ("class conf cx cy w h" lines). A missing file
// counts as zero predictions for that view and is noted; a missing
// directory, or no prediction file for any view, raises MissingPredictions.
struct EvalRun {
    EvalSummary summary;
    std::vector<std::string> notes;
    std::string summary_json;    // canonical JSON document
    std::string tables_text;     // detection + classification text tables
};
EvalRun run_eval(const PipelineConfig& cfg, const Manifest& manifest,
                 const std::string& predictions_dir, const std::string& base_dir);

} // namespace traygrade
