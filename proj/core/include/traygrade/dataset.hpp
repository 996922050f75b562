#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "traygrade/error.hpp"

namespace traygrade {

// One annotation line: class id plus a normalized center/size box.
struct LabeledBox {
    int class_id = 0;
    double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
};

// A prediction line adds a confidence column ("class conf cx cy w h").
struct PredictedBox {
    int class_id = 0;
    double conf = 1.0;
    double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
};

enum class Split { train, test };

// One tray photographed from both sides.
struct SceneEntry {
    std::string id;
    std::string top;          // image paths
    std::string bottom;
    std::string labels_top;   // label paths
    std::string labels_bottom;
    std::string category;     // defect-category tag used for stratification
    std::optional<Split> split;
};

struct Manifest {
    std::vector<SceneEntry> scenes;
    std::vector<std::string> classes;
};

// Ground-truth boxes per view. Views are keyed "<scene id>:top" /
// "<scene id>:bottom".
struct ViewAnnotations {
    std::string image_path;
    std::vector<LabeledBox> boxes;
};

struct AnnotationSet {
    std::map<std::string, ViewAnnotations> views;
    std::vector<std::string> classes;
};

std::string view_key(const std::string& scene_id, bool top_view);

// --- label files -------------------------------------------------------------

// Five whitespace-separated tokens per line; blank lines ignored.
// Throws BadTokenCount, NonNumeric, OutOfRange (coords outside [0,1] +- 1e-9).
std::vector<LabeledBox> parse_labels(const std::string& text);

// Six tokens per line: "class conf cx cy w h".
std::vector<PredictedBox> parse_predictions(const std::string& text);

// 6-decimal fixed point, one box per line.
std::string serialize_labels(const std::vector<LabeledBox>& boxes);
std::string serialize_predictions(const std::vector<PredictedBox>& boxes);

// --- manifest ------------------------------------------------------------------

// JSON schema: {"scenes":[{"id","top","bottom","labels_top","labels_bottom",
// "category","split"?}],"classes":[...]}. Relative paths are kept verbatim.
Manifest parse_manifest(const std::string& json_text);
std::string serialize_manifest(const Manifest& m);
Manifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const Manifest& m);

// Loads every label file referenced by the manifest. Relative paths resolve
// against base_dir (typically the manifest's directory).
AnnotationSet load_annotations(const Manifest& m, const std::string& base_dir);

// --- split ---------------------------------------------------------------------

// Deterministic seeded shuffle stratified by category; per category,
// lround(fraction * n) scenes go to train. Whole scenes (both views) stay in
// one split. Throws EmptyManifest.
Manifest split_dataset(const Manifest& m, double train_fraction, std::uint64_t seed);

} // namespace traygrade
