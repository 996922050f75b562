#pragma once

#include <cstdint>
#include <string>

#include "traygrade/align.hpp"
#include "traygrade/augment.hpp"
#include "traygrade/grade.hpp"

namespace traygrade {

// Everything the pipeline needs for a run, loadable from one JSON document.
// The weight calibration has no shipped default: configs must state rho.
struct PipelineConfig {
    int grid_rows = 5;
    int grid_cols = 10;
    double mm_per_px = 0.25;   // rectified canvas scale
    int detector_size = 1280;  // square detector input edge
    double nms_iou = 0.45;
    double match_iou = 0.5;
    MirrorMode mirror_mode = MirrorMode::horizontal;
    ClassTaxonomy taxonomy = ClassTaxonomy::default_eleven();
    WeightCalibration calibration{1.0, 0.0}; // fixture identity; JSON must set rho
    AugmentConfig augment = AugmentConfig::customized();
    std::string backend = "oracle"; // "oracle" or "model:<path>"
    std::string out_dir = "out";
    std::uint64_t seed = 0;

    void validate() const; // throws ConfigError
};

// JSON I/O with a mandatory schema_version field (currently 1). Unknown
// keys are rejected so typos fail loudly. Throws ConfigError.
PipelineConfig parse_config(const std::string& json_text);
std::string serialize_config(const PipelineConfig& cfg);
PipelineConfig load_config(const std::string& path); // throws IoError

const char* mirror_mode_name(MirrorMode m);
MirrorMode mirror_mode_from_name(const std::string& name); // throws ConfigError

} // namespace traygrade
