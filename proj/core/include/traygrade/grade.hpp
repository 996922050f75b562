#pragma once

#include <optional>
#include <string>
#include <vector>

#include "traygrade/detect.hpp"
#include "traygrade/error.hpp"
#include "traygrade/raster.hpp"

namespace traygrade {

// Configurable grading classes. Severity rank orders classes from best (0)
// to worst; exactly the first-grade classes carry a color tag.
struct ClassTaxonomy {
    enum class Color { none, black, golden };

    std::vector<std::string> names;
    std::vector<int> severity;
    std::vector<bool> first_grade;
    std::vector<Color> color;

    int size() const { return static_cast<int>(names.size()); }
    void validate() const; // throws ConfigError on inconsistent fields

    // The stock eleven-class taxonomy: two first grades by color, paired
    // skin-separation severities, disintegrated, mashed, mold, and two
    // reserved slots for site-specific defects.
    static ClassTaxonomy default_eleven();
};

// One graded date: tray cell, per-view classes, fused grade, and physical
// estimates.
struct DateRecord {
    int row = 0;
    int col = 0;
    std::optional<int> top_class;
    std::optional<int> bottom_class;
    int final_class = 0;
    double area_mm2 = 0.0;
    double weight_g = 0.0;
};

// Wall-clock milliseconds per pipeline stage. Reported alongside a batch,
// never inside its canonical serialization (reports stay byte-deterministic).
struct StageTimings {
    double decode_ms = 0.0;
    double rectify_ms = 0.0;
    double detect_ms = 0.0;
    double align_ms = 0.0;
    double classify_ms = 0.0;
    double grade_ms = 0.0;
    double report_ms = 0.0;
};

struct BatchReport {
    std::vector<std::string> scene_ids;
    long long total_dates = 0;
    long long total_defective = 0;
    std::vector<long long> class_counts; // indexed by class id
    long long first_grade_black = 0;
    long long first_grade_golden = 0;
    double mean_area_mm2 = 0.0;
    double mean_weight_g = 0.0;
    long long unassigned_count = 0;
    bool empty = false;                 // no records contributed
    std::vector<std::string> failures;  // "scene_id: reason" entries
    StageTimings timing;
};

// Linear areal-density weight model: grams = rho * mm^2 + intercept.
struct WeightCalibration {
    double rho = 0.0; // g per mm^2; must be > 0, supplied by config
    double intercept = 0.0;
};

// Worst severity wins; equal severities take the top view; one view present
// passes through. Throws BothViewsMissing, UnknownClass.
int fuse_classes(std::optional<int> top, std::optional<int> bottom, const ClassTaxonomy& tax);

// Dark-on-white segmentation of a detection crop: the box region is cut from
// the image, thresholded (separating threshold chosen from the crop's own
// histogram), and pixels darker than the threshold form the mask. Box
// coordinates are normalized to the image. Throws BoxOutOfRange.
BinaryMask date_foreground_mask(const Raster& img, const DetBox& box);

// True-pixel count times mm_per_px squared. Throws MissingScale.
double estimate_area(const BinaryMask& mask, double mm_per_px);

// rho * area + intercept, floored at zero.
double estimate_weight(double area_mm2, const WeightCalibration& cal);

// Aggregates records into counts and means; empty input yields zero counts
// with the empty flag set. scene_ids/unassigned/failures are the caller's.
BatchReport build_report(const std::vector<DateRecord>& records, const ClassTaxonomy& tax,
                         const StageTimings& timing);

// --- serialization ---------------------------------------------------------

// Canonical JSON document (stable key order, schema_version field). Timings
// are excluded so identical runs serialize byte-identically; serialize them
// separately with serialize_timings.
std::string serialize_report(const BatchReport& r, const std::vector<DateRecord>& records);

struct ParsedReport {
    BatchReport report;
    std::vector<DateRecord> records;
};
ParsedReport parse_report(const std::string& json_text); // throws ConfigError

std::string serialize_timings(const StageTimings& t);

// One row per record plus a trailing summary row; class cells hold taxonomy
// names.
std::string report_csv(const BatchReport& r, const std::vector<DateRecord>& records,
                       const ClassTaxonomy& tax);

} // namespace traygrade
