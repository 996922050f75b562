#include "traygrade/grade.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace traygrade {

using ordered_json = nlohmann::ordered_json;

void ClassTaxonomy::validate() const {
    const std::size_t n = names.size();
    if (n == 0) throw ConfigError("taxonomy: no classes");
    if (severity.size() != n || first_grade.size() != n || color.size() != n)
        throw ConfigError("taxonomy: field lengths differ");
    std::set<std::string> seen(names.begin(), names.end());
    if (seen.size() != n) throw ConfigError("taxonomy: duplicate class name");
    for (std::size_t i = 0; i < n; ++i) {
        if (first_grade[i] != (color[i] != Color::none))
            throw ConfigError("taxonomy: color tag must accompany exactly the first-grade classes");
    }
}

ClassTaxonomy ClassTaxonomy::default_eleven() {
    ClassTaxonomy t;
    const auto add = [&](const char* name, int sev, Color col) {
        t.names.emplace_back(name);
        t.severity.push_back(sev);
        t.first_grade.push_back(col != Color::none);
        t.color.push_back(col);
    };
    add("First Grade Black", 0, Color::black);
    add("First Grade Golden", 0, Color::golden);
    add("Low Skin Separated Black", 1, Color::none);
    add("Low Skin Separated Golden", 1, Color::none);
    add("Skin Separated Black", 2, Color::none);
    add("Skin Separated Golden", 2, Color::none);
    add("Disintegrated", 3, Color::none);
    add("Mashed", 4, Color::none);
    add("Mold", 5, Color::none);
    add("Reserved 1", 6, Color::none);
    add("Reserved 2", 7, Color::none);
    t.validate();
    return t;
}

int fuse_classes(std::optional<int> top, std::optional<int> bottom, const ClassTaxonomy& tax) {
    if (!top && !bottom) throw BothViewsMissing("fuse_classes: no view present");
    const auto check = [&](int id) {
        if (id < 0 || id >= tax.size()) throw UnknownClass("fuse_classes: class id out of range");
    };
    if (top) check(*top);
    if (bottom) check(*bottom);
    if (!top) return *bottom;
    if (!bottom) return *top;
    return tax.severity[*bottom] > tax.severity[*top] ? *bottom : *top;
}

BinaryMask date_foreground_mask(const Raster& img, const DetBox& box) {
    const double eps = 1e-9;
    const double x1 = box.cx - box.w / 2.0, x2 = box.cx + box.w / 2.0;
    const double y1 = box.cy - box.h / 2.0, y2 = box.cy + box.h / 2.0;
    if (x1 < -eps || y1 < -eps || x2 > 1.0 + eps || y2 > 1.0 + eps || box.w <= 0.0 || box.h <= 0.0)
        throw BoxOutOfRange("date_foreground_mask: box outside the unit square");

    const int px1 = std::clamp(static_cast<int>(std::floor(x1 * img.width)), 0, img.width - 1);
    const int py1 = std::clamp(static_cast<int>(std::floor(y1 * img.height)), 0, img.height - 1);
    const int px2 = std::clamp(static_cast<int>(std::ceil(x2 * img.width)), px1 + 1, img.width);
    const int py2 = std::clamp(static_cast<int>(std::ceil(y2 * img.height)), py1 + 1, img.height);

    Raster crop(px2 - px1, py2 - py1, img.channels);
    for (int y = py1; y < py2; ++y)
        for (int x = px1; x < px2; ++x)
            for (int c = 0; c < img.channels; ++c)
                crop.at(x - px1, y - py1, c) = img.at(x, y, c);

    const Raster gray = to_gray(crop);
    const int t = otsu_threshold(gray);
    // threshold() keeps >= t; the date is the dark side.
    BinaryMask fg(gray.width, gray.height);
    for (int y = 0; y < gray.height; ++y)
        for (int x = 0; x < gray.width; ++x) fg.set(x, y, gray.at(x, y) < t);
    return fg;
}

double estimate_area(const BinaryMask& mask, double mm_per_px) {
    if (mm_per_px <= 0.0) throw MissingScale("estimate_area: mm_per_px must be positive");
    return static_cast<double>(mask.count()) * mm_per_px * mm_per_px;
}

double estimate_weight(double area_mm2, const WeightCalibration& cal) {
    return std::max(0.0, cal.rho * area_mm2 + cal.intercept);
}

BatchReport build_report(const std::vector<DateRecord>& records, const ClassTaxonomy& tax,
                         const StageTimings& timing) {
    BatchReport r;
    r.timing = timing;
    r.class_counts.assign(tax.size(), 0);
    r.total_dates = static_cast<long long>(records.size());
    if (records.empty()) {
        r.empty = true;
        return r;
    }

    double area_sum = 0.0, weight_sum = 0.0;
    for (const DateRecord& rec : records) {
        if (rec.final_class < 0 || rec.final_class >= tax.size())
            throw UnknownClass("build_report: record class id out of range");
        ++r.class_counts[rec.final_class];
        if (tax.first_grade[rec.final_class]) {
            if (tax.color[rec.final_class] == ClassTaxonomy::Color::black) ++r.first_grade_black;
            if (tax.color[rec.final_class] == ClassTaxonomy::Color::golden) ++r.first_grade_golden;
        }
        area_sum += rec.area_mm2;
        weight_sum += rec.weight_g;
    }
    r.total_defective = r.total_dates - r.first_grade_black - r.first_grade_golden;
    r.mean_area_mm2 = area_sum / static_cast<double>(records.size());
    r.mean_weight_g = weight_sum / static_cast<double>(records.size());
    return r;
}

// --- serialization ---------------------------------------------------------

namespace {

ordered_json record_json(const DateRecord& rec) {
    ordered_json j;
    j["row"] = rec.row;
    j["col"] = rec.col;
    j["top_class"] = rec.top_class ? ordered_json(*rec.top_class) : ordered_json(nullptr);
    j["bottom_class"] = rec.bottom_class ? ordered_json(*rec.bottom_class) : ordered_json(nullptr);
    j["final_class"] = rec.final_class;
    j["area_mm2"] = rec.area_mm2;
    j["weight_g"] = rec.weight_g;
    return j;
}

DateRecord record_from_json(const ordered_json& j) {
    DateRecord rec;
    rec.row = j.at("row").get<int>();
    rec.col = j.at("col").get<int>();
    if (!j.at("top_class").is_null()) rec.top_class = j.at("top_class").get<int>();
    if (!j.at("bottom_class").is_null()) rec.bottom_class = j.at("bottom_class").get<int>();
    rec.final_class = j.at("final_class").get<int>();
    rec.area_mm2 = j.at("area_mm2").get<double>();
    rec.weight_g = j.at("weight_g").get<double>();
    return rec;
}

} // namespace

std::string serialize_report(const BatchReport& r, const std::vector<DateRecord>& records) {
    ordered_json j;
    j["schema_version"] = 1;
    j["scene_ids"] = r.scene_ids;
    j["total_dates"] = r.total_dates;
    j["total_defective"] = r.total_defective;
    j["class_counts"] = r.class_counts;
    j["first_grade_black"] = r.first_grade_black;
    j["first_grade_golden"] = r.first_grade_golden;
    j["mean_area_mm2"] = r.mean_area_mm2;
    j["mean_weight_g"] = r.mean_weight_g;
    j["unassigned_count"] = r.unassigned_count;
    j["empty"] = r.empty;
    j["failures"] = r.failures;
    ordered_json recs = ordered_json::array();
    for (const DateRecord& rec : records) recs.push_back(record_json(rec));
    j["records"] = std::move(recs);
    return j.dump(2) + "\n";
}

ParsedReport parse_report(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("report: invalid JSON: ") + e.what());
    }
    try {
        if (j.at("schema_version").get<int>() != 1)
            throw ConfigError("report: unsupported schema version");
        ParsedReport out;
        BatchReport& r = out.report;
        r.scene_ids = j.at("scene_ids").get<std::vector<std::string>>();
        r.total_dates = j.at("total_dates").get<long long>();
        r.total_defective = j.at("total_defective").get<long long>();
        r.class_counts = j.at("class_counts").get<std::vector<long long>>();
        r.first_grade_black = j.at("first_grade_black").get<long long>();
        r.first_grade_golden = j.at("first_grade_golden").get<long long>();
        r.mean_area_mm2 = j.at("mean_area_mm2").get<double>();
        r.mean_weight_g = j.at("mean_weight_g").get<double>();
        r.unassigned_count = j.at("unassigned_count").get<long long>();
        r.empty = j.at("empty").get<bool>();
        r.failures = j.at("failures").get<std::vector<std::string>>();
        for (const ordered_json& rec : j.at("records")) out.records.push_back(record_from_json(rec));
        return out;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("report: bad field: ") + e.what());
    }
}

std::string serialize_timings(const StageTimings& t) {
    ordered_json j;
    j["decode_ms"] = t.decode_ms;
    j["rectify_ms"] = t.rectify_ms;
    j["detect_ms"] = t.detect_ms;
    j["align_ms"] = t.align_ms;
    j["classify_ms"] = t.classify_ms;
    j["grade_ms"] = t.grade_ms;
    j["report_ms"] = t.report_ms;
    return j.dump(2) + "\n";
}

std::string report_csv(const BatchReport& r, const std::vector<DateRecord>& records,
                       const ClassTaxonomy& tax) {
    std::ostringstream out;
    const auto name = [&](std::optional<int> id) -> std::string {
        if (!id) return "";
        if (*id < 0 || *id >= tax.size()) throw UnknownClass("report_csv: class id out of range");
        return tax.names[*id];
    };
    out << "row,col,top_class,bottom_class,final_class,area_mm2,weight_g\n";
    out.precision(6);
    out << std::fixed;
    for (const DateRecord& rec : records) {
        out << rec.row << ',' << rec.col << ',' << name(rec.top_class) << ','
            << name(rec.bottom_class) << ',' << name(rec.final_class) << ',' << rec.area_mm2 << ','
            << rec.weight_g << '\n';
    }
    out << "summary,total_dates=" << r.total_dates << ",total_defective=" << r.total_defective
        << ",first_grade_black=" << r.first_grade_black
        << ",first_grade_golden=" << r.first_grade_golden << ',' << r.mean_area_mm2 << ','
        << r.mean_weight_g << '\n';
    return out.str();
}

} // namespace traygrade
