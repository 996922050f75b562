#include "traygrade/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace traygrade {

using ordered_json = nlohmann::ordered_json;

void PipelineConfig::validate() const {
    if (grid_rows < 1 || grid_cols < 1) throw ConfigError("config: grid dimensions must be >= 1");
    if (mm_per_px <= 0.0) throw ConfigError("config: mm_per_px must be positive");
    if (detector_size < 32) throw ConfigError("config: detector_size too small");
    if (nms_iou < 0.0 || nms_iou > 1.0) throw ConfigError("config: nms_iou outside [0,1]");
    if (match_iou <= 0.0 || match_iou > 1.0) throw ConfigError("config: match_iou outside (0,1]");
    taxonomy.validate();
    if (calibration.rho <= 0.0) throw ConfigError("config: weight calibration rho must be > 0");
    if (backend != "oracle" && backend.rfind("model:", 0) != 0)
        throw ConfigError("config: backend must be 'oracle' or 'model:<path>'");
    const AugmentConfig& a = augment;
    for (double p : {a.fliplr, a.flipud, a.rotate90, a.erasing, a.mosaic, a.hsv_h, a.hsv_s, a.hsv_v,
                     a.translate, a.scale, a.saturation_range, a.brightness_range, a.exposure_range,
                     a.noise_max_frac})
        if (p < 0.0 || p > 1.0) throw ConfigError("config: augment fractions must be in [0,1]");
    if (a.blur_max_px < 0.0) throw ConfigError("config: blur_max_px must be >= 0");
}

const char* mirror_mode_name(MirrorMode m) {
    return m == MirrorMode::horizontal ? "horizontal" : "none";
}

MirrorMode mirror_mode_from_name(const std::string& name) {
    if (name == "horizontal") return MirrorMode::horizontal;
    if (name == "none") return MirrorMode::none;
    throw ConfigError("config: mirror_mode must be 'none' or 'horizontal'");
}

namespace {

const char* color_name(ClassTaxonomy::Color c) {
    switch (c) {
    case ClassTaxonomy::Color::black: return "black";
    case ClassTaxonomy::Color::golden: return "golden";
    default: return "none";
    }
}

ClassTaxonomy::Color color_from_name(const std::string& s) {
    if (s == "black") return ClassTaxonomy::Color::black;
    if (s == "golden") return ClassTaxonomy::Color::golden;
    if (s == "none") return ClassTaxonomy::Color::none;
    throw ConfigError("config: class color must be none|black|golden");
}

void check_keys(const ordered_json& j, const std::set<std::string>& allowed,
                const std::string& where) {
    for (const auto& item : j.items())
        if (!allowed.count(item.key()))
            throw ConfigError("config: unknown key '" + item.key() + "' in " + where);
}

ordered_json taxonomy_json(const ClassTaxonomy& t) {
    ordered_json arr = ordered_json::array();
    for (int i = 0; i < t.size(); ++i) {
        ordered_json c;
        c["name"] = t.names[i];
        c["severity"] = t.severity[i];
        c["first_grade"] = static_cast<bool>(t.first_grade[i]);
        c["color"] = color_name(t.color[i]);
        arr.push_back(std::move(c));
    }
    return arr;
}

ClassTaxonomy taxonomy_from_json(const ordered_json& arr) {
    ClassTaxonomy t;
    for (const ordered_json& c : arr) {
        check_keys(c, {"name", "severity", "first_grade", "color"}, "taxonomy class");
        t.names.push_back(c.at("name").get<std::string>());
        t.severity.push_back(c.at("severity").get<int>());
        t.first_grade.push_back(c.at("first_grade").get<bool>());
        t.color.push_back(color_from_name(c.at("color").get<std::string>()));
    }
    t.validate();
    return t;
}

ordered_json augment_json(const AugmentConfig& a) {
    ordered_json j;
    j["hsv_h"] = a.hsv_h;
    j["hsv_s"] = a.hsv_s;
    j["hsv_v"] = a.hsv_v;
    j["translate"] = a.translate;
    j["scale"] = a.scale;
    j["fliplr"] = a.fliplr;
    j["flipud"] = a.flipud;
    j["rotate90"] = a.rotate90;
    j["saturation_range"] = a.saturation_range;
    j["brightness_range"] = a.brightness_range;
    j["exposure_range"] = a.exposure_range;
    j["blur_max_px"] = a.blur_max_px;
    j["noise_max_frac"] = a.noise_max_frac;
    j["erasing"] = a.erasing;
    j["mosaic"] = a.mosaic;
    j["seed"] = a.seed;
    return j;
}

AugmentConfig augment_from_json(const ordered_json& j) {
    AugmentConfig a; // zeros, so omitted knobs stay off
    check_keys(j,
               {"hsv_h", "hsv_s", "hsv_v", "translate", "scale", "fliplr", "flipud", "rotate90",
                "saturation_range", "brightness_range", "exposure_range", "blur_max_px",
                "noise_max_frac", "erasing", "mosaic", "seed"},
               "augment");
    const auto num = [&](const char* key, double& out) {
        if (j.contains(key)) out = j.at(key).get<double>();
    };
    num("hsv_h", a.hsv_h);
    num("hsv_s", a.hsv_s);
    num("hsv_v", a.hsv_v);
    num("translate", a.translate);
    num("scale", a.scale);
    num("fliplr", a.fliplr);
    num("flipud", a.flipud);
    num("rotate90", a.rotate90);
    num("saturation_range", a.saturation_range);
    num("brightness_range", a.brightness_range);
    num("exposure_range", a.exposure_range);
    num("blur_max_px", a.blur_max_px);
    num("noise_max_frac", a.noise_max_frac);
    num("erasing", a.erasing);
    num("mosaic", a.mosaic);
    if (j.contains("seed")) a.seed = j.at("seed").get<std::uint64_t>();
    return a;
}

} // namespace

PipelineConfig parse_config(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    try {
        check_keys(j,
                   {"schema_version", "grid_rows", "grid_cols", "mm_per_px", "detector_size",
                    "nms_iou", "match_iou", "mirror_mode", "taxonomy", "weight_calibration",
                    "augment", "backend", "out_dir", "seed"},
                   "config");
        if (!j.contains("schema_version")) throw ConfigError("config: missing schema_version");
        if (j.at("schema_version").get<int>() != 1)
            throw ConfigError("config: unsupported schema version");

        PipelineConfig cfg;
        if (j.contains("grid_rows")) cfg.grid_rows = j.at("grid_rows").get<int>();
        if (j.contains("grid_cols")) cfg.grid_cols = j.at("grid_cols").get<int>();
        if (j.contains("mm_per_px")) cfg.mm_per_px = j.at("mm_per_px").get<double>();
        if (j.contains("detector_size")) cfg.detector_size = j.at("detector_size").get<int>();
        if (j.contains("nms_iou")) cfg.nms_iou = j.at("nms_iou").get<double>();
        if (j.contains("match_iou")) cfg.match_iou = j.at("match_iou").get<double>();
        if (j.contains("mirror_mode"))
            cfg.mirror_mode = mirror_mode_from_name(j.at("mirror_mode").get<std::string>());
        if (j.contains("taxonomy")) cfg.taxonomy = taxonomy_from_json(j.at("taxonomy"));
        if (!j.contains("weight_calibration"))
            throw ConfigError("config: missing weight_calibration (rho has no default)");
        {
            const ordered_json& w = j.at("weight_calibration");
            check_keys(w, {"rho", "intercept"}, "weight_calibration");
            if (!w.contains("rho")) throw ConfigError("config: weight_calibration.rho is required");
            cfg.calibration.rho = w.at("rho").get<double>();
            cfg.calibration.intercept =
                w.contains("intercept") ? w.at("intercept").get<double>() : 0.0;
        }
        if (j.contains("augment")) cfg.augment = augment_from_json(j.at("augment"));
        if (j.contains("backend")) cfg.backend = j.at("backend").get<std::string>();
        if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.validate();
        return cfg;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: bad field: ") + e.what());
    }
}

std::string serialize_config(const PipelineConfig& cfg) {
    ordered_json j;
    j["schema_version"] = 1;
    j["grid_rows"] = cfg.grid_rows;
    j["grid_cols"] = cfg.grid_cols;
    j["mm_per_px"] = cfg.mm_per_px;
    j["detector_size"] = cfg.detector_size;
    j["nms_iou"] = cfg.nms_iou;
    j["match_iou"] = cfg.match_iou;
    j["mirror_mode"] = mirror_mode_name(cfg.mirror_mode);
    j["taxonomy"] = taxonomy_json(cfg.taxonomy);
    j["weight_calibration"] = {{"rho", cfg.calibration.rho}, {"intercept", cfg.calibration.intercept}};
    j["augment"] = augment_json(cfg.augment);
    j["backend"] = cfg.backend;
    j["out_dir"] = cfg.out_dir;
    j["seed"] = cfg.seed;
    return j.dump(2) + "\n";
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace traygrade
