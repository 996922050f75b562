#include "traygrade/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "traygrade/rng.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace traygrade {

std::string view_key(const std::string& scene_id, bool top_view) {
    return scene_id + (top_view ? ":top" : ":bottom");
}

namespace {

double parse_coord(const std::string& tok, int line_no) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        throw NonNumeric("line " + std::to_string(line_no) + ": " + tok);
    }
    if (used != tok.size()) throw NonNumeric("line " + std::to_string(line_no) + ": " + tok);
    if (v < -1e-9 || v > 1.0 + 1e-9)
        throw OutOfRange("line " + std::to_string(line_no) + ": coordinate " + tok);
    return v;
}

int parse_class(const std::string& tok, int line_no) {
    for (char c : tok)
        if (c < '0' || c > '9') throw NonNumeric("line " + std::to_string(line_no) + ": class " + tok);
    return std::stoi(tok);
}

double parse_conf(const std::string& tok, int line_no) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        throw NonNumeric("line " + std::to_string(line_no) + ": " + tok);
    }
    if (used != tok.size()) throw NonNumeric("line " + std::to_string(line_no) + ": " + tok);
    return v;
}

std::vector<std::vector<std::string>> tokenize_lines(const std::string& text) {
    std::vector<std::vector<std::string>> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::vector<std::string> toks;
        std::string tok;
        while (ls >> tok) toks.push_back(tok);
        lines.push_back(std::move(toks));
    }
    return lines;
}

std::string fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

std::vector<LabeledBox> parse_labels(const std::string& text) {
    std::vector<LabeledBox> out;
    int line_no = 0;
    for (const auto& toks : tokenize_lines(text)) {
        ++line_no;
        if (toks.empty()) continue;
        if (toks.size() != 5)
            throw BadTokenCount("line " + std::to_string(line_no) + ": expected 5 tokens, got " +
                                std::to_string(toks.size()));
        LabeledBox b;
        b.class_id = parse_class(toks[0], line_no);
        b.cx = parse_coord(toks[1], line_no);
        b.cy = parse_coord(toks[2], line_no);
        b.w = parse_coord(toks[3], line_no);
        b.h = parse_coord(toks[4], line_no);
        out.push_back(b);
    }
    return out;
}

std::vector<PredictedBox> parse_predictions(const std::string& text) {
    std::vector<PredictedBox> out;
    int line_no = 0;
    for (const auto& toks : tokenize_lines(text)) {
        ++line_no;
        if (toks.empty()) continue;
        if (toks.size() != 6)
            throw BadTokenCount("line " + std::to_string(line_no) + ": expected 6 tokens, got " +
                                std::to_string(toks.size()));
        PredictedBox b;
        b.class_id = parse_class(toks[0], line_no);
        b.conf = parse_conf(toks[1], line_no);
        b.cx = parse_coord(toks[2], line_no);
        b.cy = parse_coord(toks[3], line_no);
        b.w = parse_coord(toks[4], line_no);
        b.h = parse_coord(toks[5], line_no);
        out.push_back(b);
    }
    return out;
}

std::string serialize_labels(const std::vector<LabeledBox>& boxes) {
    std::string out;
    for (const auto& b : boxes) {
        out += std::to_string(b.class_id) + " " + fixed6(b.cx) + " " + fixed6(b.cy) + " " +
               fixed6(b.w) + " " + fixed6(b.h) + "\n";
    }
    return out;
}

std::string serialize_predictions(const std::vector<PredictedBox>& boxes) {
    std::string out;
    for (const auto& b : boxes) {
        out += std::to_string(b.class_id) + " " + fixed6(b.conf) + " " + fixed6(b.cx) + " " +
               fixed6(b.cy) + " " + fixed6(b.w) + " " + fixed6(b.h) + "\n";
    }
    return out;
}

// --- manifest -------------------------------------------------------------------

Manifest parse_manifest(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
    Manifest m;
    if (j.contains("classes"))
        for (const auto& c : j.at("classes")) m.classes.push_back(c.get<std::string>());
    for (const auto& s : j.at("scenes")) {
        SceneEntry e;
        e.id = s.at("id").get<std::string>();
        e.top = s.at("top").get<std::string>();
        e.bottom = s.at("bottom").get<std::string>();
        e.labels_top = s.at("labels_top").get<std::string>();
        e.labels_bottom = s.at("labels_bottom").get<std::string>();
        e.category = s.value("category", std::string{});
        if (s.contains("split") && !s.at("split").is_null()) {
            const auto sp = s.at("split").get<std::string>();
            if (sp == "train") e.split = Split::train;
            else if (sp == "test") e.split = Split::test;
            else throw ConfigError("manifest: unknown split '" + sp + "'");
        }
        m.scenes.push_back(std::move(e));
    }
    // Scene ids must be unique.
    std::vector<std::string> ids;
    for (const auto& s : m.scenes) ids.push_back(s.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw ConfigError("manifest: duplicate scene id");
    return m;
}

std::string serialize_manifest(const Manifest& m) {
    ordered_json j;
    j["scenes"] = ordered_json::array();
    for (const auto& s : m.scenes) {
        ordered_json e;
        e["id"] = s.id;
        e["top"] = s.top;
        e["bottom"] = s.bottom;
        e["labels_top"] = s.labels_top;
        e["labels_bottom"] = s.labels_bottom;
        e["category"] = s.category;
        if (s.split) e["split"] = (*s.split == Split::train) ? "train" : "test";
        j["scenes"].push_back(std::move(e));
    }
    j["classes"] = m.classes;
    return j.dump(2) + "\n";
}

Manifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_manifest(ss.str());
}

void save_manifest(const std::string& path, const Manifest& m) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << serialize_manifest(m);
}

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
    fs::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (fs::path(base_dir) / p).string();
}

std::vector<LabeledBox> read_label_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open labels " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_labels(ss.str());
}

} // namespace

AnnotationSet load_annotations(const Manifest& m, const std::string& base_dir) {
    AnnotationSet set;
    set.classes = m.classes;
    for (const auto& s : m.scenes) {
        set.views[view_key(s.id, true)] =
            ViewAnnotations{resolve(base_dir, s.top), read_label_file(resolve(base_dir, s.labels_top))};
        set.views[view_key(s.id, false)] =
            ViewAnnotations{resolve(base_dir, s.bottom),
                            read_label_file(resolve(base_dir, s.labels_bottom))};
    }
    return set;
}

// --- split ----------------------------------------------------------------------

Manifest split_dataset(const Manifest& m, double train_fraction, std::uint64_t seed) {
    if (m.scenes.empty()) throw EmptyManifest("cannot split an empty manifest");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train fraction must be in (0,1)");

    // Group scene indices by category, deterministically (sorted categories,
    // manifest order within a category).
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < m.scenes.size(); ++i)
        groups[m.scenes[i].category].push_back(i);

    // One generator consumed in sorted-category order keeps the split a pure
    // function of (manifest, fraction, seed).
    Manifest out = m;
    Rng rng(seed);
    for (auto& [category, indices] : groups) {
        rng.shuffle(indices);
        const auto n_train = static_cast<std::size_t>(
            std::lround(train_fraction * static_cast<double>(indices.size())));
        for (std::size_t k = 0; k < indices.size(); ++k)
            out.scenes[indices[k]].split = k < n_train ? Split::train : Split::test;
    }
    return out;
}

} // namespace traygrade
