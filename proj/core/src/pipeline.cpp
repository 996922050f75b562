#include "traygrade/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "traygrade/align.hpp"

#include <nlohmann/json.hpp>

namespace traygrade {

namespace {

namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

double ms_since(clock_type::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
}

std::string resolve(const std::string& base_dir, const std::string& path) {
    if (path.empty() || fs::path(path).is_absolute() || base_dir.empty()) return path;
    return (fs::path(base_dir) / path).string();
}

// Rectifies one photographed view onto the physical-coordinate canvas.
Raster rectify_view(const Raster& img, int canvas_w, int canvas_h, double mm_per_px) {
    const Raster gray = to_gray(img);
    const BinaryMask mask = threshold(gray, otsu_threshold(gray));
    const Quad quad = largest_quad(mask);
    const Homography h = homography_from_quad(quad, canvas_w, canvas_h);
    Raster canvas = warp(img, h, canvas_w, canvas_h);
    canvas.mm_per_px = mm_per_px;
    return canvas;
}

Raster crop_region(const Raster& img, const DetBox& b) {
    int x0 = static_cast<int>(std::lround((b.cx - b.w / 2.0) * img.width));
    int y0 = static_cast<int>(std::lround((b.cy - b.h / 2.0) * img.height));
    int x1 = static_cast<int>(std::lround((b.cx + b.w / 2.0) * img.width));
    int y1 = static_cast<int>(std::lround((b.cy + b.h / 2.0) * img.height));
    x0 = std::clamp(x0, 0, img.width - 1);
    y0 = std::clamp(y0, 0, img.height - 1);
    x1 = std::clamp(x1, x0 + 1, img.width);
    y1 = std::clamp(y1, y0 + 1, img.height);
    Raster out(x1 - x0, y1 - y0, img.channels);
    out.mm_per_px = img.mm_per_px;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            for (int c = 0; c < img.channels; ++c) out.at(x - x0, y - y0, c) = img.at(x, y, c);
    return out;
}

int argmax_class(const std::vector<double>& scores) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(scores.size()); ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

std::vector<PredictedBox> to_predictions(const std::vector<DetBox>& boxes) {
    std::vector<PredictedBox> out;
    out.reserve(boxes.size());
    for (const DetBox& b : boxes)
        out.push_back(PredictedBox{b.class_id, b.conf, b.cx, b.cy, b.w, b.h});
    return out;
}

SceneOutcome process_scene(const PipelineConfig& cfg, const SceneEntry& entry,
                           InferenceBackend& backend, const std::string& base_dir) {
    SceneOutcome out;
    out.scene_id = entry.id;
    try {
        const int cw = canvas_width(cfg), ch = canvas_height(cfg);

        auto t0 = clock_type::now();
        const Raster img_top = read_image(resolve(base_dir, entry.top));
        const Raster img_bottom = read_image(resolve(base_dir, entry.bottom));
        out.timing.decode_ms = ms_since(t0);

        t0 = clock_type::now();
        const Raster canvas_top = rectify_view(img_top, cw, ch, cfg.mm_per_px);
        const Raster canvas_bottom = rectify_view(img_bottom, cw, ch, cfg.mm_per_px);
        out.timing.rectify_ms = ms_since(t0);

        t0 = clock_type::now();
        const LetterboxGeom geom(cw, ch, cfg.detector_size);
        const auto detect_view = [&](const Raster& canvas, bool top_view) {
            const Raster input = letterbox(canvas, cfg.detector_size);
            std::vector<DetBox> boxes = backend.detect_scene(input, view_key(entry.id, top_view));
            for (DetBox& b : boxes) b = geom.from_detector(b);
            return nms(boxes, cfg.nms_iou);
        };
        const std::vector<DetBox> det_top = detect_view(canvas_top, true);
        const std::vector<DetBox> det_bottom = detect_view(canvas_bottom, false);
        out.timing.detect_ms = ms_since(t0);

        t0 = clock_type::now();
        const GridLayout grid_top = sort_grid(det_top, cfg.grid_rows, cfg.grid_cols);
        const GridLayout grid_bottom = sort_grid(det_bottom, cfg.grid_rows, cfg.grid_cols);
        const ViewPairing pairing = pair_views(grid_top, grid_bottom, cfg.mirror_mode);
        out.unassigned = static_cast<long long>(grid_top.unassigned.size()) +
                         static_cast<long long>(grid_bottom.unassigned.size());
        out.timing.align_ms = ms_since(t0);

        t0 = clock_type::now();
        struct Classified {
            std::optional<int> top, bottom;
        };
        std::vector<Classified> classes(pairing.pairs.size());
        const auto classify = [&](const Raster& canvas, const DetBox& det) {
            const Raster crop = crop_region(canvas, det);
            return argmax_class(backend.classify_crop(crop, det.class_id));
        };
        for (std::size_t i = 0; i < pairing.pairs.size(); ++i) {
            const PairedCell& cell = pairing.pairs[i];
            if (cell.top) classes[i].top = classify(canvas_top, *cell.top);
            if (cell.bottom) classes[i].bottom = classify(canvas_bottom, *cell.bottom);
        }
        out.timing.classify_ms = ms_since(t0);

        t0 = clock_type::now();
        out.records.reserve(pairing.pairs.size());
        for (std::size_t i = 0; i < pairing.pairs.size(); ++i) {
            const PairedCell& cell = pairing.pairs[i];
            DateRecord rec;
            rec.row = cell.row;
            rec.col = cell.col;
            rec.top_class = classes[i].top;
            rec.bottom_class = classes[i].bottom;
            rec.final_class = fuse_classes(classes[i].top, classes[i].bottom, cfg.taxonomy);
            const Raster& area_canvas = cell.top ? canvas_top : canvas_bottom;
            const DetBox& area_box = cell.top ? *cell.top : *cell.bottom;
            const BinaryMask fg = date_foreground_mask(area_canvas, area_box);
            rec.area_mm2 = estimate_area(fg, cfg.mm_per_px);
            rec.weight_g = estimate_weight(rec.area_mm2, cfg.calibration);
            out.records.push_back(rec);
        }
        out.timing.grade_ms = ms_since(t0);

        t0 = clock_type::now();
        out.report = build_report(out.records, cfg.taxonomy, out.timing);
        out.report.scene_ids = {entry.id};
        out.report.unassigned_count = out.unassigned;
        out.preds_top = to_predictions(det_top);
        out.preds_bottom = to_predictions(det_bottom);
        out.timing.report_ms = ms_since(t0);
        out.report.timing = out.timing;
        out.ok = true;
    } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
        out.records.clear();
        out.preds_top.clear();
        out.preds_bottom.clear();
    }
    return out;
}

void accumulate(StageTimings& sum, const StageTimings& t) {
    sum.decode_ms += t.decode_ms;
    sum.rectify_ms += t.rectify_ms;
    sum.detect_ms += t.detect_ms;
    sum.align_ms += t.align_ms;
    sum.classify_ms += t.classify_ms;
    sum.grade_ms += t.grade_ms;
    sum.report_ms += t.report_ms;
}

} // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg, const Manifest& manifest,
                            InferenceBackend& backend, int workers,
                            const std::string& base_dir) {
    cfg.validate();
    if (manifest.scenes.empty()) throw EmptyManifest("run_pipeline: no scenes");

    const std::size_t n = manifest.scenes.size();
    std::vector<SceneOutcome> outcomes(n);
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            outcomes[i] = process_scene(cfg, manifest.scenes[i], backend, base_dir);
        }
    };
    const int nw = std::clamp(workers, 1, static_cast<int>(n));
    if (nw == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nw));
        for (int i = 0; i < nw; ++i) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }

    PipelineResult result;
    result.scenes = std::move(outcomes);
    std::stable_sort(result.scenes.begin(), result.scenes.end(),
                     [](const SceneOutcome& a, const SceneOutcome& b) {
                         return a.scene_id < b.scene_id;
                     });

    StageTimings total;
    std::vector<std::string> scene_ids;
    std::vector<std::string> failures;
    long long unassigned = 0;
    for (const SceneOutcome& s : result.scenes) {
        accumulate(total, s.timing);
        if (!s.ok) {
            failures.push_back(s.scene_id + ": " + s.error);
            continue;
        }
        scene_ids.push_back(s.scene_id);
        unassigned += s.unassigned;
        result.records.insert(result.records.end(), s.records.begin(), s.records.end());
    }
    result.aggregate = build_report(result.records, cfg.taxonomy, total);
    result.aggregate.scene_ids = std::move(scene_ids);
    result.aggregate.unassigned_count = unassigned;
    result.aggregate.failures = std::move(failures);
    return result;
}

std::unique_ptr<InferenceBackend> make_backend(const PipelineConfig& cfg,
                                               const Manifest& manifest,
                                               const std::string& base_dir) {
    if (cfg.backend == "oracle") {
        AnnotationSet ann = load_annotations(manifest, base_dir);
        const LetterboxGeom geom(canvas_width(cfg), canvas_height(cfg), cfg.detector_size);
        return oracle_backend(std::move(ann), 0.0, cfg.seed, geom);
    }
    if (cfg.backend.rfind("model:", 0) == 0)
        return model_backend(cfg.backend.substr(6), cfg.taxonomy.size());
    throw ConfigError("backend must be \"oracle\" or \"model:<path>\", got \"" + cfg.backend +
                      "\"");
}

EvalRun run_eval(const PipelineConfig& cfg, const Manifest& manifest,
                 const std::string& predictions_dir, const std::string& base_dir) {
    cfg.validate();
    if (manifest.scenes.empty()) throw EmptyManifest("run_eval: no scenes");
    if (!fs::is_directory(predictions_dir))
        throw MissingPredictions("run_eval: not a directory: " + predictions_dir);

    const AnnotationSet ann = load_annotations(manifest, base_dir);
    const int num_classes = manifest.classes.empty() ? cfg.taxonomy.size()
                                                     : static_cast<int>(manifest.classes.size());

    EvalRun run;
    std::vector<DetectionSample> samples;
    std::size_t files_found = 0;
    for (const SceneEntry& entry : manifest.scenes) {
        for (const bool top_view : {true, false}) {
            const std::string key = view_key(entry.id, top_view);
            DetectionSample sample;
            for (const LabeledBox& b : ann.views.at(key).boxes)
                sample.gts.push_back(DetBox{b.class_id, b.cx, b.cy, b.w, b.h, 1.0});

            const fs::path pred_path =
                fs::path(predictions_dir) / (entry.id + (top_view ? "_top.txt" : "_bottom.txt"));
            std::ifstream in(pred_path, std::ios::binary);
            if (in) {
                std::ostringstream text;
                text << in.rdbuf();
                for (const PredictedBox& p : parse_predictions(text.str()))
                    sample.preds.push_back(DetBox{p.class_id, p.cx, p.cy, p.w, p.h, p.conf});
                ++files_found;
            } else {
                run.notes.push_back(key + ": no predictions file; scored as zero predictions");
            }
            samples.push_back(std::move(sample));
        }
    }
    if (files_found == 0)
        throw MissingPredictions("run_eval: no prediction files in " + predictions_dir);

    run.summary = map_range(samples, coco_thresholds(), num_classes);

    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["thresholds"] = run.summary.thresholds;
    nlohmann::ordered_json ap = nlohmann::ordered_json::array();
    for (const auto& row : run.summary.ap) {
        nlohmann::ordered_json jr = nlohmann::ordered_json::array();
        for (const auto& v : row) {
            if (v)
                jr.push_back(*v);
            else
                jr.push_back(nullptr);
        }
        ap.push_back(std::move(jr));
    }
    j["ap"] = std::move(ap);
    j["map50"] = run.summary.map50;
    j["map50_95"] = run.summary.map50_95;
    j["precision"] = run.summary.precision;
    j["recall"] = run.summary.recall;
    j["f1"] = run.summary.f1;
    j["miou"] = run.summary.miou;
    j["confusion"] = run.summary.confusion;
    j["notes"] = run.notes;
    run.summary_json = j.dump(2) + "\n";

    DetectionTableRow det_row;
    det_row.model = cfg.backend;
    det_row.f1 = run.summary.f1;
    det_row.precision = run.summary.precision;
    det_row.recall = run.summary.recall;
    det_row.miou = run.summary.miou;
    det_row.map50_95 = run.summary.map50_95;
    det_row.inference_ms = 0.0;
    det_row.resource_note = "n/a";
    run.tables_text = detection_table({det_row});

    const int k = num_classes;
    std::vector<std::vector<long long>> cm(static_cast<std::size_t>(k),
                                           std::vector<long long>(static_cast<std::size_t>(k), 0));
    long long matched = 0;
    for (int i = 0; i < k; ++i)
        for (int c = 0; c < k; ++c) {
            cm[i][c] = run.summary.confusion[i][c];
            matched += cm[i][c];
        }
    if (matched > 0) {
        const ClassificationMetrics cls = summary_metrics(cm);
        ClassificationTableRow cls_row;
        cls_row.model = cfg.backend;
        cls_row.accuracy = cls.accuracy;
        cls_row.f1 = cls.f1;
        cls_row.precision = cls.precision;
        cls_row.recall = cls.recall;
        cls_row.inference_ms = 0.0;
        cls_row.resource_note = "n/a";
        run.tables_text += "\n" + classification_table({cls_row});
    }
    return run;
}

} // namespace traygrade
