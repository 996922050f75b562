#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "temp_dir.hpp"
#include "traygrade/augment.hpp"
#include "traygrade/fixtures.hpp"
#include "traygrade/pipeline.hpp"

using namespace traygrade;
namespace fs = std::filesystem;

namespace {

FixtureParams small_params(const std::string& out_dir, int scenes = 3) {
    FixtureParams p;
    p.rows = 5;
    p.cols = 10;
    p.scenes = scenes;
    p.seed = 7;
    p.center_jitter = 0.0;
    p.corner_jitter = 0.10;
    p.out_dir = out_dir;
    return p;
}

PipelineConfig small_config() {
    PipelineConfig cfg;
    cfg.mm_per_px = 0.5; // 640 x 900 canvas keeps the tests quick
    cfg.detector_size = 640;
    cfg.seed = 7;
    return cfg;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out);
    out << text;
}

} // namespace

TEST_SUITE("pipeline") {

TEST_CASE("rendered views are deterministic and mirror consistently") {
    const FixtureParams p = small_params("");

    const RenderedView top = render_view(p, 0, false);
    const RenderedView again = render_view(p, 0, false);
    CHECK(top.image.data == again.image.data);
    REQUIRE(top.labels.size() == again.labels.size());
    for (std::size_t i = 0; i < top.labels.size(); ++i) {
        CHECK(top.labels[i].class_id == again.labels[i].class_id);
        CHECK(top.labels[i].cx == again.labels[i].cx);
        CHECK(top.labels[i].cy == again.labels[i].cy);
    }
    for (int c = 0; c < 4; ++c) {
        CHECK(top.tray.corners[c].x == again.tray.corners[c].x);
        CHECK(top.tray.corners[c].y == again.tray.corners[c].y);
    }

    REQUIRE(top.labels.size() == 50);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 10; ++c) {
            const LabeledBox& b = top.labels[static_cast<std::size_t>(r) * 10 + c];
            CHECK(b.cx == doctest::Approx((c + 0.5) / 10.0).epsilon(1e-12));
            CHECK(b.cy == doctest::Approx((r + 0.5) / 5.0).epsilon(1e-12));
            CHECK(b.w == fixture_box_w);
            CHECK(b.h == fixture_box_h);
            CHECK(b.class_id >= 0);
            CHECK(b.class_id < p.num_classes);
        }

    // The underside view keeps date identities but mirrors x.
    const RenderedView bottom = render_view(p, 0, true);
    REQUIRE(bottom.labels.size() == 50);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(bottom.labels[i].class_id == top.labels[i].class_id);
        CHECK(bottom.labels[i].cx == mirror_unit(top.labels[i].cx));
        CHECK(bottom.labels[i].cy == top.labels[i].cy);
    }
    // Different tray pose per view, same lattice.
    CHECK(bottom.image.data != top.image.data);
}

TEST_CASE("fixture generation writes a loadable, reproducible dataset") {
    TempDir td;
    const Manifest m = generate_fixtures(small_params(td.file("a")));
    REQUIRE(m.scenes.size() == 3);
    CHECK(m.classes.size() == 11);
    CHECK(m.scenes[0].id == "scene_000");
    CHECK_FALSE(m.scenes[0].split.has_value());

    for (const SceneEntry& s : m.scenes) {
        CHECK(fs::exists(fs::path(td.file("a")) / s.top));
        CHECK(fs::exists(fs::path(td.file("a")) / s.bottom));
        CHECK(fs::exists(fs::path(td.file("a")) / s.labels_top));
        CHECK(fs::exists(fs::path(td.file("a")) / s.labels_bottom));
    }
    const Manifest loaded = load_manifest(td.file("a/manifest.json"));
    CHECK(loaded.scenes.size() == m.scenes.size());
    CHECK(loaded.classes == m.classes);

    // Same parameters, same bytes.
    generate_fixtures(small_params(td.file("b")));
    CHECK(read_file(td.file("a/manifest.json")) == read_file(td.file("b/manifest.json")));
    CHECK(read_file(td.file("a/images/scene_000_top.pgm")) ==
          read_file(td.file("b/images/scene_000_top.pgm")));
    CHECK(read_file(td.file("a/labels/scene_002_bottom.txt")) ==
          read_file(td.file("b/labels/scene_002_bottom.txt")));
}

TEST_CASE("exact replay grades every date with its annotated class") {
    TempDir td;
    const Manifest m = generate_fixtures(small_params(td.str()));
    const PipelineConfig cfg = small_config();
    const auto backend = make_backend(cfg, m, td.str());
    const PipelineResult result = run_pipeline(cfg, m, *backend, 2, td.str());

    REQUIRE(result.scenes.size() == 3);
    CHECK(result.aggregate.scene_ids ==
          std::vector<std::string>{"scene_000", "scene_001", "scene_002"});
    CHECK(result.aggregate.total_dates == 150);
    CHECK(result.aggregate.unassigned_count == 0);
    CHECK(result.aggregate.failures.empty());
    CHECK_FALSE(result.aggregate.empty);

    // Aggregate class counts equal the label histogram.
    std::vector<long long> histogram(11, 0);
    for (const SceneEntry& s : m.scenes)
        for (const LabeledBox& b : parse_labels(read_file(td.file(s.labels_top))))
            ++histogram[b.class_id];
    CHECK(result.aggregate.class_counts == histogram);

    // Each record carries the class annotated at its lattice cell.
    for (const SceneOutcome& scene : result.scenes) {
        REQUIRE(scene.ok);
        CHECK(scene.error.empty());
        CHECK(scene.report.scene_ids == std::vector<std::string>{scene.scene_id});
        CHECK(scene.preds_top.size() == 50);
        CHECK(scene.preds_bottom.size() == 50);
        REQUIRE(scene.records.size() == 50);

        const SceneEntry* entry = nullptr;
        for (const SceneEntry& s : m.scenes)
            if (s.id == scene.scene_id) entry = &s;
        REQUIRE(entry != nullptr);
        const auto labels = parse_labels(read_file(td.file(entry->labels_top)));
        REQUIRE(labels.size() == 50);

        for (const DateRecord& rec : scene.records) {
            REQUIRE(rec.top_class.has_value());
            REQUIRE(rec.bottom_class.has_value());
            CHECK(*rec.top_class == *rec.bottom_class);
            const LabeledBox& truth = labels[static_cast<std::size_t>(rec.row) * 10 + rec.col];
            CHECK(rec.final_class == truth.class_id);
            CHECK(rec.area_mm2 > 0.0);
            CHECK(rec.weight_g > 0.0);
        }
    }
}

TEST_CASE("results do not depend on the worker count") {
    TempDir td;
    const Manifest m = generate_fixtures(small_params(td.str()));
    const PipelineConfig cfg = small_config();

    std::string baseline;
    for (const int workers : {1, 2, 3, 0}) {
        const auto backend = make_backend(cfg, m, td.str());
        const PipelineResult r = run_pipeline(cfg, m, *backend, workers, td.str());
        const std::string text = serialize_report(r.aggregate, r.records);
        if (baseline.empty())
            baseline = text;
        else
            CHECK(text == baseline);
    }
}

TEST_CASE("one broken scene never poisons the batch") {
    TempDir td;
    const Manifest m = generate_fixtures(small_params(td.str()));
    write_file(td.file("images/scene_001_top.pgm"), "this is not an image");

    const PipelineConfig cfg = small_config();
    const auto backend = make_backend(cfg, m, td.str());
    const PipelineResult result = run_pipeline(cfg, m, *backend, 2, td.str());

    REQUIRE(result.scenes.size() == 3);
    CHECK(result.scenes[0].ok);
    CHECK_FALSE(result.scenes[1].ok);
    CHECK(result.scenes[2].ok);
    CHECK_FALSE(result.scenes[1].error.empty());
    CHECK(result.scenes[1].records.empty());

    CHECK(result.aggregate.total_dates == 100);
    CHECK(result.aggregate.scene_ids == std::vector<std::string>{"scene_000", "scene_002"});
    REQUIRE(result.aggregate.failures.size() == 1);
    CHECK(result.aggregate.failures[0].rfind("scene_001: ", 0) == 0);
}

TEST_CASE("pipeline input validation") {
    TempDir td;
    const Manifest m = generate_fixtures(small_params(td.str()));
    PipelineConfig cfg = small_config();

    const auto backend = make_backend(cfg, m, td.str());
    CHECK_THROWS_AS(run_pipeline(cfg, Manifest{}, *backend, 1, td.str()), EmptyManifest);

    PipelineConfig bad = cfg;
    bad.calibration.rho = 0.0;
    CHECK_THROWS_AS(run_pipeline(bad, m, *backend, 1, td.str()), ConfigError);

    PipelineConfig odd = cfg;
    odd.backend = "neither";
    CHECK_THROWS_AS(make_backend(odd, m, td.str()), ConfigError);

    PipelineConfig model = cfg;
    model.backend = "model:weights.onnx";
#if !defined(TRAYGRADE_WITH_ONNX)
    CHECK_THROWS_AS(make_backend(model, m, td.str()), Unsupported);
#endif
}

TEST_CASE("evaluation scores written predictions against the labels") {
    TempDir td;
    const Manifest m = generate_fixtures(small_params(td.str()));
    const PipelineConfig cfg = small_config();
    const auto backend = make_backend(cfg, m, td.str());
    const PipelineResult result = run_pipeline(cfg, m, *backend, 2, td.str());

    fs::create_directories(td.file("preds"));
    for (const SceneOutcome& s : result.scenes) {
        write_file(td.file("preds/" + s.scene_id + "_top.txt"),
                   serialize_predictions(s.preds_top));
        write_file(td.file("preds/" + s.scene_id + "_bottom.txt"),
                   serialize_predictions(s.preds_bottom));
    }

    const EvalRun run = run_eval(cfg, m, td.file("preds"), td.str());
    CHECK(run.notes.empty());
    CHECK(run.summary.map50 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(run.summary.map50_95 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(run.summary.precision == 1.0);
    CHECK(run.summary.recall == 1.0);
    CHECK(run.summary.miou == doctest::Approx(1.0).epsilon(1e-6));

    const auto j = nlohmann::json::parse(run.summary_json);
    CHECK(j.at("schema_version").get<int>() == 1);
    CHECK(j.at("map50").get<double>() == run.summary.map50);
    CHECK(j.at("thresholds").size() == 10);
    CHECK(j.at("confusion").size() == 12); // 11 classes + unmatched
    CHECK(run.tables_text.find("mAP 0.5-0.95") != std::string::npos);
    CHECK(run.tables_text.find("GPU Usage (MiB)") != std::string::npos);

    SUBCASE("a missing view file is noted and scored as empty") {
        fs::remove(td.file("preds/scene_002_bottom.txt"));
        const EvalRun partial = run_eval(cfg, m, td.file("preds"), td.str());
        REQUIRE(partial.notes.size() == 1);
        CHECK(partial.notes[0].find("scene_002:bottom") != std::string::npos);
        CHECK(partial.summary.recall < 1.0);
        CHECK(partial.summary.precision == 1.0);
    }

    SUBCASE("missing or empty prediction directories are errors") {
        CHECK_THROWS_AS(run_eval(cfg, m, td.file("nowhere"), td.str()), MissingPredictions);
        fs::create_directories(td.file("hollow"));
        CHECK_THROWS_AS(run_eval(cfg, m, td.file("hollow"), td.str()), MissingPredictions);
    }
}

TEST_CASE("canvas dimensions follow the physical tray") {
    PipelineConfig cfg;
    cfg.mm_per_px = 0.25;
    CHECK(canvas_width(cfg) == 1280);
    CHECK(canvas_height(cfg) == 1800);
    cfg.mm_per_px = 0.5;
    CHECK(canvas_width(cfg) == 640);
    CHECK(canvas_height(cfg) == 900);
}

} // TEST_SUITE
