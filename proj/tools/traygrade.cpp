// traygrade: run the grading pipeline, evaluate predictions, and generate
// synthetic tray fixtures from the command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "traygrade/augment.hpp"
#include "traygrade/fixtures.hpp"
#include "traygrade/pipeline.hpp"

namespace fs = std::filesystem;
using namespace traygrade;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("short write: " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

std::string manifest_dir(const std::string& manifest_path) {
    return fs::path(manifest_path).parent_path().string();
}

// Shared flag bundle; only flags the user actually passed override config
// fields.
struct Overrides {
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> backend;
    std::optional<std::string> mirror;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--out", out, "Output directory");
        cmd.add_option("--seed", seed, "Seed override");
        cmd.add_option("--backend", backend, "Backend: oracle or model:PATH");
        cmd.add_option("--mirror", mirror, "View pairing mirror: none or horizontal");
    }

    void apply(PipelineConfig& cfg) const {
        if (out) cfg.out_dir = *out;
        if (seed) cfg.seed = *seed;
        if (backend) cfg.backend = *backend;
        if (mirror) cfg.mirror_mode = mirror_mode_from_name(*mirror);
    }
};

PipelineConfig make_config(const std::optional<std::string>& config_path, const Overrides& ov) {
    PipelineConfig cfg;
    if (config_path) cfg = load_config(*config_path);
    ov.apply(cfg);
    cfg.validate();
    return cfg;
}

int cmd_run(const std::optional<std::string>& config_path, const std::string& manifest_path,
            const Overrides& ov, int workers) {
    const PipelineConfig cfg = make_config(config_path, ov);
    const Manifest manifest = load_manifest(manifest_path);
    const std::string base = manifest_dir(manifest_path);

    const std::unique_ptr<InferenceBackend> backend = make_backend(cfg, manifest, base);
    const PipelineResult result = run_pipeline(cfg, manifest, *backend, workers, base);

    const fs::path out_dir(cfg.out_dir);
    write_text(out_dir / "report.json", serialize_report(result.aggregate, result.records));
    write_text(out_dir / "report.csv", report_csv(result.aggregate, result.records, cfg.taxonomy));
    write_text(out_dir / "timings.json", serialize_timings(result.aggregate.timing));
    for (const SceneOutcome& s : result.scenes) {
        if (!s.ok) continue;
        write_text(out_dir / "scenes" / (s.scene_id + ".json"),
                   serialize_report(s.report, s.records));
        write_text(out_dir / "predictions" / (s.scene_id + "_top.txt"),
                   serialize_predictions(s.preds_top));
        write_text(out_dir / "predictions" / (s.scene_id + "_bottom.txt"),
                   serialize_predictions(s.preds_bottom));
    }

    const std::size_t failed = result.aggregate.failures.size();
    std::cout << "scenes: " << result.aggregate.scene_ids.size() << " ok, " << failed
              << " failed\n"
              << "dates: " << result.aggregate.total_dates
              << " (defective " << result.aggregate.total_defective << ", unassigned "
              << result.aggregate.unassigned_count << ")\n"
              << "report: " << (out_dir / "report.json").string() << "\n";
    for (const std::string& f : result.aggregate.failures) std::cerr << "failed: " << f << "\n";
    return failed == 0 ? 0 : 1;
}

int cmd_eval(const std::optional<std::string>& config_path, const std::string& manifest_path,
             const std::string& predictions, const Overrides& ov) {
    const PipelineConfig cfg = make_config(config_path, ov);
    const Manifest manifest = load_manifest(manifest_path);

    const EvalRun run = run_eval(cfg, manifest, predictions, manifest_dir(manifest_path));

    const fs::path out_dir(cfg.out_dir);
    write_text(out_dir / "eval_summary.json", run.summary_json);
    write_text(out_dir / "eval_tables.txt", run.tables_text);
    std::cout << run.tables_text;
    for (const std::string& note : run.notes) std::cerr << "note: " << note << "\n";
    return 0;
}

int cmd_fixtures(const FixtureParams& params) {
    const Manifest m = generate_fixtures(params);
    std::cout << "scenes: " << m.scenes.size() << "\n"
              << "manifest: " << (fs::path(params.out_dir) / "manifest.json").string() << "\n";
    return 0;
}

int cmd_split(const std::string& manifest_path, double fraction, std::uint64_t seed,
              const std::string& out_path) {
    const Manifest m = load_manifest(manifest_path);
    const Manifest split = split_dataset(m, fraction, seed);
    write_text(out_path, serialize_manifest(split));
    std::size_t train = 0, test = 0;
    for (const SceneEntry& s : split.scenes) {
        if (s.split == Split::train)
            ++train;
        else
            ++test;
    }
    std::cout << "train: " << train << "\ntest: " << test << "\nmanifest: " << out_path << "\n";
    return 0;
}

int cmd_augment_export(const std::optional<std::string>& config_path,
                       const std::string& manifest_path, const Overrides& ov, int copies) {
    const PipelineConfig cfg = make_config(config_path, ov);
    const Manifest manifest = load_manifest(manifest_path);
    if (manifest.scenes.empty()) throw EmptyManifest("augment-export: no scenes");
    const fs::path base(manifest_dir(manifest_path));
    const fs::path out_dir(cfg.out_dir);

    AugmentConfig acfg = cfg.augment;
    acfg.seed = cfg.seed;

    Manifest out_manifest;
    out_manifest.classes = manifest.classes;
    std::uint64_t draw = 0;

    const auto export_view = [&](const std::string& image_rel, const std::string& labels_rel,
                                 const std::string& stem) {
        const Raster img = read_image((base / image_rel).string());
        const std::vector<LabeledBox> labels = parse_labels(read_text(base / labels_rel));
        std::vector<DetBox> boxes;
        for (const LabeledBox& b : labels)
            boxes.push_back(DetBox{b.class_id, b.cx, b.cy, b.w, b.h, 1.0});

        TransformSpec spec = sample_spec(acfg, draw++);
        // Mosaic and erasing need sibling images; single-image export skips
        // them.
        std::erase_if(spec.ops, [](const Transform& t) {
            return t.kind == Transform::Kind::mosaic || t.kind == Transform::Kind::erasing;
        });
        const auto [aug_img, aug_boxes] = apply_spec(img, boxes, spec);

        std::vector<LabeledBox> aug_labels;
        for (const DetBox& b : aug_boxes)
            aug_labels.push_back(LabeledBox{b.class_id, b.cx, b.cy, b.w, b.h});
        const std::string image_out = "images/" + stem + ".pgm";
        const std::string labels_out = "labels/" + stem + ".txt";
        write_image((out_dir / image_out).string(), aug_img);
        write_text(out_dir / labels_out, serialize_labels(aug_labels));
        return std::pair{image_out, labels_out};
    };

    std::error_code ec;
    fs::create_directories(out_dir / "images", ec);
    fs::create_directories(out_dir / "labels", ec);
    for (const SceneEntry& entry : manifest.scenes) {
        for (int k = 0; k < copies; ++k) {
            SceneEntry aug = entry;
            aug.id = entry.id + "_aug" + std::to_string(k);
            std::tie(aug.top, aug.labels_top) =
                export_view(entry.top, entry.labels_top, aug.id + "_top");
            std::tie(aug.bottom, aug.labels_bottom) =
                export_view(entry.bottom, entry.labels_bottom, aug.id + "_bottom");
            out_manifest.scenes.push_back(std::move(aug));
        }
    }
    save_manifest((out_dir / "manifest.json").string(), out_manifest);
    std::cout << "augmented scenes: " << out_manifest.scenes.size() << "\n"
              << "manifest: " << (out_dir / "manifest.json").string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tray-based date grading pipeline"};
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    std::string manifest_path;
    std::string predictions_dir;
    Overrides ov;
    int workers = 1;
    int copies = 1;
    double fraction = 0.78;
    std::uint64_t split_seed = 0;
    std::string split_out = "manifest_split.json";
    FixtureParams fparams;
    fparams.out_dir = "fixtures";

    CLI::App* run = app.add_subcommand("run", "Run the grading pipeline on a manifest");
    run->add_option("--config", config_path, "Pipeline config JSON");
    run->add_option("--manifest", manifest_path, "Scene manifest JSON")->required();
    run->add_option("--workers", workers, "Parallel scene workers")->check(CLI::PositiveNumber);
    ov.add_to(*run);

    CLI::App* eval = app.add_subcommand("eval", "Evaluate prediction files against labels");
    eval->add_option("--config", config_path, "Pipeline config JSON");
    eval->add_option("--manifest", manifest_path, "Scene manifest JSON")->required();
    eval->add_option("--predictions", predictions_dir, "Directory of <scene>_<view>.txt files")
        ->required();
    ov.add_to(*eval);

    CLI::App* fixtures = app.add_subcommand("fixtures", "Generate synthetic tray scenes");
    fixtures->add_option("--out", fparams.out_dir, "Output directory")->required();
    fixtures->add_option("--rows", fparams.rows, "Grid rows");
    fixtures->add_option("--cols", fparams.cols, "Grid columns");
    fixtures->add_option("--scenes", fparams.scenes, "Scene count");
    fixtures->add_option("--seed", fparams.seed, "Seed");
    fixtures->add_option("--center-jitter", fparams.center_jitter,
                         "Blob center jitter, tray-normalized");
    fixtures->add_option("--corner-jitter", fparams.corner_jitter,
                         "Tray corner jitter, fraction of image dims");
    fixtures->add_option("--classes", fparams.num_classes, "Class count");
    fixtures->add_option("--image-width", fparams.image_w, "Rendered image width");
    fixtures->add_option("--image-height", fparams.image_h, "Rendered image height");

    CLI::App* split = app.add_subcommand("split", "Stratified train/test split of a manifest");
    split->add_option("--manifest", manifest_path, "Scene manifest JSON")->required();
    split->add_option("--fraction", fraction, "Train fraction");
    split->add_option("--seed", split_seed, "Shuffle seed");
    split->add_option("--out", split_out, "Output manifest path");

    CLI::App* aug = app.add_subcommand("augment-export",
                                       "Write augmented copies of a manifest's images");
    aug->add_option("--config", config_path, "Pipeline config JSON (augment section)");
    aug->add_option("--manifest", manifest_path, "Scene manifest JSON")->required();
    aug->add_option("--copies", copies, "Augmented copies per scene")->check(CLI::PositiveNumber);
    ov.add_to(*aug);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, manifest_path, ov, workers);
        if (eval->parsed()) return cmd_eval(config_path, manifest_path, predictions_dir, ov);
        if (fixtures->parsed()) return cmd_fixtures(fparams);
        if (split->parsed()) return cmd_split(manifest_path, fraction, split_seed, split_out);
        if (aug->parsed()) return cmd_augment_export(config_path, manifest_path, ov, copies);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
