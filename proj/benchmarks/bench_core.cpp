// Microbenchmarks for the stages that dominate a scene pass: rectification
// geometry, warping, suppression, metric sweeps, and the whole pipeline.
// Inputs come from the deterministic fixture renderer so runs are comparable
// across machines.

#include <benchmark/benchmark.h>

#include <filesystem>
#include <string>
#include <vector>

#include "traygrade/align.hpp"
#include "traygrade/config.hpp"
#include "traygrade/detect.hpp"
#include "traygrade/eval.hpp"
#include "traygrade/fixtures.hpp"
#include "traygrade/pipeline.hpp"
#include "traygrade/raster.hpp"
#include "traygrade/rng.hpp"

using namespace traygrade;

namespace {

const RenderedView& sample_view() {
    static const RenderedView view = [] {
        FixtureParams p;
        p.seed = 1;
        return render_view(p, 0, false);
    }();
    return view;
}

std::vector<DetBox> random_boxes(std::size_t n, int classes) {
    Rng rng(2);
    std::vector<DetBox> boxes;
    boxes.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        boxes.push_back(DetBox{static_cast<int>(rng.below(classes)), rng.uniform(0.1, 0.9),
                               rng.uniform(0.1, 0.9), rng.uniform(0.02, 0.12),
                               rng.uniform(0.02, 0.12), rng.uniform()});
    return boxes;
}

void bm_tray_quad(benchmark::State& state) {
    const Raster& img = sample_view().image;
    for (auto _ : state) {
        const BinaryMask mask = threshold(img, otsu_threshold(img));
        benchmark::DoNotOptimize(largest_quad(mask));
    }
}
BENCHMARK(bm_tray_quad)->Unit(benchmark::kMillisecond);

void bm_warp_full_canvas(benchmark::State& state) {
    const RenderedView& v = sample_view();
    const Homography h = homography_from_quad(v.tray, 1280, 1800);
    for (auto _ : state) benchmark::DoNotOptimize(warp(v.image, h, 1280, 1800));
}
BENCHMARK(bm_warp_full_canvas)->Unit(benchmark::kMillisecond);

void bm_letterbox(benchmark::State& state) {
    const Homography h = homography_from_quad(sample_view().tray, 1280, 1800);
    const Raster canvas = warp(sample_view().image, h, 1280, 1800);
    for (auto _ : state) benchmark::DoNotOptimize(letterbox(canvas, 1280));
}
BENCHMARK(bm_letterbox)->Unit(benchmark::kMillisecond);

void bm_nms(benchmark::State& state) {
    const std::vector<DetBox> boxes = random_boxes(static_cast<std::size_t>(state.range(0)), 11);
    for (auto _ : state) benchmark::DoNotOptimize(nms(boxes, 0.45));
}
BENCHMARK(bm_nms)->Arg(100)->Arg(400);

void bm_grid_sort(benchmark::State& state) {
    Rng rng(3);
    std::vector<DetBox> boxes;
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 10; ++c)
            boxes.push_back(DetBox{r * 10 + c, (c + 0.5) / 10 + rng.uniform(-0.02, 0.02),
                                   (r + 0.5) / 5 + rng.uniform(-0.02, 0.02), 0.06, 0.088, 0.9});
    for (auto _ : state) benchmark::DoNotOptimize(sort_grid(boxes, 5, 10));
}
BENCHMARK(bm_grid_sort);

void bm_map_range(benchmark::State& state) {
    Rng rng(4);
    std::vector<DetectionSample> samples(40);
    for (DetectionSample& s : samples) {
        s.gts = random_boxes(10, 3);
        s.preds = s.gts;
        for (DetBox& b : s.preds) {
            b.cx += rng.uniform(-0.02, 0.02);
            b.cy += rng.uniform(-0.02, 0.02);
            b.conf = rng.uniform();
        }
    }
    const std::vector<double> thresholds = coco_thresholds();
    for (auto _ : state) benchmark::DoNotOptimize(map_range(samples, thresholds, 3));
}
BENCHMARK(bm_map_range)->Unit(benchmark::kMillisecond);

void bm_scene_pipeline(benchmark::State& state) {
    const std::string dir =
        (std::filesystem::temp_directory_path() / "traygrade_bench_fixture").string();
    FixtureParams p;
    p.scenes = 1;
    p.seed = 5;
    p.out_dir = dir;
    const Manifest m = generate_fixtures(p);
    PipelineConfig cfg; // 0.25 mm/px: full 1280x1800 canvas
    const auto backend = make_backend(cfg, m, dir);
    for (auto _ : state) benchmark::DoNotOptimize(run_pipeline(cfg, m, *backend, 1, dir));
    std::filesystem::remove_all(dir);
}
BENCHMARK(bm_scene_pipeline)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
