#include <doctest.h>

#include <cmath>

#include "traygrade/detect.hpp"
#include "traygrade/rng.hpp"

using namespace traygrade;

namespace {

DetBox box(double cx, double cy, double w, double h, int cls = 0, double conf = 1.0) {
    return DetBox{cls, cx, cy, w, h, conf};
}

DetBox random_box(Rng& rng) {
    return box(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.05, 0.4),
               rng.uniform(0.05, 0.4));
}

} // namespace

TEST_SUITE("detect") {

TEST_CASE("iou fixtures") {
    const DetBox a = box(0.5, 0.5, 0.2, 0.2);
    CHECK(iou(a, a) == 1.0);
    CHECK(iou(a, box(0.9, 0.9, 0.1, 0.1)) == 0.0);
    // Two 0.2x0.2 boxes offset by 0.1 in x: intersection 0.02, union 0.06.
    const DetBox b = box(0.6, 0.5, 0.2, 0.2);
    CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("iou symmetry and identity") {
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        const DetBox a = random_box(rng), b = random_box(rng);
        CHECK(iou(a, b) == iou(b, a));
        CHECK(iou(a, a) == 1.0);
        CHECK(iou(a, b) >= 0.0);
        CHECK(iou(a, b) <= 1.0);
    }
}

TEST_CASE("confidence") {
    const DetBox a = box(0.5, 0.5, 0.2, 0.2);
    const DetBox b = box(0.6, 0.5, 0.2, 0.2);
    CHECK(confidence(false, a, nullptr) == 0.0);
    CHECK(confidence(true, a, &a) == 1.0);
    CHECK(confidence(true, a, &b) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(confidence(true, a, nullptr), MissingGroundTruth);
}

TEST_CASE("iou_grad matches finite differences") {
    Rng rng(7);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        DetBox p = random_box(rng);
        // Perturb rather than redraw so most pairs overlap enough to check.
        DetBox g = p;
        g.cx += rng.uniform(-0.05, 0.05);
        g.cy += rng.uniform(-0.05, 0.05);
        g.w = std::max(0.05, g.w + rng.uniform(-0.05, 0.05));
        g.h = std::max(0.05, g.h + rng.uniform(-0.05, 0.05));
        if (iou(p, g) < 0.05) continue; // keep away from the non-differentiable zero plateau
        const IouGrad an = iou_grad(p, g);
        CHECK(an.value == doctest::Approx(iou(p, g)).epsilon(1e-12));

        const double eps = 1e-6;
        const auto fd = [&](double DetBox::*field) {
            DetBox hi = p, lo = p;
            hi.*field += eps;
            lo.*field -= eps;
            return (iou(hi, g) - iou(lo, g)) / (2 * eps);
        };
        CHECK(an.dcx == doctest::Approx(fd(&DetBox::cx)).epsilon(1e-4));
        CHECK(an.dcy == doctest::Approx(fd(&DetBox::cy)).epsilon(1e-4));
        CHECK(an.dw == doctest::Approx(fd(&DetBox::w)).epsilon(1e-4));
        CHECK(an.dh == doctest::Approx(fd(&DetBox::h)).epsilon(1e-4));
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("yolo_loss zero on exact predictions") {
    LossConfig cfg;
    cfg.grid_side = 2;
    cfg.boxes_per_cell = 2;
    cfg.num_classes = 3;

    std::vector<CellTarget> targets(4);
    targets[1].has_object = true;
    targets[1].x = 0.4;
    targets[1].y = 0.6;
    targets[1].w = 0.2;
    targets[1].h = 0.3;
    targets[1].class_id = 2;

    std::vector<CellPrediction> preds(4);
    for (auto& p : preds) {
        p.boxes.assign(2, BoxPrediction{});
        p.class_probs.assign(3, 0.0);
    }
    preds[1].boxes[0] = {0.4, 0.6, 0.2, 0.3, 1.0}; // C-hat = IoU = 1
    preds[1].class_probs[2] = 1.0;

    CHECK(yolo_loss(preds, targets, cfg) == 0.0);
}

TEST_CASE("yolo_loss no-object confidence fixture") {
    LossConfig cfg; // S=1, B=1, 1 class, lambda_noobj = 0.5
    std::vector<CellTarget> targets(1);
    std::vector<CellPrediction> preds(1);
    preds[0].boxes = {BoxPrediction{0, 0, 0, 0, 0.5}};
    preds[0].class_probs = {0.0};
    CHECK(yolo_loss(preds, targets, cfg) == doctest::Approx(0.125).epsilon(1e-15));
}

TEST_CASE("yolo_loss coordinate fixture") {
    LossConfig cfg; // lambda_coord = 5
    std::vector<CellTarget> targets(1);
    targets[0].has_object = true;
    targets[0].x = 0.5;
    targets[0].y = 0.5;
    targets[0].w = 0.2;
    targets[0].h = 0.2;

    std::vector<CellPrediction> preds(1);
    // Off by 0.1 in x; the 0.2-square boxes then overlap with IoU 1/3, so a
    // confidence of exactly 1/3 zeroes out the confidence residual.
    preds[0].boxes = {BoxPrediction{0.6, 0.5, 0.2, 0.2, 1.0 / 3.0}};
    preds[0].class_probs = {1.0};
    CHECK(yolo_loss(preds, targets, cfg) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("yolo_loss responsible box has highest IoU, ties to lowest index") {
    LossConfig cfg;
    cfg.boxes_per_cell = 2;
    std::vector<CellTarget> targets(1);
    targets[0].has_object = true;
    targets[0].x = 0.5;
    targets[0].y = 0.5;
    targets[0].w = 0.2;
    targets[0].h = 0.2;

    std::vector<CellPrediction> preds(1);
    preds[0].class_probs = {1.0};
    // Box 1 matches the target exactly; box 0 is far off. Only box 1's
    // coordinates should enter the loss, giving 0 plus box 0's confidence
    // penalty of 0 (no-object boxes in an object cell carry no term here).
    preds[0].boxes = {BoxPrediction{0.1, 0.1, 0.05, 0.05, 0.0}, BoxPrediction{0.5, 0.5, 0.2, 0.2, 1.0}};
    CHECK(yolo_loss(preds, targets, cfg) == 0.0);

    // Identical boxes: index 0 is responsible; its conf target is IoU = 1.
    preds[0].boxes = {BoxPrediction{0.5, 0.5, 0.2, 0.2, 0.25}, BoxPrediction{0.5, 0.5, 0.2, 0.2, 1.0}};
    CHECK(yolo_loss(preds, targets, cfg) == doctest::Approx(0.5625).epsilon(1e-12));
}

TEST_CASE("yolo_loss shape and domain errors") {
    LossConfig cfg;
    std::vector<CellTarget> targets(2);
    std::vector<CellPrediction> preds(1);
    preds[0].boxes = {BoxPrediction{}};
    preds[0].class_probs = {0.0};
    CHECK_THROWS_AS(yolo_loss(preds, targets, cfg), ShapeMismatch);

    targets.resize(1);
    targets[0].has_object = true;
    targets[0].w = -0.1;
    targets[0].h = 0.1;
    CHECK_THROWS_AS(yolo_loss(preds, targets, cfg), NegativeSize);
}

TEST_CASE("yolo_loss is non-negative") {
    Rng rng(13);
    LossConfig cfg;
    cfg.grid_side = 2;
    cfg.boxes_per_cell = 2;
    cfg.num_classes = 2;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<CellTarget> targets(4);
        std::vector<CellPrediction> preds(4);
        for (int i = 0; i < 4; ++i) {
            targets[i].has_object = rng.chance(0.5);
            targets[i].x = rng.uniform();
            targets[i].y = rng.uniform();
            targets[i].w = rng.uniform(0.01, 0.5);
            targets[i].h = rng.uniform(0.01, 0.5);
            targets[i].class_id = static_cast<int>(rng.below(2));
            preds[i].class_probs = {rng.uniform(), rng.uniform()};
            for (int b = 0; b < 2; ++b)
                preds[i].boxes.push_back(BoxPrediction{rng.uniform(), rng.uniform(),
                                                       rng.uniform(0.01, 0.5),
                                                       rng.uniform(0.01, 0.5), rng.uniform()});
        }
        CHECK(yolo_loss(preds, targets, cfg) >= 0.0);
    }
}

TEST_CASE("nms fixtures") {
    const DetBox single = box(0.5, 0.5, 0.2, 0.2, 0, 0.9);
    CHECK(nms({single}, 0.5).size() == 1);

    const std::vector<DetBox> disjoint{box(0.2, 0.2, 0.1, 0.1, 0, 0.9),
                                       box(0.8, 0.8, 0.1, 0.1, 0, 0.8)};
    CHECK(nms(disjoint, 0.5).size() == 2);

    const std::vector<DetBox> dup{box(0.5, 0.5, 0.2, 0.2, 0, 0.8),
                                  box(0.5, 0.5, 0.2, 0.2, 0, 0.9)};
    const auto kept = nms(dup, 0.5);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].conf == 0.9);
}

TEST_CASE("nms is class-wise and order is conf-descending") {
    const std::vector<DetBox> mixed{box(0.5, 0.5, 0.2, 0.2, 0, 0.8),
                                    box(0.5, 0.5, 0.2, 0.2, 1, 0.9),
                                    box(0.5, 0.5, 0.2, 0.2, 0, 0.7)};
    const auto kept = nms(mixed, 0.5);
    REQUIRE(kept.size() == 2); // one per class
    CHECK(kept[0].class_id == 1);
    CHECK(kept[0].conf == 0.9);
    CHECK(kept[1].class_id == 0);
    CHECK(kept[1].conf == 0.8);
}

TEST_CASE("letterbox geometry round trip") {
    const LetterboxGeom g(1280, 1800, 1280);
    CHECK(g.scaled_h == 1280);
    CHECK(g.scaled_w == 910); // lround(1280 * 1280/1800)
    CHECK(g.pad_x == 185);
    CHECK(g.pad_y == 0);

    Rng rng(29);
    for (int i = 0; i < 100; ++i) {
        const DetBox b = random_box(rng);
        const DetBox rt = g.from_detector(g.to_detector(b));
        CHECK(rt.cx == doctest::Approx(b.cx).epsilon(1e-12));
        CHECK(rt.cy == doctest::Approx(b.cy).epsilon(1e-12));
        CHECK(rt.w == doctest::Approx(b.w).epsilon(1e-12));
        CHECK(rt.h == doctest::Approx(b.h).epsilon(1e-12));
    }
}

TEST_CASE("letterbox raster dimensions and bars") {
    const Raster img(100, 50, 1, 200);
    const Raster out = letterbox(img, 64);
    CHECK(out.width == 64);
    CHECK(out.height == 64);
    CHECK(out.at(32, 0) == 0);  // top bar
    CHECK(out.at(32, 63) == 0); // bottom bar
    CHECK(out.at(32, 32) == 200);
}

TEST_CASE("oracle backend replays annotations") {
    AnnotationSet ann;
    ann.views["s:top"].boxes = {{3, 0.25, 0.5, 0.1, 0.2}, {1, 0.75, 0.5, 0.1, 0.2}};
    const auto backend = oracle_backend(ann, 0.0, 99);

    const Raster dummy(8, 8, 1);
    const auto dets = backend->detect_scene(dummy, "s:top");
    REQUIRE(dets.size() == 2);
    CHECK(dets[0].class_id == 3);
    CHECK(dets[0].cx == 0.25);
    CHECK(dets[0].w == 0.1);
    CHECK(dets[1].class_id == 1);

    CHECK_THROWS_AS(backend->detect_scene(dummy, "unknown:top"), UnknownScene);
}

TEST_CASE("oracle backend jitter is deterministic and bounded") {
    AnnotationSet ann;
    for (int i = 0; i < 20; ++i)
        ann.views["s:top"].boxes.push_back({0, 0.3 + 0.02 * i, 0.5, 0.2, 0.2});

    const auto b1 = oracle_backend(ann, 0.005, 7);
    const auto b2 = oracle_backend(ann, 0.005, 7);
    const Raster dummy(8, 8, 1);
    const auto d1 = b1->detect_scene(dummy, "s:top");
    const auto d2 = b2->detect_scene(dummy, "s:top");
    REQUIRE(d1.size() == 20);
    for (std::size_t i = 0; i < d1.size(); ++i) {
        CHECK(d1[i].cx == d2[i].cx);
        CHECK(d1[i].cy == d2[i].cy);
        // Centers moved by at most the jitter bound.
        CHECK(std::abs(d1[i].cx - ann.views["s:top"].boxes[i].cx) <= 0.005);
        CHECK(std::abs(d1[i].cy - ann.views["s:top"].boxes[i].cy) <= 0.005);
        // 0.04-area boxes (0.2 x 0.2) keep IoU > 0.9 under 0.005 jitter.
        const DetBox src{0, ann.views["s:top"].boxes[i].cx, ann.views["s:top"].boxes[i].cy, 0.2,
                         0.2, 1.0};
        CHECK(iou(d1[i], src) > 0.9);
    }
}

TEST_CASE("oracle backend maps through letterbox geometry") {
    AnnotationSet ann;
    ann.views["s:top"].boxes = {{0, 0.5, 0.5, 0.1, 0.2}};
    const LetterboxGeom geom(1280, 1800, 1280);
    const auto backend = oracle_backend(ann, 0.0, 0, geom);
    const Raster dummy(8, 8, 1);
    const auto dets = backend->detect_scene(dummy, "s:top");
    REQUIRE(dets.size() == 1);
    const DetBox back = geom.from_detector(dets[0]);
    CHECK(back.cx == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(back.cy == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(back.w == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(back.h == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("oracle classify returns a one-hot of the hint") {
    AnnotationSet ann;
    ann.views["s:top"].boxes = {{0, 0.5, 0.5, 0.1, 0.1}};
    ann.classes = {"a", "b", "c"};
    const auto backend = oracle_backend(ann, 0.0, 0);
    CHECK(backend->num_classes() == 3);
    const Raster crop(4, 4, 1);
    const auto scores = backend->classify_crop(crop, 1);
    REQUIRE(scores.size() == 3);
    CHECK(scores[0] == 0.0);
    CHECK(scores[1] == 1.0);
    CHECK(scores[2] == 0.0);
}

TEST_CASE("model backend is gated") {
#ifndef TRAYGRADE_WITH_ONNX
    CHECK_THROWS_AS(model_backend("weights.onnx", 11), Unsupported);
#endif
}

} // TEST_SUITE
