#pragma once

#include <cstdint>
#include <string>

#include "traygrade/dataset.hpp"
#include "traygrade/raster.hpp"

namespace traygrade {

// Synthetic scene generation: a black background, a white perspective-
// distorted tray (32:45 aspect) and dark elliptical dates on the row/column
// lattice, photographed "from both sides" (the bottom view mirrors x).
// Labels are tray-normalized YOLO lines matching the rendered blobs.
struct FixtureParams {
    int rows = 5;
    int cols = 10;
    int scenes = 20;
    std::uint64_t seed = 0;
    double center_jitter = 0.0;  // blob center offset bound, tray-normalized
    double corner_jitter = 0.10; // tray corner displacement, fraction of image dims
    int image_w = 960;
    int image_h = 720;
    int num_classes = 11;
    std::string out_dir;
};

// Box size of every generated date, tray-normalized. Fixed so tests can
// derive jitter bounds from it.
constexpr double fixture_box_w = 0.06;
constexpr double fixture_box_h = 0.088;

// Writes images/, labels/ and manifest.json under params.out_dir and
// returns the manifest. Byte-identical output for identical params.
// Throws IoError.
Manifest generate_fixtures(const FixtureParams& params);

// One rendered view plus its ground truth, kept in memory (used by tests
// that do not need files).
struct RenderedView {
    Raster image;
    std::vector<LabeledBox> labels; // tray-normalized
    Quad tray;                      // true corner positions, image px
};

// Renders a single view deterministically. `mirrored` flips blob x
// positions (the underside view of the same tray).
RenderedView render_view(const FixtureParams& params, int scene_index, bool mirrored);

} // namespace traygrade
