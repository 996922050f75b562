#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "traygrade/detect.hpp"
#include "traygrade/error.hpp"
#include "traygrade/raster.hpp"

namespace traygrade {

// Sampling ranges and gate probabilities for one augmentation policy.
// hsv_* are gain ranges in HSV space; *_range fields are symmetric
// multiplicative deltas; blur_max_px bounds the Gaussian sigma; noise
// corrupts at most noise_max_frac of the pixels.
struct AugmentConfig {
    double hsv_h = 0.0;
    double hsv_s = 0.0;
    double hsv_v = 0.0;
    double translate = 0.0;
    double scale = 0.0;
    double fliplr = 0.0;
    double flipud = 0.0;
    double rotate90 = 0.0;
    double saturation_range = 0.0;
    double brightness_range = 0.0;
    double exposure_range = 0.0;
    double blur_max_px = 0.0;
    double noise_max_frac = 0.0;
    double erasing = 0.0;
    double mosaic = 0.0;
    std::uint64_t seed = 0;

    // Stock detector-training hyperparameters.
    static AugmentConfig yolo_defaults();
    // The tray-tuned policy: HSV jitter off, weaker geometric jitter, and
    // the explicit photometric ranges (+-15% saturation/brightness, +-6%
    // exposure, 0.6 px blur, 0.5% noise).
    static AugmentConfig customized();
};

// One concrete sampled transform. Parameter meaning by kind:
//   rotate90: a = quarter turns (1..3), clockwise
//   translate: a = dx, b = dy (fractions of width/height)
//   scale: a = factor about the image center
//   hue: a = fraction of a full hue rotation
//   saturation/brightness/exposure: a = multiplicative delta (value * (1+a))
//   blur: a = Gaussian sigma in px
//   noise: a = affected pixel fraction; seed drives pixel selection
struct Transform {
    enum class Kind {
        mosaic,
        flip_h,
        flip_v,
        rotate90,
        translate,
        scale,
        hue,
        saturation,
        brightness,
        exposure,
        blur,
        noise,
        erasing
    };
    Kind kind = Kind::flip_h;
    double a = 0.0;
    double b = 0.0;
    std::uint64_t seed = 0;
};

struct TransformSpec {
    std::vector<Transform> ops;
};

// Counter-based sampling: the result is a pure function of (cfg.seed,
// draw_index), independent of call order. Zero probabilities and zero
// ranges produce an empty spec.
TransformSpec sample_spec(const AugmentConfig& cfg, std::uint64_t draw_index);

// Applies the spec to an image and its boxes: geometric transforms move
// both, photometric ones leave boxes alone. Boxes are clipped to the unit
// square; a box keeping less than 10% of its pre-clip area is dropped.
// Throws BoxOutOfRange for input boxes outside [0,1] (1e-9 slack) and
// Unsupported for mosaic/erasing entries, which need more than one image
// (see apply_mosaic).
std::pair<Raster, std::vector<DetBox>> apply_spec(const Raster& img,
                                                  const std::vector<DetBox>& boxes,
                                                  const TransformSpec& spec);

// Four equally-sized images composed 2x2 (order: top-left, top-right,
// bottom-left, bottom-right); boxes are remapped into the composite. Throws
// DimensionMismatch on differing shapes.
std::pair<Raster, std::vector<DetBox>> apply_mosaic(
    const std::array<Raster, 4>& tiles, const std::array<std::vector<DetBox>, 4>& boxes);

// Reflection of a normalized coordinate about 0.5 on a micro-degree grid:
// exact involution for 6-decimal coordinates (mirror_unit(mirror_unit(x))
// == x bitwise), which plain 1.0 - x does not satisfy in floating point.
double mirror_unit(double x);

} // namespace traygrade
