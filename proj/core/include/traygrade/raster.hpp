#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "traygrade/error.hpp"

namespace traygrade {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

// Owned 8-bit pixel grid, row-major, 1 (gray) or 3 (RGB) channels.
// mm_per_px, when set, is the isotropic physical scale of the image.
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> data;
    std::optional<double> mm_per_px;

    Raster() = default;
    Raster(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {}

    std::uint8_t at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t& at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool valid() const {
        return width >= 1 && height >= 1 && (channels == 1 || channels == 3) &&
               data.size() == static_cast<std::size_t>(width) * height * channels &&
               (!mm_per_px || *mm_per_px > 0.0);
    }
};

// One boolean per pixel; dimensions match the raster it was derived from.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits; // 0 or 1

    BinaryMask() = default;
    BinaryMask(int w, int h, bool fill = false)
        : width(w), height(h),
          bits(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

    bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    std::size_t count() const;
};

// Convex quadrilateral in source-pixel coordinates, canonically ordered:
// corner 0 has minimal x+y (top-left), then clockwise in image coordinates
// (y pointing down): top-right, bottom-right, bottom-left.
struct Quad {
    std::array<Point, 4> corners;
};

// 3x3 projective transform, normalized so m[2][2] = 1.
struct Homography {
    std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

    Point apply(Point p) const;
    Homography inverse() const; // throws SingularSystem
    double det() const;
};

// --- file I/O --------------------------------------------------------------

// Binary PGM (P5) / PPM (P6), maxval 255 only. Throws MalformedHeader,
// TruncatedData, UnsupportedMaxval.
Raster decode_image(const std::vector<std::uint8_t>& bytes);

// Canonical header: "P5\n<w> <h>\n255\n" followed by raw samples.
// decode(encode(r)) == r and encode(decode(b)) == b for canonical streams.
std::vector<std::uint8_t> encode_image(const Raster& img);

Raster read_image(const std::string& path);             // throws IoError on fs failure
void write_image(const std::string& path, const Raster& img);

// --- intensity -------------------------------------------------------------

// ITU-R 601 luminance 0.299 R + 0.587 G + 0.114 B, rounded half-up.
// Gray input is returned unchanged.
Raster to_gray(const Raster& img);

// mask bit set iff pixel >= t. Input must be single-channel.
BinaryMask threshold(const Raster& img, int t);

// Between-class-variance maximizing threshold over the luminance histogram,
// returned in the same ">= t" convention threshold() uses. Deterministic:
// ties resolve to the lowest threshold.
int otsu_threshold(const Raster& img);

// --- contour / quad --------------------------------------------------------

// Largest 4-connected true component -> convex hull -> maximal-area
// 4-vertex subset, canonically ordered. Throws EmptyMask on an all-false
// mask and DegenerateComponent when the hull has < 4 vertices or the best
// quad encloses < 16 px^2.
Quad largest_quad(const BinaryMask& mask);

// --- homography / warp -----------------------------------------------------

// Direct 4-point solve mapping q.corners onto the output rectangle
// ((0,0), (out_w-1,0), (out_w-1,out_h-1), (0,out_h-1)).
Homography homography_from_quad(const Quad& q, int out_w, int out_h);

// Inverse-mapped bilinear resampling; samples outside the source are black.
// mm_per_px of the output is left unset; the caller owns the scale.
Raster warp(const Raster& img, const Homography& h, int out_w, int out_h);

} // namespace traygrade
