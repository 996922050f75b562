#include "traygrade/fixtures.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "traygrade/augment.hpp"
#include "traygrade/rng.hpp"

namespace traygrade {

namespace {

constexpr std::uint8_t background_level = 8;
constexpr std::uint8_t tray_level = 240;
constexpr std::uint8_t date_level = 32;

double cross_z(Point a, Point b, Point c) {
    return (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
}

// Strictly convex, clockwise (image coordinates), corner 0 strictly the
// minimal x+y: the same canonical shape quad extraction reports, so tests
// can compare corner-for-corner.
bool canonical_quad(const std::array<Point, 4>& q) {
    for (int i = 0; i < 4; ++i) {
        const double z = cross_z(q[i], q[(i + 1) % 4], q[(i + 2) % 4]);
        if (z < 500.0) return false; // margin keeps the hull unambiguous
    }
    const double s0 = q[0].x + q[0].y;
    for (int i = 1; i < 4; ++i)
        if (q[i].x + q[i].y < s0 + 1.0) return false;
    return true;
}

std::array<Point, 4> sample_corners(const FixtureParams& p, Rng& rng) {
    const double th = 0.70 * p.image_h;
    const double tw = th * 32.0 / 45.0;
    const double x0 = (p.image_w - tw) / 2.0, y0 = (p.image_h - th) / 2.0;
    const std::array<Point, 4> base{Point{x0, y0}, Point{x0 + tw, y0}, Point{x0 + tw, y0 + th},
                                    Point{x0, y0 + th}};
    const double jx = p.corner_jitter * p.image_w;
    const double jy = p.corner_jitter * p.image_h;
    std::array<Point, 4> q;
    for (;;) {
        for (int i = 0; i < 4; ++i) {
            q[i].x = std::clamp(base[i].x + rng.uniform(-jx, jx), 2.0, p.image_w - 3.0);
            q[i].y = std::clamp(base[i].y + rng.uniform(-jy, jy), 2.0, p.image_h - 3.0);
        }
        if (canonical_quad(q)) return q;
    }
}

std::vector<LabeledBox> sample_dates(const FixtureParams& p, Rng rng) {
    std::vector<LabeledBox> dates;
    dates.reserve(static_cast<std::size_t>(p.rows) * p.cols);
    for (int r = 0; r < p.rows; ++r) {
        for (int c = 0; c < p.cols; ++c) {
            LabeledBox b;
            b.cx = (c + 0.5) / p.cols + rng.uniform(-p.center_jitter, p.center_jitter);
            b.cy = (r + 0.5) / p.rows + rng.uniform(-p.center_jitter, p.center_jitter);
            b.w = fixture_box_w;
            b.h = fixture_box_h;
            b.class_id = rng.uniform_int(0, p.num_classes - 1);
            dates.push_back(b);
        }
    }
    return dates;
}

} // namespace

RenderedView render_view(const FixtureParams& p, int scene_index, bool mirrored) {
    const Rng scene_rng = Rng(p.seed).fork(static_cast<std::uint64_t>(scene_index));
    Rng date_rng = scene_rng.fork(0);
    Rng corner_rng = scene_rng.fork(mirrored ? 2 : 1);

    RenderedView view;
    view.labels = sample_dates(p, date_rng);
    if (mirrored)
        for (LabeledBox& b : view.labels) b.cx = mirror_unit(b.cx);

    const std::array<Point, 4> corners = sample_corners(p, corner_rng);
    view.tray.corners = corners;

    // Map image pixels into tray coordinates; 320 x 450 keeps millimeters.
    const int tray_w = 320, tray_h = 450;
    const Homography to_tray = homography_from_quad(Quad{corners}, tray_w, tray_h);

    view.image = Raster(p.image_w, p.image_h, 1, background_level);
    const double sx = fixture_box_w / 2.0, sy = fixture_box_h / 2.0;
    for (int y = 0; y < p.image_h; ++y) {
        for (int x = 0; x < p.image_w; ++x) {
            const Point t = to_tray.apply(Point{static_cast<double>(x), static_cast<double>(y)});
            if (t.x < 0.0 || t.x > tray_w - 1.0 || t.y < 0.0 || t.y > tray_h - 1.0) continue;
            const double u = t.x / (tray_w - 1.0);
            const double v = t.y / (tray_h - 1.0);

            std::uint8_t px = tray_level;
            // Blobs never stray past neighbouring cells, so only the 3x3
            // lattice neighbourhood can contain this pixel.
            const int cc = static_cast<int>(std::floor(u * p.cols));
            const int cr = static_cast<int>(std::floor(v * p.rows));
            for (int dr = -1; dr <= 1 && px == tray_level; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const int r = cr + dr, c = cc + dc;
                    if (r < 0 || r >= p.rows || c < 0 || c >= p.cols) continue;
                    const LabeledBox& b = view.labels[static_cast<std::size_t>(r) * p.cols + c];
                    const double du = (u - b.cx) / sx, dv = (v - b.cy) / sy;
                    if (du * du + dv * dv <= 1.0) {
                        px = date_level;
                        break;
                    }
                }
            }
            view.image.at(x, y) = px;
        }
    }
    return view;
}

Manifest generate_fixtures(const FixtureParams& p) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(p.out_dir) / "images", ec);
    if (ec) throw IoError("fixtures: cannot create " + p.out_dir + ": " + ec.message());
    fs::create_directories(fs::path(p.out_dir) / "labels", ec);
    if (ec) throw IoError("fixtures: cannot create " + p.out_dir + ": " + ec.message());

    Manifest m;
    for (int k = 0; k < p.num_classes; ++k) m.classes.push_back("class_" + std::to_string(k));

    const auto write_text = [](const fs::path& path, const std::string& text) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("fixtures: cannot write " + path.string());
        out << text;
    };

    for (int s = 0; s < p.scenes; ++s) {
        std::ostringstream ids;
        ids << "scene_" << std::setw(3) << std::setfill('0') << s;
        const std::string id = ids.str();

        SceneEntry e;
        e.id = id;
        e.category = "cat" + std::to_string(s % 4);
        e.top = "images/" + id + "_top.pgm";
        e.bottom = "images/" + id + "_bottom.pgm";
        e.labels_top = "labels/" + id + "_top.txt";
        e.labels_bottom = "labels/" + id + "_bottom.txt";

        const RenderedView top = render_view(p, s, false);
        const RenderedView bottom = render_view(p, s, true);
        write_image((fs::path(p.out_dir) / e.top).string(), top.image);
        write_image((fs::path(p.out_dir) / e.bottom).string(), bottom.image);
        write_text(fs::path(p.out_dir) / e.labels_top, serialize_labels(top.labels));
        write_text(fs::path(p.out_dir) / e.labels_bottom, serialize_labels(bottom.labels));
        m.scenes.push_back(std::move(e));
    }

    save_manifest((fs::path(p.out_dir) / "manifest.json").string(), m);
    return m;
}

} // namespace traygrade
