#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "support/temp_dir.hpp"
#include "traygrade/raster.hpp"
#include "traygrade/rng.hpp"

using namespace traygrade;

namespace {

Raster from_bytes(int w, int h, std::initializer_list<int> px) {
    Raster r(w, h, 1);
    int i = 0;
    for (int v : px) r.data[i++] = static_cast<std::uint8_t>(v);
    return r;
}

Raster random_raster(Rng& rng, int w, int h, int ch = 1) {
    Raster r(w, h, ch);
    for (auto& v : r.data) v = rng.byte();
    return r;
}

double dist(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

} // namespace

TEST_SUITE("raster") {

TEST_CASE("decode P5 minimal") {
    const std::string s = "P5\n2 2\n255\n";
    std::vector<std::uint8_t> bytes(s.begin(), s.end());
    bytes.insert(bytes.end(), {0, 255, 0, 255});
    const Raster r = decode_image(bytes);
    CHECK(r.width == 2);
    CHECK(r.height == 2);
    CHECK(r.channels == 1);
    CHECK(r.at(0, 0) == 0);
    CHECK(r.at(1, 0) == 255);
    CHECK(r.at(0, 1) == 0);
    CHECK(r.at(1, 1) == 255);
}

TEST_CASE("encode/decode round trip") {
    Rng rng(11);
    for (int ch : {1, 3}) {
        const Raster r = random_raster(rng, 7, 5, ch);
        const Raster back = decode_image(encode_image(r));
        CHECK(back.width == r.width);
        CHECK(back.height == r.height);
        CHECK(back.channels == r.channels);
        CHECK(back.data == r.data);
        // Canonical streams survive the other direction too.
        CHECK(encode_image(back) == encode_image(r));
    }
}

TEST_CASE("decode errors") {
    const std::string p6 = "P6\n2 2\n255\n";
    std::vector<std::uint8_t> truncated(p6.begin(), p6.end());
    truncated.insert(truncated.end(), {1, 2, 3, 4, 5}); // 5 of 12 payload bytes
    CHECK_THROWS_AS(decode_image(truncated), TruncatedData);

    const std::string bad = "P4\n2 2\n255\n";
    CHECK_THROWS_AS(decode_image(std::vector<std::uint8_t>(bad.begin(), bad.end())),
                    MalformedHeader);

    const std::string maxval = "P5\n2 2\n65535\n";
    std::vector<std::uint8_t> wide(maxval.begin(), maxval.end());
    wide.insert(wide.end(), 8, 0);
    CHECK_THROWS_AS(decode_image(wide), UnsupportedMaxval);
}

TEST_CASE("file round trip") {
    TempDir tmp;
    Rng rng(3);
    const Raster r = random_raster(rng, 9, 4, 3);
    write_image(tmp.file("img.ppm"), r);
    const Raster back = read_image(tmp.file("img.ppm"));
    CHECK(back.data == r.data);
    CHECK_THROWS_AS(read_image(tmp.file("absent.pgm")), IoError);
}

TEST_CASE("to_gray luminance") {
    Raster rgb(1, 1, 3);
    rgb.at(0, 0, 0) = 255;
    rgb.at(0, 0, 1) = 0;
    rgb.at(0, 0, 2) = 0;
    CHECK(to_gray(rgb).at(0, 0) == 76); // round(0.299*255)

    rgb.at(0, 0, 0) = 10;
    rgb.at(0, 0, 1) = 200;
    rgb.at(0, 0, 2) = 30;
    // 0.299*10 + 0.587*200 + 0.114*30 = 123.81 -> 124
    CHECK(to_gray(rgb).at(0, 0) == 124);

    const Raster g = from_bytes(2, 1, {7, 9});
    CHECK(to_gray(g).data == g.data);
}

TEST_CASE("threshold fixtures") {
    CHECK(threshold(Raster(4, 4, 1, 0), 128).count() == 0);
    CHECK(threshold(Raster(4, 4, 1, 255), 0).count() == 16);

    const Raster img = from_bytes(4, 1, {10, 200, 128, 127});
    const BinaryMask m = threshold(img, 128);
    CHECK_FALSE(m.at(0, 0));
    CHECK(m.at(1, 0));
    CHECK(m.at(2, 0));
    CHECK_FALSE(m.at(3, 0));

    CHECK_THROWS_AS(threshold(Raster(2, 2, 3), 10), WrongChannelCount);
}

TEST_CASE("threshold is monotone in t") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Raster img = random_raster(rng, 16, 12);
        const int t1 = static_cast<int>(rng.below(256));
        const int t2 = t1 + static_cast<int>(rng.below(256 - static_cast<std::uint64_t>(t1)));
        const BinaryMask lo = threshold(img, t1), hi = threshold(img, t2);
        for (std::size_t i = 0; i < lo.bits.size(); ++i)
            if (hi.bits[i]) CHECK(lo.bits[i]);
    }
}

TEST_CASE("otsu separates a bimodal image") {
    Raster img(10, 10, 1, 30);
    for (int y = 0; y < 10; ++y)
        for (int x = 5; x < 10; ++x) img.at(x, y) = 220;
    const int t = otsu_threshold(img);
    CHECK(t > 30);
    CHECK(t <= 220);
    CHECK(threshold(img, t).count() == 50);
}

TEST_CASE("largest_quad axis-aligned rectangle") {
    BinaryMask mask(120, 80);
    for (int y = 0; y < 60; ++y)
        for (int x = 0; x < 100; ++x) mask.set(x, y, true);
    const Quad q = largest_quad(mask);
    CHECK(q.corners[0].x == doctest::Approx(0));
    CHECK(q.corners[0].y == doctest::Approx(0));
    CHECK(q.corners[1].x == doctest::Approx(99));
    CHECK(q.corners[1].y == doctest::Approx(0));
    CHECK(q.corners[2].x == doctest::Approx(99));
    CHECK(q.corners[2].y == doctest::Approx(59));
    CHECK(q.corners[3].x == doctest::Approx(0));
    CHECK(q.corners[3].y == doctest::Approx(59));
}

TEST_CASE("largest_quad rotated rectangle") {
    // 100x60 rectangle rotated 30 degrees about the mask center.
    const double c = std::cos(M_PI / 6.0), s = std::sin(M_PI / 6.0);
    const double cx = 100.0, cy = 80.0;
    BinaryMask mask(200, 160);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const double ux = c * (x - cx) + s * (y - cy);
            const double uy = -s * (x - cx) + c * (y - cy);
            if (std::abs(ux) <= 50.0 && std::abs(uy) <= 30.0) mask.set(x, y, true);
        }
    }
    const Quad q = largest_quad(mask);
    const auto corner = [&](double ux, double uy) {
        return Point{cx + c * ux - s * uy, cy + s * ux + c * uy};
    };
    // Canonical order: min x+y first, then clockwise.
    const std::array<Point, 4> expect{corner(-50, -30), corner(50, -30), corner(50, 30),
                                      corner(-50, 30)};
    for (int i = 0; i < 4; ++i) CHECK(dist(q.corners[i], expect[i]) < 1.5);
}

TEST_CASE("largest_quad picks the larger component") {
    BinaryMask mask(200, 100);
    for (int y = 0; y < 10; ++y) // 500 px^2
        for (int x = 0; x < 50; ++x) mask.set(x, y, true);
    for (int y = 40; y < 90; ++y) // 5000 px^2
        for (int x = 80; x < 180; ++x) mask.set(x, y, true);
    const Quad q = largest_quad(mask);
    CHECK(q.corners[0].x == doctest::Approx(80));
    CHECK(q.corners[0].y == doctest::Approx(40));
}

TEST_CASE("largest_quad errors") {
    CHECK_THROWS_AS(largest_quad(BinaryMask(10, 10)), EmptyMask);
    BinaryMask line(30, 3);
    for (int x = 0; x < 30; ++x) line.set(x, 1, true); // 1 px tall: area 0
    CHECK_THROWS_AS(largest_quad(line), DegenerateComponent);
}

TEST_CASE("largest_quad corners stay in the component bounding box") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        BinaryMask mask(80, 80);
        const int x0 = static_cast<int>(rng.below(30)), y0 = static_cast<int>(rng.below(30));
        const int w = 20 + static_cast<int>(rng.below(30)), h = 20 + static_cast<int>(rng.below(30));
        for (int y = y0; y < y0 + h && y < 80; ++y)
            for (int x = x0; x < x0 + w && x < 80; ++x) mask.set(x, y, true);
        const Quad q = largest_quad(mask);
        for (const Point& p : q.corners) {
            CHECK(p.x >= x0);
            CHECK(p.y >= y0);
            CHECK(p.x <= x0 + w - 1);
            CHECK(p.y <= y0 + h - 1);
        }
        // Canonical order.
        CHECK(q.corners[0].x + q.corners[0].y <= q.corners[2].x + q.corners[2].y);
    }
}

TEST_CASE("homography identity and corner reproduction") {
    const Quad unit{{Point{0, 0}, Point{99, 0}, Point{99, 49}, Point{0, 49}}};
    const Homography h = homography_from_quad(unit, 100, 50);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(h.m[i][j] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));

    Rng rng(23);
    for (int trial = 0; trial < 25; ++trial) {
        Quad q;
        q.corners[0] = {rng.uniform(0, 20), rng.uniform(0, 20)};
        q.corners[1] = {rng.uniform(80, 100), rng.uniform(0, 20)};
        q.corners[2] = {rng.uniform(80, 100), rng.uniform(60, 90)};
        q.corners[3] = {rng.uniform(0, 20), rng.uniform(60, 90)};
        const Homography h2 = homography_from_quad(q, 320, 450);
        const std::array<Point, 4> target{Point{0, 0}, Point{319, 0}, Point{319, 449},
                                          Point{0, 449}};
        for (int i = 0; i < 4; ++i) CHECK(dist(h2.apply(q.corners[i]), target[i]) < 1e-6);
    }
}

TEST_CASE("homography scale solve") {
    const Quad q{{Point{0, 0}, Point{1, 0}, Point{1, 1}, Point{0, 1}}};
    const Homography h = homography_from_quad(q, 3, 3); // maps onto (0..2)^2
    CHECK(h.apply({0.5, 0.5}).x == doctest::Approx(1.0));
    CHECK(h.apply({0.5, 0.5}).y == doctest::Approx(1.0));
    CHECK(h.m[0][0] == doctest::Approx(2.0));
    CHECK(h.m[1][1] == doctest::Approx(2.0));
}

TEST_CASE("homography collinear corners") {
    const Quad bad{{Point{0, 0}, Point{10, 0}, Point{20, 0}, Point{0, 10}}};
    CHECK_THROWS_AS(homography_from_quad(bad, 10, 10), SingularSystem);
}

TEST_CASE("homography inverse") {
    const Quad q{{Point{3, 2}, Point{90, 5}, Point{95, 70}, Point{1, 66}}};
    const Homography h = homography_from_quad(q, 100, 80);
    const Homography inv = h.inverse();
    for (const Point& p : q.corners) {
        const Point round_trip = inv.apply(h.apply(p));
        CHECK(dist(round_trip, p) < 1e-6);
    }
}

TEST_CASE("warp identity is byte-exact") {
    Rng rng(31);
    const Raster img = random_raster(rng, 40, 30);
    const Raster out = warp(img, Homography{}, 40, 30);
    CHECK(out.data == img.data);
}

TEST_CASE("warp outside source is black") {
    Homography h;
    h.m[0][2] = 1e6; // shifts everything far outside
    const Raster img(8, 8, 1, 200);
    const Raster out = warp(img, h, 8, 8);
    for (auto v : out.data) CHECK(v == 0);
}

TEST_CASE("warp round trip on a checkerboard") {
    Raster img(96, 96, 1);
    for (int y = 0; y < 96; ++y)
        for (int x = 0; x < 96; ++x) img.at(x, y) = ((x / 12 + y / 12) % 2) ? 230 : 25;

    const Quad q{{Point{4, 6}, Point{91, 3}, Point{94, 92}, Point{2, 89}}};
    const Homography h = homography_from_quad(q, 192, 192);
    const Raster canvas = warp(img, h, 192, 192);
    const Raster back = warp(canvas, h.inverse(), 96, 96);

    // Bilinear smoothing is confined to tile borders; interiors must come
    // back nearly exact. Eroding 3 px off every tile edge keeps both warps'
    // sampling footprints inside a single flat tile.
    double err = 0.0;
    int n = 0;
    for (int y = 12; y < 84; ++y) {
        for (int x = 12; x < 84; ++x) {
            if (x % 12 < 3 || x % 12 > 8 || y % 12 < 3 || y % 12 > 8) continue;
            err += std::abs(static_cast<double>(back.at(x, y)) - img.at(x, y));
            ++n;
        }
    }
    REQUIRE(n > 0);
    CHECK(err / n < 2.0);
}

} // TEST_SUITE
