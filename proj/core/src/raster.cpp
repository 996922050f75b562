#include "traygrade/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

namespace traygrade {

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

// --- PNM I/O ----------------------------------------------------------------

namespace {

// Reads one PNM header token, skipping whitespace and '#' comments.
bool next_token(const std::vector<std::uint8_t>& b, std::size_t& pos, std::string& tok) {
    while (pos < b.size()) {
        char c = static_cast<char>(b[pos]);
        if (c == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++pos;
        } else {
            break;
        }
    }
    if (pos >= b.size()) return false;
    tok.clear();
    while (pos < b.size() && !std::isspace(static_cast<unsigned char>(b[pos])) && b[pos] != '#') {
        tok.push_back(static_cast<char>(b[pos]));
        ++pos;
    }
    return !tok.empty();
}

int parse_pnm_int(const std::string& tok) {
    if (tok.empty() || tok.size() > 9) throw MalformedHeader("bad numeric field: " + tok);
    int v = 0;
    for (char c : tok) {
        if (c < '0' || c > '9') throw MalformedHeader("bad numeric field: " + tok);
        v = v * 10 + (c - '0');
    }
    return v;
}

} // namespace

Raster decode_image(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 0;
    std::string tok;
    if (!next_token(bytes, pos, tok)) throw MalformedHeader("empty stream");
    int channels;
    if (tok == "P5") channels = 1;
    else if (tok == "P6") channels = 3;
    else throw MalformedHeader("unsupported magic: " + tok);

    std::string wtok, htok, mtok;
    if (!next_token(bytes, pos, wtok) || !next_token(bytes, pos, htok) ||
        !next_token(bytes, pos, mtok)) {
        throw MalformedHeader("incomplete header");
    }
    const int w = parse_pnm_int(wtok);
    const int h = parse_pnm_int(htok);
    const int maxval = parse_pnm_int(mtok);
    if (w < 1 || h < 1) throw MalformedHeader("non-positive dimensions");
    if (maxval != 255) throw UnsupportedMaxval("maxval must be 255, got " + mtok);

    // Exactly one whitespace byte separates the header from the payload.
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        throw MalformedHeader("missing delimiter after maxval");
    }
    ++pos;

    Raster out(w, h, channels);
    const std::size_t need = out.data.size();
    if (bytes.size() - pos < need) throw TruncatedData("payload short by " +
        std::to_string(need - (bytes.size() - pos)) + " bytes");
    std::memcpy(out.data.data(), bytes.data() + pos, need);
    return out;
}

std::vector<std::uint8_t> encode_image(const Raster& img) {
    if (!img.valid()) throw Error("invalid raster");
    std::string header = (img.channels == 1 ? "P5\n" : "P6\n");
    header += std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.data.begin(), img.data.end());
    return out;
}

Raster read_image(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return decode_image(bytes);
}

void write_image(const std::string& path, const Raster& img) {
    const auto bytes = encode_image(img);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write to " + path);
}

// --- intensity ---------------------------------------------------------------

Raster to_gray(const Raster& img) {
    if (img.channels == 1) return img;
    Raster out(img.width, img.height, 1);
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = 0.299 * img.data[3 * i] + 0.587 * img.data[3 * i + 1] +
                         0.114 * img.data[3 * i + 2];
        out.data[i] = static_cast<std::uint8_t>(std::floor(y + 0.5));
    }
    out.mm_per_px = img.mm_per_px;
    return out;
}

BinaryMask threshold(const Raster& img, int t) {
    if (img.channels != 1) throw WrongChannelCount("threshold requires a gray raster");
    BinaryMask mask(img.width, img.height);
    const std::size_t n = img.data.size();
    for (std::size_t i = 0; i < n; ++i) mask.bits[i] = img.data[i] >= t ? 1 : 0;
    return mask;
}

int otsu_threshold(const Raster& img) {
    const Raster gray = to_gray(img);
    std::array<std::uint64_t, 256> hist{};
    for (std::uint8_t v : gray.data) ++hist[v];
    const double total = static_cast<double>(gray.data.size());

    double sum_all = 0.0;
    for (int v = 0; v < 256; ++v) sum_all += static_cast<double>(v) * hist[v];

    // Maximize between-class variance over split "background <= k < foreground".
    double best_var = -1.0;
    int best_k = 0;
    double w_bg = 0.0, sum_bg = 0.0;
    for (int k = 0; k < 255; ++k) {
        w_bg += static_cast<double>(hist[k]);
        sum_bg += static_cast<double>(k) * hist[k];
        const double w_fg = total - w_bg;
        if (w_bg == 0.0 || w_fg == 0.0) continue;
        const double mu_bg = sum_bg / w_bg;
        const double mu_fg = (sum_all - sum_bg) / w_fg;
        const double var = w_bg * w_fg * (mu_bg - mu_fg) * (mu_bg - mu_fg);
        if (var > best_var) {
            best_var = var;
            best_k = k;
        }
    }
    // Foreground is ">= k+1" in threshold()'s convention.
    return best_k + 1;
}

// --- connected components / quad ---------------------------------------------

namespace {

// Largest 4-connected component, via scanline flood fill.
std::vector<std::uint32_t> largest_component(const BinaryMask& mask, std::size_t& out_size) {
    const int w = mask.width, h = mask.height;
    std::vector<std::int32_t> label(static_cast<std::size_t>(w) * h, -1);
    std::vector<std::uint32_t> best, current;
    std::vector<std::uint32_t> stack;
    std::int32_t next_label = 0;
    for (std::size_t start = 0; start < label.size(); ++start) {
        if (!mask.bits[start] || label[start] != -1) continue;
        current.clear();
        stack.assign(1, static_cast<std::uint32_t>(start));
        label[start] = next_label;
        while (!stack.empty()) {
            const std::uint32_t p = stack.back();
            stack.pop_back();
            current.push_back(p);
            const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
            const std::array<std::pair<int, int>, 4> nbr{{{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}}};
            for (auto [nx, ny] : nbr) {
                if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
                if (mask.bits[q] && label[q] == -1) {
                    label[q] = next_label;
                    stack.push_back(static_cast<std::uint32_t>(q));
                }
            }
        }
        if (current.size() > best.size()) best.swap(current);
        ++next_label;
    }
    out_size = best.size();
    return best;
}

double cross(Point o, Point a, Point b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew's monotone chain; returns the hull counter-clockwise in math
// coordinates (clockwise on screen with y down).
std::vector<Point> convex_hull(std::vector<Point> pts) {
    std::sort(pts.begin(), pts.end(), [](Point a, Point b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(), [](Point a, Point b) {
                  return a.x == b.x && a.y == b.y;
              }),
              pts.end());
    const std::size_t n = pts.size();
    if (n < 3) return pts;
    std::vector<Point> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = n - 1, lo = k + 1; i-- > 0;) {
        while (k >= lo && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

double tri_area2(Point a, Point b, Point c) { // twice the signed triangle area
    return std::abs(cross(a, b, c));
}

double quad_area(const std::array<Point, 4>& c) {
    double s = 0.0;
    for (int i = 0; i < 4; ++i) {
        const Point& p = c[i];
        const Point& q = c[(i + 1) % 4];
        s += p.x * q.y - q.x * p.y;
    }
    return std::abs(s) / 2.0;
}

double point_segment_dist(Point p, Point a, Point b) {
    const double ex = b.x - a.x, ey = b.y - a.y;
    const double len2 = ex * ex + ey * ey;
    double t = len2 > 0.0 ? ((p.x - a.x) * ex + (p.y - a.y) * ey) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - a.x - t * ex, p.y - a.y - t * ey);
}

// Keeps every vertex the chord from lo to hi (ring indices, forward) misses by
// more than tol, recursing on the worst offender.
void dp_simplify(const std::vector<Point>& hull, std::size_t lo, std::size_t hi,
                 std::vector<char>& keep) {
    const std::size_t n = hull.size();
    const std::size_t span = (hi + n - lo) % n;
    if (span < 2) return;
    constexpr double tol = 0.5; // px
    double worst = -1.0;
    std::size_t wi = 0;
    for (std::size_t s = 1; s < span; ++s) {
        const std::size_t i = (lo + s) % n;
        const double d = point_segment_dist(hull[i], hull[lo], hull[hi]);
        if (d > worst) { worst = d; wi = i; }
    }
    if (worst <= tol) return;
    keep[wi] = 1;
    dp_simplify(hull, lo, wi, keep);
    dp_simplify(hull, wi, hi, keep);
}

// Rasterized straight edges leave sub-pixel serration on the hull: many
// vertices each within half a pixel of its edge line. They can never be the
// extracted corners but make the quad search cubic in a large n, so coalesce
// them first. Deviation is measured against the original ring (not each
// vertex's momentary neighbours), otherwise chained removals can straighten
// a gently curving arc and eat a real corner.
void simplify_hull(std::vector<Point>& hull) {
    const std::size_t n = hull.size();
    if (n <= 4) return;
    std::size_t ia = 0, ib = 0;
    double far2 = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = hull[i].x - hull[j].x, dy = hull[i].y - hull[j].y;
            const double d2 = dx * dx + dy * dy;
            if (d2 > far2) { far2 = d2; ia = i; ib = j; }
        }
    }
    std::vector<char> keep(n, 0);
    keep[ia] = keep[ib] = 1;
    dp_simplify(hull, ia, ib, keep);
    dp_simplify(hull, ib, ia, keep);
    std::vector<Point> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) out.push_back(hull[i]);
    hull.swap(out);
}

std::array<Point, 4> max_area_quad(const std::vector<Point>& hull) {
    const std::size_t n = hull.size();
    double best = -1.0;
    std::array<Point, 4> out{};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 2; j < n; ++j) {
            double best_left = -1.0, best_right = -1.0;
            std::size_t kl = 0, kr = 0;
            for (std::size_t k = i + 1; k < j; ++k) {
                const double a = tri_area2(hull[i], hull[k], hull[j]);
                if (a > best_left) { best_left = a; kl = k; }
            }
            for (std::size_t k = (j + 1) % n; k != i; k = (k + 1) % n) {
                const double a = tri_area2(hull[i], hull[j], hull[k]);
                if (a > best_right) { best_right = a; kr = k; }
            }
            if (best_left < 0 || best_right < 0) continue;
            const double area = (best_left + best_right) / 2.0;
            if (area > best) {
                best = area;
                out = {hull[i], hull[kl], hull[j], hull[kr]};
            }
        }
    }
    if (best < 0) throw DegenerateComponent("no 4-vertex subset");
    return out;
}

std::array<Point, 4> canonical_order(std::array<Point, 4> c) {
    Point centroid{0, 0};
    for (const Point& p : c) { centroid.x += p.x / 4.0; centroid.y += p.y / 4.0; }
    // Ascending atan2 with y down is clockwise on screen.
    std::sort(c.begin(), c.end(), [&](Point a, Point b) {
        return std::atan2(a.y - centroid.y, a.x - centroid.x) <
               std::atan2(b.y - centroid.y, b.x - centroid.x);
    });
    // Rotate so the min (x+y) corner leads; break ties toward smaller y.
    int start = 0;
    for (int i = 1; i < 4; ++i) {
        const double di = c[i].x + c[i].y, ds = c[start].x + c[start].y;
        if (di < ds || (di == ds && c[i].y < c[start].y)) start = i;
    }
    std::rotate(c.begin(), c.begin() + start, c.end());
    return c;
}

// Corners read straight off the lattice hull sit up to a couple of pixels
// inside the component's true boundary. Per edge, take the component's
// outermost pixel per column (or row) across the middle of the edge, fit the
// slope by least squares, then anchor the offset on the outward residual
// envelope: quantized boundary pixels lie up to one pixel inside the true
// edge, so the envelope is the edge line, and exactly axis-aligned edges
// (zero residual spread) keep their lattice position. Adjacent fitted lines
// intersect in the refined corners.
std::array<Point, 4> refine_corners(const std::array<Point, 4>& quad,
                                    const std::vector<std::uint32_t>& component, int width,
                                    int height) {
    struct Line { double a, b, c; }; // a*x + b*y + c = 0
    std::array<Line, 4> lines{};
    Point centroid{0.0, 0.0};
    for (const Point& p : quad) { centroid.x += p.x / 4.0; centroid.y += p.y / 4.0; }
    for (int k = 0; k < 4; ++k) {
        const Point p = quad[k];
        const Point q = quad[(k + 1) % 4];
        const double ex = q.x - p.x, ey = q.y - p.y;
        const double len = std::hypot(ex, ey);
        if (len <= 0.0) return quad;
        lines[k] = {ey / len, -ex / len, (ex * p.y - ey * p.x) / len};
        const bool column_probe = std::abs(ex) >= std::abs(ey); // outermost y per x
        // Outward normal (away from the centroid); its probe-axis component
        // decides which envelope this edge owns, and the dominant-axis probe
        // keeps that component at least len/sqrt(2).
        double nx = ey, ny = -ex;
        if (nx * (centroid.x - (p.x + q.x) / 2.0) + ny * (centroid.y - (p.y + q.y) / 2.0) > 0.0) {
            nx = -nx;
            ny = -ny;
        }
        const double out_sign = (column_probe ? ny : nx) > 0.0 ? 1.0 : -1.0;
        // Within its own key span a convex polygon's edge is the outermost
        // boundary, so every windowed extreme samples this edge and no other.
        const double p_key = column_probe ? p.x : p.y;
        const double q_key = column_probe ? q.x : q.y;
        const double span = std::abs(q_key - p_key);
        const double k_lo = std::min(p_key, q_key) + 0.08 * span; // clear of corner rounding
        const double k_hi = std::max(p_key, q_key) - 0.08 * span;
        const int keys = column_probe ? width : height;
        std::vector<int> extreme(static_cast<std::size_t>(keys), std::numeric_limits<int>::min());
        for (const std::uint32_t px : component) {
            const int x = static_cast<int>(px % static_cast<std::uint32_t>(width));
            const int y = static_cast<int>(px / static_cast<std::uint32_t>(width));
            const int key = column_probe ? x : y;
            if (key < k_lo || key > k_hi) continue;
            const int val = column_probe ? y : x;
            const int score = static_cast<int>(out_sign) * val;
            if (score > extreme[key]) extreme[key] = score;
        }
        std::vector<double> us, vs;
        us.reserve(static_cast<std::size_t>(keys));
        vs.reserve(static_cast<std::size_t>(keys));
        for (int key = 0; key < keys; ++key) {
            if (extreme[key] == std::numeric_limits<int>::min()) continue;
            us.push_back(key);
            vs.push_back(out_sign * extreme[key]);
        }
        if (us.size() < 2) continue;
        // Objects lying against the edge bite the silhouette inward by many
        // pixels, so fit, anchor on the outward envelope (which only genuine
        // edge samples reach), drop samples deeper inside than quantization
        // allows, and refit.
        std::vector<char> kept(us.size(), 1);
        double m = 0.0, b = 0.0;
        bool fitted = false;
        for (int round = 0; round < 3; ++round) {
            double su = 0.0, sv = 0.0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < us.size(); ++i) {
                if (!kept[i]) continue;
                su += us[i];
                sv += vs[i];
                ++n;
            }
            if (n < 2) break;
            const double mu = su / n, mv = sv / n;
            double suu = 0.0, suv = 0.0;
            for (std::size_t i = 0; i < us.size(); ++i) {
                if (!kept[i]) continue;
                suu += (us[i] - mu) * (us[i] - mu);
                suv += (us[i] - mu) * (vs[i] - mv);
            }
            if (suu <= 0.0) break;
            m = suv / suu;
            b = mv - m * mu;
            std::vector<double> outward;
            outward.reserve(n);
            for (std::size_t i = 0; i < us.size(); ++i) {
                if (!kept[i]) continue;
                outward.push_back(out_sign * (vs[i] - (m * us[i] + b)));
            }
            std::sort(outward.begin(), outward.end());
            // Near-outermost rather than outermost: one stray pixel must not
            // own the edge position.
            const auto idx = static_cast<std::size_t>(std::llround(0.98 * (outward.size() - 1)));
            b += out_sign * outward[idx];
            fitted = true;
            for (std::size_t i = 0; i < us.size(); ++i)
                kept[i] = std::abs(vs[i] - (m * us[i] + b)) <= 1.25;
        }
        if (!fitted) continue;
        lines[k] = column_probe ? Line{m, -1.0, b} : Line{1.0, -m, -b};
    }
    std::array<Point, 4> out = quad;
    for (int k = 0; k < 4; ++k) {
        const Line& l1 = lines[(k + 3) % 4];
        const Line& l2 = lines[k];
        const double det = l1.a * l2.b - l2.a * l1.b;
        if (std::abs(det) < 1e-9) continue;
        out[k] = {(l1.b * l2.c - l2.b * l1.c) / det, (l1.c * l2.a - l2.c * l1.a) / det};
    }
    return out;
}

} // namespace

Quad largest_quad(const BinaryMask& mask) {
    std::size_t size = 0;
    const auto component = largest_component(mask, size);
    if (component.empty()) throw EmptyMask("no true pixels");

    std::vector<Point> pts;
    pts.reserve(component.size());
    for (std::uint32_t p : component) {
        pts.push_back({static_cast<double>(p % mask.width), static_cast<double>(p / mask.width)});
    }
    auto hull = convex_hull(std::move(pts));
    simplify_hull(hull);
    if (hull.size() < 4) throw DegenerateComponent("hull has fewer than 4 vertices");

    Quad q;
    q.corners = canonical_order(
        refine_corners(max_area_quad(hull), component, mask.width, mask.height));
    if (quad_area(q.corners) < 16.0) throw DegenerateComponent("quad area below 16 px^2");
    return q;
}

// --- homography ----------------------------------------------------------------

Point Homography::apply(Point p) const {
    const double w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
    return {(m[0][0] * p.x + m[0][1] * p.y + m[0][2]) / w,
            (m[1][0] * p.x + m[1][1] * p.y + m[1][2]) / w};
}

double Homography::det() const {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Homography Homography::inverse() const {
    const double d = det();
    if (std::abs(d) <= 1e-12) throw SingularSystem("homography not invertible");
    const auto& a = m;
    Homography inv;
    inv.m[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / d;
    inv.m[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / d;
    inv.m[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / d;
    inv.m[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / d;
    inv.m[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / d;
    inv.m[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / d;
    inv.m[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / d;
    inv.m[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / d;
    inv.m[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / d;
    // Renormalize to keep m[2][2] = 1.
    const double s = inv.m[2][2];
    if (std::abs(s) <= 1e-300) throw SingularSystem("degenerate normalization");
    for (auto& row : inv.m)
        for (double& v : row) v /= s;
    return inv;
}

namespace {

// Gaussian elimination with partial pivoting on the 8x8 DLT system.
std::array<double, 8> solve8(std::array<std::array<double, 9>, 8> a) {
    for (int col = 0; col < 8; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 8; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-12) throw SingularSystem("rank-deficient corner system");
        std::swap(a[col], a[pivot]);
        for (int r = 0; r < 8; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (int c = col; c < 9; ++c) a[r][c] -= f * a[col][c];
        }
    }
    std::array<double, 8> x{};
    for (int i = 0; i < 8; ++i) x[i] = a[i][8] / a[i][i];
    return x;
}

} // namespace

Homography homography_from_quad(const Quad& q, int out_w, int out_h) {
    if (out_w < 2 || out_h < 2) throw Error("output dimensions must be >= 2");
    const std::array<Point, 4> dst{{{0.0, 0.0},
                                    {static_cast<double>(out_w - 1), 0.0},
                                    {static_cast<double>(out_w - 1), static_cast<double>(out_h - 1)},
                                    {0.0, static_cast<double>(out_h - 1)}}};
    std::array<std::array<double, 9>, 8> sys{};
    for (int i = 0; i < 4; ++i) {
        const auto [x, y] = q.corners[i];
        const auto [u, v] = dst[i];
        sys[2 * i] = {x, y, 1, 0, 0, 0, -u * x, -u * y, u};
        sys[2 * i + 1] = {0, 0, 0, x, y, 1, -v * x, -v * y, v};
    }
    const auto h = solve8(sys);
    Homography H;
    H.m = {{{h[0], h[1], h[2]}, {h[3], h[4], h[5]}, {h[6], h[7], 1.0}}};
    if (std::abs(H.det()) <= 1e-12) throw SingularSystem("solved matrix is singular");
    return H;
}

Raster warp(const Raster& img, const Homography& h, int out_w, int out_h) {
    const Homography inv = h.inverse(); // throws SingularSystem
    Raster out(out_w, out_h, img.channels);
    const int w = img.width, hgt = img.height, ch = img.channels;
    for (int y = 0; y < out_h; ++y) {
        // The mapped numerators/denominator are affine in x; stepping them
        // beats a full matrix apply per pixel.
        double nx = inv.m[0][1] * y + inv.m[0][2];
        double ny = inv.m[1][1] * y + inv.m[1][2];
        double dn = inv.m[2][1] * y + inv.m[2][2];
        for (int x = 0; x < out_w;
             ++x, nx += inv.m[0][0], ny += inv.m[1][0], dn += inv.m[2][0]) {
            const double wq = 1.0 / dn;
            const Point s{nx * wq, ny * wq};
            if (!(s.x >= 0.0) || !(s.y >= 0.0) || !(s.x <= w - 1) || !(s.y <= hgt - 1))
                continue; // stays black (also skips dn == 0)
            const int x0 = static_cast<int>(std::floor(s.x));
            const int y0 = static_cast<int>(std::floor(s.y));
            const int x1 = std::min(x0 + 1, w - 1);
            const int y1 = std::min(y0 + 1, hgt - 1);
            const double fx = s.x - x0, fy = s.y - y0;
            for (int c = 0; c < ch; ++c) {
                const double v = (1 - fx) * (1 - fy) * img.at(x0, y0, c) +
                                 fx * (1 - fy) * img.at(x1, y0, c) +
                                 (1 - fx) * fy * img.at(x0, y1, c) +
                                 fx * fy * img.at(x1, y1, c);
                out.at(x, y, c) = static_cast<std::uint8_t>(
                    std::min(255.0, std::max(0.0, std::floor(v + 0.5))));
            }
        }
    }
    return out;
}

} // namespace traygrade
