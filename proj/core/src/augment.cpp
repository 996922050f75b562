#include "traygrade/augment.hpp"

#include <algorithm>
#include <cmath>

#include "traygrade/rng.hpp"

namespace traygrade {

AugmentConfig AugmentConfig::yolo_defaults() {
    AugmentConfig c;
    c.hsv_h = 0.015;
    c.hsv_s = 0.7;
    c.hsv_v = 0.4;
    c.translate = 0.1;
    c.scale = 0.5;
    c.fliplr = 0.5;
    c.erasing = 0.4;
    c.mosaic = 1.0;
    return c;
}

AugmentConfig AugmentConfig::customized() {
    AugmentConfig c;
    c.translate = 0.1;
    c.scale = 0.1;
    c.fliplr = 0.1;
    c.flipud = 0.1;
    c.rotate90 = 0.1;
    c.saturation_range = 0.15;
    c.brightness_range = 0.15;
    c.exposure_range = 0.06;
    c.blur_max_px = 0.6;
    c.noise_max_frac = 0.005;
    c.mosaic = 0.1;
    return c;
}

double mirror_unit(double x) {
    return static_cast<double>(1000000 - std::llround(x * 1e6)) / 1e6;
}

TransformSpec sample_spec(const AugmentConfig& cfg, std::uint64_t draw_index) {
    Rng r = Rng(cfg.seed).fork(draw_index);

    // Every knob draws unconditionally so the stream layout never depends on
    // config values.
    const double u_mosaic = r.uniform();
    const double u_fliplr = r.uniform();
    const double u_flipud = r.uniform();
    const double u_rot = r.uniform();
    const int quarter_turns = r.uniform_int(1, 3);
    const double dx = r.uniform(-cfg.translate, cfg.translate);
    const double dy = r.uniform(-cfg.translate, cfg.translate);
    const double factor = r.uniform(1.0 - cfg.scale, 1.0 + cfg.scale);
    const double hue = r.uniform(-cfg.hsv_h, cfg.hsv_h);
    const double sat_gain = r.uniform(-cfg.hsv_s, cfg.hsv_s);
    const double val_gain = r.uniform(-cfg.hsv_v, cfg.hsv_v);
    const double sat = r.uniform(-cfg.saturation_range, cfg.saturation_range);
    const double bri = r.uniform(-cfg.brightness_range, cfg.brightness_range);
    const double expo = r.uniform(-cfg.exposure_range, cfg.exposure_range);
    const double sigma = r.uniform(0.0, cfg.blur_max_px);
    const double noise_frac = r.uniform(0.0, cfg.noise_max_frac);
    const std::uint64_t noise_seed = r.bits();
    const double u_erase = r.uniform();

    TransformSpec s;
    const auto push = [&](Transform::Kind k, double a = 0.0, double b = 0.0,
                          std::uint64_t seed = 0) {
        s.ops.push_back(Transform{k, a, b, seed});
    };
    if (u_mosaic < cfg.mosaic) push(Transform::Kind::mosaic);
    if (u_fliplr < cfg.fliplr) push(Transform::Kind::flip_h);
    if (u_flipud < cfg.flipud) push(Transform::Kind::flip_v);
    if (u_rot < cfg.rotate90) push(Transform::Kind::rotate90, quarter_turns);
    if (dx != 0.0 || dy != 0.0) push(Transform::Kind::translate, dx, dy);
    if (factor != 1.0) push(Transform::Kind::scale, factor);
    if (hue != 0.0) push(Transform::Kind::hue, hue);
    if (sat_gain != 0.0) push(Transform::Kind::saturation, sat_gain);
    if (val_gain != 0.0) push(Transform::Kind::brightness, val_gain);
    if (sat != 0.0) push(Transform::Kind::saturation, sat);
    if (bri != 0.0) push(Transform::Kind::brightness, bri);
    if (expo != 0.0) push(Transform::Kind::exposure, expo);
    if (sigma != 0.0) push(Transform::Kind::blur, sigma);
    if (noise_frac != 0.0) push(Transform::Kind::noise, noise_frac, 0.0, noise_seed);
    if (u_erase < cfg.erasing) push(Transform::Kind::erasing);
    return s;
}

namespace {

std::uint8_t round_u8(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

void check_boxes(const std::vector<DetBox>& boxes) {
    const double eps = 1e-9;
    for (const DetBox& b : boxes) {
        const double x1 = b.cx - b.w / 2.0, x2 = b.cx + b.w / 2.0;
        const double y1 = b.cy - b.h / 2.0, y2 = b.cy + b.h / 2.0;
        if (x1 < -eps || y1 < -eps || x2 > 1.0 + eps || y2 > 1.0 + eps)
            throw BoxOutOfRange("augment: box outside the unit square");
    }
}

Raster flip_h_img(const Raster& in) {
    Raster out(in.width, in.height, in.channels);
    out.mm_per_px = in.mm_per_px;
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x)
            for (int c = 0; c < in.channels; ++c) out.at(x, y, c) = in.at(in.width - 1 - x, y, c);
    return out;
}

Raster flip_v_img(const Raster& in) {
    Raster out(in.width, in.height, in.channels);
    out.mm_per_px = in.mm_per_px;
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x)
            for (int c = 0; c < in.channels; ++c) out.at(x, y, c) = in.at(x, in.height - 1 - y, c);
    return out;
}

Raster rot_cw_img(const Raster& in) {
    Raster out(in.height, in.width, in.channels);
    out.mm_per_px = in.mm_per_px;
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < in.channels; ++c) out.at(x, y, c) = in.at(y, in.height - 1 - x, c);
    return out;
}

// Clips boxes to the unit square, dropping any that keep less than 10% of
// their unclipped area. Untouched boxes pass through bit-identical.
std::vector<DetBox> clip_boxes(const std::vector<DetBox>& boxes) {
    std::vector<DetBox> out;
    out.reserve(boxes.size());
    for (const DetBox& b : boxes) {
        const double x1 = b.cx - b.w / 2.0, x2 = b.cx + b.w / 2.0;
        const double y1 = b.cy - b.h / 2.0, y2 = b.cy + b.h / 2.0;
        const double nx1 = std::clamp(x1, 0.0, 1.0), nx2 = std::clamp(x2, 0.0, 1.0);
        const double ny1 = std::clamp(y1, 0.0, 1.0), ny2 = std::clamp(y2, 0.0, 1.0);
        const double kept = std::max(0.0, nx2 - nx1) * std::max(0.0, ny2 - ny1);
        const double full = b.w * b.h;
        if (full <= 0.0 || kept < 0.1 * full) continue;
        if (nx1 == x1 && nx2 == x2 && ny1 == y1 && ny2 == y2) {
            out.push_back(b);
        } else {
            DetBox c = b;
            c.cx = (nx1 + nx2) / 2.0;
            c.cy = (ny1 + ny2) / 2.0;
            c.w = nx2 - nx1;
            c.h = ny2 - ny1;
            out.push_back(c);
        }
    }
    return out;
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    v = mx;
    s = mx > 0.0 ? d / mx : 0.0;
    if (d <= 0.0) {
        h = 0.0;
        return;
    }
    if (mx == r)
        h = 60.0 * std::fmod((g - b) / d, 6.0);
    else if (mx == g)
        h = 60.0 * ((b - r) / d + 2.0);
    else
        h = 60.0 * ((r - g) / d + 4.0);
    if (h < 0.0) h += 360.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    const double c = v * s;
    const double hh = h / 60.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hh, 2.0) - 1.0));
    double r1 = 0, g1 = 0, b1 = 0;
    if (hh < 1)
        r1 = c, g1 = x;
    else if (hh < 2)
        r1 = x, g1 = c;
    else if (hh < 3)
        g1 = c, b1 = x;
    else if (hh < 4)
        g1 = x, b1 = c;
    else if (hh < 5)
        r1 = x, b1 = c;
    else
        r1 = c, b1 = x;
    const double m = v - c;
    r = r1 + m;
    g = g1 + m;
    b = b1 + m;
}

void hue_shift(Raster& img, double turn_fraction) {
    if (img.channels != 3) return;
    const double shift = turn_fraction * 360.0;
    for (std::size_t i = 0; i < img.data.size(); i += 3) {
        double h, s, v;
        rgb_to_hsv(img.data[i] / 255.0, img.data[i + 1] / 255.0, img.data[i + 2] / 255.0, h, s, v);
        h = std::fmod(h + shift + 360.0, 360.0);
        double r, g, b;
        hsv_to_rgb(h, s, v, r, g, b);
        img.data[i] = round_u8(r * 255.0);
        img.data[i + 1] = round_u8(g * 255.0);
        img.data[i + 2] = round_u8(b * 255.0);
    }
}

void saturation_delta(Raster& img, double d) {
    if (img.channels != 3) return;
    for (std::size_t i = 0; i < img.data.size(); i += 3) {
        const double l =
            0.299 * img.data[i] + 0.587 * img.data[i + 1] + 0.114 * img.data[i + 2];
        for (int c = 0; c < 3; ++c)
            img.data[i + c] = round_u8(l + (img.data[i + c] - l) * (1.0 + d));
    }
}

void brightness_delta(Raster& img, double d) {
    for (std::uint8_t& v : img.data) v = round_u8(v * (1.0 + d));
}

void exposure_delta(Raster& img, double d) {
    // Multiplicative in linear light (gamma 2.2 decode/encode).
    std::array<std::uint8_t, 256> lut;
    for (int v = 0; v < 256; ++v) {
        const double lin = std::pow(v / 255.0, 2.2) * (1.0 + d);
        lut[v] = round_u8(255.0 * std::pow(std::max(lin, 0.0), 1.0 / 2.2));
    }
    for (std::uint8_t& v : img.data) v = lut[v];
}

void gaussian_blur(Raster& img, double sigma) {
    if (sigma <= 0.0) return;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(radius + 1);
    double norm = 0.0;
    for (int i = 0; i <= radius; ++i) {
        k[i] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        norm += i == 0 ? k[i] : 2.0 * k[i];
    }
    for (double& w : k) w /= norm;

    const int w = img.width, h = img.height, ch = img.channels;
    std::vector<double> tmp(img.data.size());
    const auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = k[0] * img.at(x, y, c);
                for (int i = 1; i <= radius; ++i)
                    acc += k[i] * (img.at(clampi(x - i, 0, w - 1), y, c) +
                                   img.at(clampi(x + i, 0, w - 1), y, c));
                tmp[(static_cast<std::size_t>(y) * w + x) * ch + c] = acc;
            }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = k[0] * tmp[(static_cast<std::size_t>(y) * w + x) * ch + c];
                for (int i = 1; i <= radius; ++i)
                    acc += k[i] *
                           (tmp[(static_cast<std::size_t>(clampi(y - i, 0, h - 1)) * w + x) * ch + c] +
                            tmp[(static_cast<std::size_t>(clampi(y + i, 0, h - 1)) * w + x) * ch + c]);
                img.at(x, y, c) = round_u8(acc);
            }
}

void add_noise(Raster& img, double frac, std::uint64_t seed) {
    const std::size_t total = static_cast<std::size_t>(img.width) * img.height;
    const std::size_t n = static_cast<std::size_t>(std::floor(frac * static_cast<double>(total)));
    Rng r(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t px = static_cast<std::size_t>(r.below(total));
        for (int c = 0; c < img.channels; ++c) img.data[px * img.channels + c] = r.byte();
    }
}

} // namespace

std::pair<Raster, std::vector<DetBox>> apply_spec(const Raster& img,
                                                  const std::vector<DetBox>& boxes,
                                                  const TransformSpec& spec) {
    check_boxes(boxes);
    Raster out = img;
    std::vector<DetBox> bx = boxes;

    for (const Transform& op : spec.ops) {
        switch (op.kind) {
        case Transform::Kind::mosaic:
            throw Unsupported("apply_spec: mosaic needs four images; use apply_mosaic");
        case Transform::Kind::erasing:
            throw Unsupported("apply_spec: erasing is not implemented");
        case Transform::Kind::flip_h:
            out = flip_h_img(out);
            for (DetBox& b : bx) b.cx = mirror_unit(b.cx);
            break;
        case Transform::Kind::flip_v:
            out = flip_v_img(out);
            for (DetBox& b : bx) b.cy = mirror_unit(b.cy);
            break;
        case Transform::Kind::rotate90:
            for (int i = 0; i < static_cast<int>(op.a); ++i) {
                out = rot_cw_img(out);
                for (DetBox& b : bx) {
                    const DetBox p = b;
                    b.cx = mirror_unit(p.cy);
                    b.cy = p.cx;
                    b.w = p.h;
                    b.h = p.w;
                }
            }
            break;
        case Transform::Kind::translate: {
            const int ox = static_cast<int>(std::lround(op.a * out.width));
            const int oy = static_cast<int>(std::lround(op.b * out.height));
            Raster moved(out.width, out.height, out.channels, 0);
            moved.mm_per_px = out.mm_per_px;
            for (int y = 0; y < out.height; ++y) {
                const int sy = y - oy;
                if (sy < 0 || sy >= out.height) continue;
                for (int x = 0; x < out.width; ++x) {
                    const int sx = x - ox;
                    if (sx < 0 || sx >= out.width) continue;
                    for (int c = 0; c < out.channels; ++c) moved.at(x, y, c) = out.at(sx, sy, c);
                }
            }
            out = std::move(moved);
            // Boxes shift by the same whole-pixel offset the raster did.
            for (DetBox& b : bx) {
                b.cx += static_cast<double>(ox) / out.width;
                b.cy += static_cast<double>(oy) / out.height;
            }
            bx = clip_boxes(bx);
            break;
        }
        case Transform::Kind::scale: {
            const double s = op.a;
            Raster scaled(out.width, out.height, out.channels, 0);
            scaled.mm_per_px = out.mm_per_px;
            const double cx = out.width / 2.0, cy = out.height / 2.0;
            for (int y = 0; y < out.height; ++y) {
                const int sy = static_cast<int>(std::lround(cy + (y + 0.5 - cy) / s - 0.5));
                if (sy < 0 || sy >= out.height) continue;
                for (int x = 0; x < out.width; ++x) {
                    const int sx = static_cast<int>(std::lround(cx + (x + 0.5 - cx) / s - 0.5));
                    if (sx < 0 || sx >= out.width) continue;
                    for (int c = 0; c < out.channels; ++c) scaled.at(x, y, c) = out.at(sx, sy, c);
                }
            }
            out = std::move(scaled);
            for (DetBox& b : bx) {
                b.cx = 0.5 + (b.cx - 0.5) * s;
                b.cy = 0.5 + (b.cy - 0.5) * s;
                b.w *= s;
                b.h *= s;
            }
            bx = clip_boxes(bx);
            break;
        }
        case Transform::Kind::hue:
            hue_shift(out, op.a);
            break;
        case Transform::Kind::saturation:
            saturation_delta(out, op.a);
            break;
        case Transform::Kind::brightness:
            brightness_delta(out, op.a);
            break;
        case Transform::Kind::exposure:
            exposure_delta(out, op.a);
            break;
        case Transform::Kind::blur:
            gaussian_blur(out, op.a);
            break;
        case Transform::Kind::noise:
            add_noise(out, op.a, op.seed);
            break;
        }
    }
    return {std::move(out), std::move(bx)};
}

std::pair<Raster, std::vector<DetBox>> apply_mosaic(
    const std::array<Raster, 4>& tiles, const std::array<std::vector<DetBox>, 4>& boxes) {
    const int w = tiles[0].width, h = tiles[0].height, ch = tiles[0].channels;
    for (const Raster& t : tiles)
        if (t.width != w || t.height != h || t.channels != ch)
            throw DimensionMismatch("apply_mosaic: tile shapes differ");
    for (const std::vector<DetBox>& b : boxes) check_boxes(b);

    Raster out(2 * w, 2 * h, ch);
    std::vector<DetBox> all;
    for (int q = 0; q < 4; ++q) {
        const int qx = q % 2, qy = q / 2;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < ch; ++c)
                    out.at(qx * w + x, qy * h + y, c) = tiles[q].at(x, y, c);
        for (const DetBox& b : boxes[q]) {
            DetBox m = b;
            m.cx = (b.cx + qx) / 2.0;
            m.cy = (b.cy + qy) / 2.0;
            m.w = b.w / 2.0;
            m.h = b.h / 2.0;
            all.push_back(m);
        }
    }
    return {std::move(out), std::move(all)};
}

} // namespace traygrade
