#include "lfm/lfcore.hpp"

#include <algorithm>
#include <cmath>

namespace lfm {

namespace {

void require_divisible(const Image2D& img, std::size_t ax, std::size_t ay) {
    if (ax == 0 || ay == 0 || img.width % ax != 0 || img.height % ay != 0)
        throw DimensionError("image dims " + std::to_string(img.width) + "x" +
                             std::to_string(img.height) +
                             " not divisible into lenslets of " +
                             std::to_string(ax) + "x" + std::to_string(ay));
}

double sample_bilinear_clamped(const Image2D& img, double x, double y) {
    const double xc = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    const double yc = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    const std::size_t x0 = static_cast<std::size_t>(xc);
    const std::size_t y0 = static_cast<std::size_t>(yc);
    const std::size_t x1 = std::min(x0 + 1, img.width - 1);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double fx = xc - static_cast<double>(x0);
    const double fy = yc - static_cast<double>(y0);
    return (1.0 - fx) * ((1.0 - fy) * img.at(x0, y0) + fy * img.at(x0, y1)) +
           fx * ((1.0 - fy) * img.at(x1, y0) + fy * img.at(x1, y1));
}

} // namespace

Image2D lf_to_spatial(const LightField4D& lf) {
    Image2D out(lf.sx * lf.ax, lf.sy * lf.ay);
    for (std::size_t a_x = 0; a_x < lf.ax; ++a_x)
        for (std::size_t a_y = 0; a_y < lf.ay; ++a_y)
            for (std::size_t s_x = 0; s_x < lf.sx; ++s_x)
                for (std::size_t s_y = 0; s_y < lf.sy; ++s_y)
                    out.at(s_x * lf.ax + a_x, s_y * lf.ay + a_y) =
                        lf.at(a_x, a_y, s_x, s_y);
    out.meta = lf.meta;
    return out;
}

LightField4D spatial_to_lf(const Image2D& img, std::size_t ax, std::size_t ay) {
    require_divisible(img, ax, ay);
    const std::size_t sx = img.width / ax;
    const std::size_t sy = img.height / ay;
    LightField4D lf(ax, ay, sx, sy);
    for (std::size_t a_x = 0; a_x < ax; ++a_x)
        for (std::size_t a_y = 0; a_y < ay; ++a_y)
            for (std::size_t s_x = 0; s_x < sx; ++s_x)
                for (std::size_t s_y = 0; s_y < sy; ++s_y)
                    lf.at(a_x, a_y, s_x, s_y) =
                        img.at(s_x * ax + a_x, s_y * ay + a_y);
    lf.meta = img.meta;
    return lf;
}

Image2D spatial_to_angular(const Image2D& img, std::size_t ax, std::size_t ay) {
    require_divisible(img, ax, ay);
    const std::size_t sx = img.width / ax;
    const std::size_t sy = img.height / ay;
    Image2D out(img.width, img.height);
    for (std::size_t a_x = 0; a_x < ax; ++a_x)
        for (std::size_t a_y = 0; a_y < ay; ++a_y)
            for (std::size_t s_x = 0; s_x < sx; ++s_x)
                for (std::size_t s_y = 0; s_y < sy; ++s_y)
                    out.at(a_x * sx + s_x, a_y * sy + s_y) =
                        img.at(s_x * ax + a_x, s_y * ay + a_y);
    out.meta = img.meta;
    return out;
}

Image2D angular_to_spatial(const Image2D& img, std::size_t ax, std::size_t ay) {
    require_divisible(img, ax, ay);
    const std::size_t sx = img.width / ax;
    const std::size_t sy = img.height / ay;
    Image2D out(img.width, img.height);
    for (std::size_t a_x = 0; a_x < ax; ++a_x)
        for (std::size_t a_y = 0; a_y < ay; ++a_y)
            for (std::size_t s_x = 0; s_x < sx; ++s_x)
                for (std::size_t s_y = 0; s_y < sy; ++s_y)
                    out.at(s_x * ax + a_x, s_y * ay + a_y) =
                        img.at(a_x * sx + s_x, a_y * sy + s_y);
    out.meta = img.meta;
    return out;
}

Image2D extract_view(const LightField4D& lf, std::size_t a_x, std::size_t a_y) {
    if (a_x >= lf.ax || a_y >= lf.ay)
        throw DimensionError("extract_view: angular index out of range");
    Image2D out(lf.sx, lf.sy);
    for (std::size_t s_x = 0; s_x < lf.sx; ++s_x)
        for (std::size_t s_y = 0; s_y < lf.sy; ++s_y)
            out.at(s_x, s_y) = lf.at(a_x, a_y, s_x, s_y);
    return out;
}

LightField4D rectify(const Image2D& raw, const Image2D& white, double raw_ppl,
                     std::size_t target_ppl, double offx, double offy) {
    if (!raw.same_shape(white))
        throw DimensionError("rectify: white image dims differ from raw");
    if (!(raw_ppl > 1.0))
        throw ConfigError("rectify: raw pixels-per-lenslet must exceed 1");
    if (target_ppl < 3 || target_ppl % 2 == 0)
        throw ConfigError("rectify: target pixels-per-lenslet must be odd and >= 3");

    const double wmean = mean(white.data);
    if (!(wmean > 0.0))
        throw NumericError("rectify: white image mean not positive");

    // Flat-field division; the normalized white has unit mean so the floor
    // is an absolute 1e-3.
    constexpr double kWhiteFloor = 1e-3;
    Image2D corrected(raw.width, raw.height);
    for (std::size_t i = 0; i < raw.data.size(); ++i) {
        const double w = std::max(white.data[i] / wmean, kWhiteFloor);
        corrected.data[i] = raw.data[i] / w;
    }

    const std::size_t sx = static_cast<std::size_t>(
        std::floor((static_cast<double>(raw.width) - offx) / raw_ppl));
    const std::size_t sy = static_cast<std::size_t>(
        std::floor((static_cast<double>(raw.height) - offy) / raw_ppl));
    if (sx < 1 || sy < 1)
        throw DimensionError("rectify: lenslet grid exceeds image bounds");

    const double scale = raw_ppl / static_cast<double>(target_ppl);
    Image2D resampled(sx * target_ppl, sy * target_ppl);
    for (std::size_t ox = 0; ox < resampled.width; ++ox) {
        const double rx = offx + (static_cast<double>(ox) + 0.5) * scale - 0.5;
        for (std::size_t oy = 0; oy < resampled.height; ++oy) {
            const double ry = offy + (static_cast<double>(oy) + 0.5) * scale - 0.5;
            resampled.at(ox, oy) = sample_bilinear_clamped(corrected, rx, ry);
        }
    }

    LightField4D lf = spatial_to_lf(resampled, target_ppl, target_ppl);
    lf.meta["pixels_per_lenslet"] = target_ppl;
    for (const char* key : {"lenslet_pitch_um", "sensor_pitch_um"})
        if (raw.meta.contains(key)) lf.meta[key] = raw.meta[key];
    return lf;
}

Image2D z_project_mean(const Volume3D& vol) {
    if (vol.depth < 1) throw DimensionError("z_project_mean: empty volume");
    Image2D out(vol.vx, vol.vy);
    for (std::size_t z = 0; z < vol.depth; ++z)
        for (std::size_t x = 0; x < vol.vx; ++x)
            for (std::size_t y = 0; y < vol.vy; ++y)
                out.at(x, y) += vol.at(z, x, y);
    const double inv = 1.0 / static_cast<double>(vol.depth);
    for (double& v : out.data) v *= inv;
    return out;
}

double stitch_weight_1d(std::size_t c, std::size_t w, std::size_t ov) {
    if (ov == 0) return 1.0;
    const double denom = static_cast<double>(ov + 1);
    if (c < ov) return static_cast<double>(c + 1) / denom;
    if (c >= w - ov) return static_cast<double>(w - c) / denom;
    return 1.0;
}

namespace {

struct StitchPlan {
    std::size_t wt, ht;   // tile lateral extent
    std::size_t ovx, ovy; // overlap band per axis
    std::size_t w, h;     // mosaic lateral extent
    std::size_t stepx, stepy;
};

StitchPlan plan_stitch(std::size_t wt, std::size_t ht, double overlap_frac,
                       std::size_t max_gx, std::size_t max_gy) {
    if (!(overlap_frac >= 0.0) || overlap_frac >= 0.5)
        throw ConfigError("stitch_tiles: overlap_frac must be in [0, 0.5)");
    StitchPlan p;
    p.wt = wt;
    p.ht = ht;
    p.ovx = std::min<std::size_t>(
        static_cast<std::size_t>(std::llround(overlap_frac * static_cast<double>(wt))),
        wt / 2);
    p.ovy = std::min<std::size_t>(
        static_cast<std::size_t>(std::llround(overlap_frac * static_cast<double>(ht))),
        ht / 2);
    p.stepx = wt - p.ovx;
    p.stepy = ht - p.ovy;
    p.w = max_gx * p.stepx + wt;
    p.h = max_gy * p.stepy + ht;
    return p;
}

} // namespace

Image2D stitch_tiles(const std::vector<std::pair<Image2D, TilePlacement>>& tiles,
                     double overlap_frac) {
    if (tiles.empty()) throw ConfigError("stitch_tiles: no tiles");
    const std::size_t wt = tiles.front().first.width;
    const std::size_t ht = tiles.front().first.height;
    std::size_t max_gx = 0, max_gy = 0;
    for (const auto& [tile, pos] : tiles) {
        if (tile.width != wt || tile.height != ht)
            throw DimensionError("stitch_tiles: inconsistent tile sizes");
        max_gx = std::max(max_gx, pos.gx);
        max_gy = std::max(max_gy, pos.gy);
    }
    const StitchPlan p = plan_stitch(wt, ht, overlap_frac, max_gx, max_gy);

    Image2D acc(p.w, p.h);
    Image2D wsum(p.w, p.h);
    for (const auto& [tile, pos] : tiles) {
        const std::size_t x0 = pos.gx * p.stepx;
        const std::size_t y0 = pos.gy * p.stepy;
        for (std::size_t c = 0; c < wt; ++c) {
            const double wx = stitch_weight_1d(c, wt, p.ovx);
            for (std::size_t r = 0; r < ht; ++r) {
                const double wgt = wx * stitch_weight_1d(r, ht, p.ovy);
                acc.at(x0 + c, y0 + r) += wgt * tile.at(c, r);
                wsum.at(x0 + c, y0 + r) += wgt;
            }
        }
    }
    for (std::size_t i = 0; i < acc.data.size(); ++i)
        acc.data[i] = wsum.data[i] > 0.0 ? acc.data[i] / wsum.data[i] : 0.0;
    return acc;
}

Volume3D stitch_tiles(const std::vector<std::pair<Volume3D, TilePlacement>>& tiles,
                      double overlap_frac) {
    if (tiles.empty()) throw ConfigError("stitch_tiles: no tiles");
    const std::size_t nd = tiles.front().first.depth;
    const std::size_t wt = tiles.front().first.vx;
    const std::size_t ht = tiles.front().first.vy;
    std::size_t max_gx = 0, max_gy = 0;
    for (const auto& [tile, pos] : tiles) {
        if (tile.depth != nd || tile.vx != wt || tile.vy != ht)
            throw DimensionError("stitch_tiles: inconsistent tile sizes");
        max_gx = std::max(max_gx, pos.gx);
        max_gy = std::max(max_gy, pos.gy);
    }
    const StitchPlan p = plan_stitch(wt, ht, overlap_frac, max_gx, max_gy);

    Volume3D acc(nd, p.w, p.h);
    Image2D wsum(p.w, p.h);
    for (const auto& [tile, pos] : tiles) {
        const std::size_t x0 = pos.gx * p.stepx;
        const std::size_t y0 = pos.gy * p.stepy;
        for (std::size_t c = 0; c < wt; ++c) {
            const double wx = stitch_weight_1d(c, wt, p.ovx);
            for (std::size_t r = 0; r < ht; ++r) {
                const double wgt = wx * stitch_weight_1d(r, ht, p.ovy);
                wsum.at(x0 + c, y0 + r) += wgt;
                for (std::size_t z = 0; z < nd; ++z)
                    acc.at(z, x0 + c, y0 + r) += wgt * tile.at(z, c, r);
            }
        }
    }
    for (std::size_t x = 0; x < p.w; ++x)
        for (std::size_t y = 0; y < p.h; ++y) {
            const double wgt = wsum.at(x, y);
            for (std::size_t z = 0; z < nd; ++z)
                acc.at(z, x, y) = wgt > 0.0 ? acc.at(z, x, y) / wgt : 0.0;
        }
    return acc;
}

} // namespace lfm
