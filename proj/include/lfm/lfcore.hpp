#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "lfm/image.hpp"

namespace lfm {

/// Spatial form: the sensor layout. Pixel (s_x*A_x + a_x, s_y*A_y + a_y)
/// holds lf(a_x, a_y, s_x, s_y).
Image2D lf_to_spatial(const LightField4D& lf);

/// Wraps a spatial-form image as a 4D light field. Image dims must be
/// divisible by (ax, ay).
LightField4D spatial_to_lf(const Image2D& img, std::size_t ax, std::size_t ay);

/// Rearranges a spatial-form image into per-angle perspective-view tiles:
/// output[(a_x*S_x + s_x, a_y*S_y + s_y)] = input[(s_x*A_x + a_x, s_y*A_y + a_y)].
Image2D spatial_to_angular(const Image2D& img, std::size_t ax, std::size_t ay);

/// Exact inverse of spatial_to_angular.
Image2D angular_to_spatial(const Image2D& img, std::size_t ax, std::size_t ay);

/// One perspective view: the (a_x, a_y) pixel under every lenslet.
Image2D extract_view(const LightField4D& lf, std::size_t a_x, std::size_t a_y);

/// Photometric + geometric rectification of a raw sensor image.
/// The white image is normalized to unit mean and used as a flat-field
/// divisor, floored at 1e-3 to avoid blow-up at dark lenslet edges. The
/// result is resampled bilinearly so exactly target_ppl pixels span one
/// lenslet with lenslet centers on the integer grid; target_ppl must be odd.
/// grid_offset (offx, offy) is the raw-pixel position of the first lenslet
/// boundary.
LightField4D rectify(const Image2D& raw, const Image2D& white, double raw_ppl,
                     std::size_t target_ppl, double offx = 0.0,
                     double offy = 0.0);

/// Per-pixel arithmetic mean over depth.
Image2D z_project_mean(const Volume3D& vol);

/// Grid cell occupied by a tile; gx indexes along x (width), gy along y.
struct TilePlacement {
    std::size_t gx = 0;
    std::size_t gy = 0;
};

/// Blends uniformly sized tiles placed on a regular grid with separable
/// linear border ramps over the overlap band, then normalizes by the
/// accumulated weight. Constant tiles produce a constant mosaic.
Image2D stitch_tiles(const std::vector<std::pair<Image2D, TilePlacement>>& tiles,
                     double overlap_frac);
Volume3D stitch_tiles(const std::vector<std::pair<Volume3D, TilePlacement>>& tiles,
                      double overlap_frac);

/// Linear ramp weight for local coordinate c of a tile of extent w with an
/// overlap band of ov samples at each border. Complementary across
/// neighboring tiles: entering + leaving weights sum to 1.
double stitch_weight_1d(std::size_t c, std::size_t w, std::size_t ov);

} // namespace lfm
