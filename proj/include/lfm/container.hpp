#pragma once

#include <string>
#include <variant>
#include <vector>

#include "lfm/image.hpp"

namespace lfm {

/// On-disk layout: magic "LFM1" (4 bytes), u32 little-endian header length,
/// UTF-8 JSON header {kind, dims, dtype:"f32", axis_order, meta}, then the
/// raw little-endian f32 payload, row-major in the declared axis order.
/// Kinds: "img2d" (x,y), "vol3d" (z,x,y), "lf4d" (a_x,a_y,s_x,s_y), plus
/// "psf" used by the PSF stack serializer.
struct ContainerBlob {
    std::string kind;
    std::vector<std::size_t> dims;
    std::vector<std::string> axis_order;
    nlohmann::json meta = nlohmann::json::object();
    std::vector<float> payload;
};

void write_blob(const ContainerBlob& blob, const std::string& path);
ContainerBlob read_blob(const std::string& path);

/// Kind string of a container file without loading the payload.
std::string peek_kind(const std::string& path);

void write_container(const Image2D& img, const std::string& path);
void write_container(const Volume3D& vol, const std::string& path);
void write_container(const LightField4D& lf, const std::string& path);

/// Reads any of the three payload kinds; throws IoError for "psf" or
/// unknown kinds (use read_blob / the PSF stack loader for those).
std::variant<Image2D, Volume3D, LightField4D> read_container(const std::string& path);

/// Type-checked convenience readers.
Image2D read_image2d(const std::string& path);
Volume3D read_volume3d(const std::string& path);
LightField4D read_lf4d(const std::string& path);

/// Binary PGM preview (P5), min-max scaled to the full range of the chosen
/// bit depth (8 or 16). The applied scaling is recorded in a sidecar JSON
/// at path + ".json".
void write_pgm(const Image2D& img, const std::string& path, int bits = 8);

} // namespace lfm
