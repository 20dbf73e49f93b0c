#pragma once

#include "lfm/deconv.hpp"

namespace lfm {

/// Sliding normalized cross-correlation (Pearson per offset), valid region
/// only: output dims are reference - template + 1. Windows with zero
/// variance score 0.
Image2D ncc_map(const Image2D& tmpl, const Image2D& reference);

struct AlignmentResult {
    long dx = 0;             // template origin within the reference, x
    long dy = 0;             // template origin within the reference, y
    double peak_corr = -1.0;
    bool accepted = false;
    double threshold = 0.59;
};

/// Deconvolves the tile, z-projects both volumes and correlates the
/// projections. The global peak wins; ties break to the smallest (dx, dy)
/// in lexicographic order; acceptance requires peak_corr strictly above
/// the threshold.
AlignmentResult align_tile(const LightField4D& lf, const PsfStack& psfs,
                           const Volume3D& reference_vol, double threshold,
                           const DeconvConfig& deconv_cfg);

/// Effective axial range after refractive index compensation:
/// nD * step * ratio_num / ratio_den (µm).
double compensate_depth(double step_um, double ratio_num, double ratio_den,
                        std::size_t nd);

struct DatasetPair {
    LightField4D lf;
    Volume3D vol;
    nlohmann::json provenance;
};

struct DatasetBuildConfig {
    double threshold = 0.59;
    DeconvConfig deconv;
};

struct DatasetBuildResult {
    std::vector<DatasetPair> pairs;
    nlohmann::json manifest;
};

/// Aligns every tile against the reference and pairs accepted tiles with
/// the matching reference crop. Requires the deconvolution grid to match
/// the pixels-per-lenslet of the stack so template and crop share a
/// lateral grid. Rejections are recorded in the manifest; ordering follows
/// the input.
DatasetBuildResult build_dataset(const std::vector<LightField4D>& tiles,
                                 const Volume3D& reference,
                                 const PsfStack& psfs,
                                 const DatasetBuildConfig& cfg);

} // namespace lfm
