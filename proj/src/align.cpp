#include "lfm/align.hpp"

#include <algorithm>
#include <cmath>

#include "lfm/lfcore.hpp"

namespace lfm {

Image2D ncc_map(const Image2D& tmpl, const Image2D& reference) {
    if (tmpl.width > reference.width || tmpl.height > reference.height)
        throw DimensionError("ncc_map: template exceeds reference dims");
    if (tmpl.size() == 0) throw DimensionError("ncc_map: empty template");

    const std::size_t tw = tmpl.width, th = tmpl.height;
    const double n = static_cast<double>(tw * th);
    const double tmean = mean(tmpl.data);
    Image2D tc(tw, th);
    double tvar = 0.0;
    for (std::size_t i = 0; i < tmpl.data.size(); ++i) {
        tc.data[i] = tmpl.data[i] - tmean;
        tvar += tc.data[i] * tc.data[i];
    }
    if (tvar == 0.0) throw NumericError("ncc_map: zero-variance template");

    Image2D map(reference.width - tw + 1, reference.height - th + 1);
    for (std::size_t ox = 0; ox < map.width; ++ox)
        for (std::size_t oy = 0; oy < map.height; ++oy) {
            double wsum = 0.0;
            for (std::size_t i = 0; i < tw; ++i)
                for (std::size_t j = 0; j < th; ++j)
                    wsum += reference.at(ox + i, oy + j);
            const double wmean = wsum / n;
            double cross = 0.0, wvar = 0.0;
            for (std::size_t i = 0; i < tw; ++i)
                for (std::size_t j = 0; j < th; ++j) {
                    const double dw = reference.at(ox + i, oy + j) - wmean;
                    cross += tc.at(i, j) * dw;
                    wvar += dw * dw;
                }
            map.at(ox, oy) = wvar == 0.0
                                 ? 0.0
                                 : std::clamp(cross / std::sqrt(tvar * wvar),
                                              -1.0, 1.0);
        }
    return map;
}

AlignmentResult align_tile(const LightField4D& lf, const PsfStack& psfs,
                           const Volume3D& reference_vol, double threshold,
                           const DeconvConfig& deconv_cfg) {
    const Volume3D recon = richardson_lucy(lf, psfs, deconv_cfg);
    const Image2D tmpl = z_project_mean(recon);
    const Image2D ref = z_project_mean(reference_vol);
    const Image2D map = ncc_map(tmpl, ref);

    AlignmentResult res;
    res.threshold = threshold;
    // Scan order makes ties resolve to the smallest (dx, dy).
    for (std::size_t ox = 0; ox < map.width; ++ox)
        for (std::size_t oy = 0; oy < map.height; ++oy)
            if (map.at(ox, oy) > res.peak_corr) {
                res.peak_corr = map.at(ox, oy);
                res.dx = static_cast<long>(ox);
                res.dy = static_cast<long>(oy);
            }
    res.accepted = res.peak_corr > threshold;
    return res;
}

double compensate_depth(double step_um, double ratio_num, double ratio_den,
                        std::size_t nd) {
    if (!(step_um > 0.0) || !(ratio_num > 0.0) || !(ratio_den > 0.0) || nd == 0)
        throw ConfigError("compensate_depth: all inputs must be positive");
    const double effective_step = step_um * ratio_num / ratio_den;
    return static_cast<double>(nd) * effective_step;
}

DatasetBuildResult build_dataset(const std::vector<LightField4D>& tiles,
                                 const Volume3D& reference,
                                 const PsfStack& psfs,
                                 const DatasetBuildConfig& cfg) {
    if (cfg.deconv.voxels_per_lenslet != psfs.a)
        throw ConfigError(
            "build_dataset: deconvolution voxels per lenslet must equal the "
            "stack's pixels per lenslet so template and crop share a grid");

    DatasetBuildResult out;
    out.manifest["threshold"] = cfg.threshold;
    out.manifest["tiles"] = nlohmann::json::array();
    std::size_t accepted = 0;

    for (std::size_t i = 0; i < tiles.size(); ++i) {
        const LightField4D& tile = tiles[i];
        const AlignmentResult res =
            align_tile(tile, psfs, reference, cfg.threshold, cfg.deconv);

        nlohmann::json row;
        row["id"] = i;
        row["shift"] = {res.dx, res.dy};
        row["peak_corr"] = res.peak_corr;
        row["accepted"] = res.accepted;
        out.manifest["tiles"].push_back(row);
        if (!res.accepted) continue;
        ++accepted;

        const std::size_t tx = tile.sx * psfs.a;
        const std::size_t ty = tile.sy * psfs.a;
        Volume3D crop(reference.depth, tx, ty);
        for (std::size_t z = 0; z < reference.depth; ++z)
            for (std::size_t x = 0; x < tx; ++x)
                for (std::size_t y = 0; y < ty; ++y)
                    crop.at(z, x, y) =
                        reference.at(z, static_cast<std::size_t>(res.dx) + x,
                                     static_cast<std::size_t>(res.dy) + y);
        crop.meta = reference.meta;

        DatasetPair pair;
        pair.lf = tile;
        pair.vol = std::move(crop);
        pair.provenance["tile"] = i;
        pair.provenance["shift"] = {res.dx, res.dy};
        pair.provenance["peak_corr"] = res.peak_corr;
        out.pairs.push_back(std::move(pair));
    }
    out.manifest["accepted_count"] = accepted;
    out.manifest["rejected_count"] = tiles.size() - accepted;
    return out;
}

} // namespace lfm
