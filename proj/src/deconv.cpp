#include "lfm/deconv.hpp"

#include <algorithm>

#include "lfm/errors.hpp"

namespace lfm {

namespace {

// Box average over the 3x3 lateral neighborhood, shrinking at borders.
Volume3D box3_lateral(const Volume3D& v) {
    Volume3D out(v.depth, v.vx, v.vy);
    for (std::size_t z = 0; z < v.depth; ++z)
        for (std::size_t x = 0; x < v.vx; ++x)
            for (std::size_t y = 0; y < v.vy; ++y) {
                double acc = 0.0;
                int n = 0;
                for (int dx = -1; dx <= 1; ++dx)
                    for (int dy = -1; dy <= 1; ++dy) {
                        const long xx = static_cast<long>(x) + dx;
                        const long yy = static_cast<long>(y) + dy;
                        if (xx < 0 || yy < 0 || xx >= static_cast<long>(v.vx) ||
                            yy >= static_cast<long>(v.vy))
                            continue;
                        acc += v.at(z, static_cast<std::size_t>(xx),
                                    static_cast<std::size_t>(yy));
                        ++n;
                    }
                out.at(z, x, y) = acc / n;
            }
    return out;
}

} // namespace

Volume3D richardson_lucy(const LightField4D& lf, const PsfStack& psfs,
                         const DeconvConfig& cfg) {
    if (cfg.iterations < 1)
        throw ConfigError("richardson_lucy: iterations must be >= 1");
    if (!(cfg.epsilon_scale > 0.0))
        throw ConfigError("richardson_lucy: epsilon must be > 0");
    const double input_max = min_max(lf.data).max;
    if (!(input_max > 0.0))
        throw NumericError("richardson_lucy: all-zero input");
    const double eps = cfg.epsilon_scale * input_max;

    const std::size_t nd = psfs.depths_um.size();
    const std::size_t vpl = cfg.voxels_per_lenslet;
    Volume3D v(nd, lf.sx * vpl, lf.sy * vpl,
               mean(lf.data) / static_cast<double>(nd));

    // Normalizer Adj(1) is iteration-independent.
    LightField4D ones(lf.ax, lf.ay, lf.sx, lf.sy, 1.0);
    const Volume3D norm = adjoint_project(ones, psfs, cfg.mode, vpl);

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        LightField4D est = forward_project(v, psfs, cfg.mode, vpl);
        for (std::size_t i = 0; i < est.data.size(); ++i)
            est.data[i] = lf.data[i] / std::max(est.data[i], eps);
        const Volume3D corr = adjoint_project(est, psfs, cfg.mode, vpl);
        for (std::size_t i = 0; i < v.data.size(); ++i)
            v.data[i] *= corr.data[i] / std::max(norm.data[i], eps);
        if (cfg.smooth3) v = box3_lateral(v);
    }
    return v;
}

} // namespace lfm
