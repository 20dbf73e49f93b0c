#include "lfm/projector.hpp"

#include <algorithm>

#include "lfm/errors.hpp"
#include "lfm/lfcore.hpp"
#include "lfm/parallel.hpp"

namespace lfm {

namespace {

struct ProjectGeom {
    std::size_t a;       // pixels per lenslet
    std::size_t vpl;     // voxels per lenslet
    std::size_t sx, sy;  // lenslet grid
    std::size_t w, h;    // sensor spatial dims
    std::size_t kw, kh;  // kernel dims
    long ck_x, ck_y;     // kernel center pixel
};

ProjectGeom check_geom(std::size_t vx, std::size_t vy, std::size_t nd,
                       const PsfStack& psfs, ProjectionMode mode,
                       std::size_t vpl) {
    if (psfs.depths_um.size() != nd)
        throw DimensionError("project: PSF depths do not match volume depths");
    if (psfs.kernels.empty())
        throw DimensionError("project: empty PSF stack");
    if (vpl == 0 || vx % vpl != 0 || vy % vpl != 0)
        throw DimensionError("project: lateral dims not divisible by voxels per lenslet");
    if (mode == ProjectionMode::periodic && vpl % psfs.ns != 0)
        throw ConfigError("project: voxels per lenslet must be a multiple of the offset classes");

    ProjectGeom g;
    g.a = psfs.a;
    g.vpl = vpl;
    g.sx = vx / vpl;
    g.sy = vy / vpl;
    g.w = g.sx * g.a;
    g.h = g.sy * g.a;
    g.kw = psfs.kernels.front().width;
    g.kh = psfs.kernels.front().height;
    if (g.kw > g.w || g.kh > g.h)
        throw DimensionError("project: kernel larger than sensor");
    g.ck_x = static_cast<long>((g.kw - 1) / 2);
    g.ck_y = static_cast<long>((g.kh - 1) / 2);
    return g;
}

// Kernel class indices for a voxel's sub-lenslet phase.
inline std::size_t class_of(std::size_t phase, std::size_t vpl, std::size_t ns) {
    return phase * ns / vpl;
}

} // namespace

LightField4D forward_project(const Volume3D& vol, const PsfStack& psfs,
                             ProjectionMode mode,
                             std::size_t voxels_per_lenslet) {
    const ProjectGeom g =
        check_geom(vol.vx, vol.vy, vol.depth, psfs, mode, voxels_per_lenslet);
    const std::size_t cc = psfs.center_class();

    // Depths render into private scratch planes; the reduction below runs
    // in ascending depth order so parallel and serial agree bit for bit.
    std::vector<Image2D> scratch(vol.depth, Image2D(g.w, g.h));
    parallel_for(0, vol.depth, [&](std::size_t z) {
        Image2D& out = scratch[z];
        for (std::size_t x = 0; x < vol.vx; ++x) {
            const std::size_t lx = x / g.vpl;
            const std::size_t cx = mode == ProjectionMode::periodic
                                       ? class_of(x % g.vpl, g.vpl, psfs.ns)
                                       : cc;
            const long bx = static_cast<long>(lx * g.a + (g.a - 1) / 2) - g.ck_x;
            const std::size_t kx_lo =
                static_cast<std::size_t>(std::max<long>(0, -bx));
            const std::size_t kx_hi = static_cast<std::size_t>(std::min<long>(
                static_cast<long>(g.kw), static_cast<long>(g.w) - bx));
            for (std::size_t y = 0; y < vol.vy; ++y) {
                const double val = vol.at(z, x, y);
                if (val == 0.0) continue;
                const std::size_t ly = y / g.vpl;
                const std::size_t cy = mode == ProjectionMode::periodic
                                           ? class_of(y % g.vpl, g.vpl, psfs.ns)
                                           : cc;
                const Image2D& k = psfs.kernel(z, cx, cy);
                const long by =
                    static_cast<long>(ly * g.a + (g.a - 1) / 2) - g.ck_y;
                const std::size_t ky_lo =
                    static_cast<std::size_t>(std::max<long>(0, -by));
                const std::size_t ky_hi = static_cast<std::size_t>(std::min<long>(
                    static_cast<long>(g.kh), static_cast<long>(g.h) - by));
                for (std::size_t kx = kx_lo; kx < kx_hi; ++kx) {
                    const std::size_t px = static_cast<std::size_t>(bx + static_cast<long>(kx));
                    for (std::size_t ky = ky_lo; ky < ky_hi; ++ky) {
                        const std::size_t py =
                            static_cast<std::size_t>(by + static_cast<long>(ky));
                        out.at(px, py) += val * k.at(kx, ky);
                    }
                }
            }
        }
    });

    Image2D total(g.w, g.h);
    for (std::size_t z = 0; z < vol.depth; ++z)
        for (std::size_t i = 0; i < total.data.size(); ++i)
            total.data[i] += scratch[z].data[i];

    LightField4D lf = spatial_to_lf(total, g.a, g.a);
    lf.meta["pixels_per_lenslet"] = g.a;
    return lf;
}

Volume3D adjoint_project(const LightField4D& lf, const PsfStack& psfs,
                         ProjectionMode mode, std::size_t voxels_per_lenslet) {
    if (lf.ax != psfs.a || lf.ay != psfs.a)
        throw DimensionError("project: light field angular dims do not match PSF stack");
    const std::size_t nd = psfs.depths_um.size();
    const std::size_t vx = lf.sx * voxels_per_lenslet;
    const std::size_t vy = lf.sy * voxels_per_lenslet;
    const ProjectGeom g = check_geom(vx, vy, nd, psfs, mode, voxels_per_lenslet);
    const std::size_t cc = psfs.center_class();

    const Image2D sensor = lf_to_spatial(lf);
    Volume3D vol(nd, vx, vy);
    parallel_for(0, nd, [&](std::size_t z) {
        for (std::size_t x = 0; x < vx; ++x) {
            const std::size_t lx = x / g.vpl;
            const std::size_t cx = mode == ProjectionMode::periodic
                                       ? class_of(x % g.vpl, g.vpl, psfs.ns)
                                       : cc;
            const long bx = static_cast<long>(lx * g.a + (g.a - 1) / 2) - g.ck_x;
            const std::size_t kx_lo =
                static_cast<std::size_t>(std::max<long>(0, -bx));
            const std::size_t kx_hi = static_cast<std::size_t>(std::min<long>(
                static_cast<long>(g.kw), static_cast<long>(g.w) - bx));
            for (std::size_t y = 0; y < vy; ++y) {
                const std::size_t ly = y / g.vpl;
                const std::size_t cy = mode == ProjectionMode::periodic
                                           ? class_of(y % g.vpl, g.vpl, psfs.ns)
                                           : cc;
                const Image2D& k = psfs.kernel(z, cx, cy);
                const long by =
                    static_cast<long>(ly * g.a + (g.a - 1) / 2) - g.ck_y;
                const std::size_t ky_lo =
                    static_cast<std::size_t>(std::max<long>(0, -by));
                const std::size_t ky_hi = static_cast<std::size_t>(std::min<long>(
                    static_cast<long>(g.kh), static_cast<long>(g.h) - by));
                double acc = 0.0;
                for (std::size_t kx = kx_lo; kx < kx_hi; ++kx) {
                    const std::size_t px =
                        static_cast<std::size_t>(bx + static_cast<long>(kx));
                    for (std::size_t ky = ky_lo; ky < ky_hi; ++ky) {
                        const std::size_t py =
                            static_cast<std::size_t>(by + static_cast<long>(ky));
                        acc += k.at(kx, ky) * sensor.at(px, py);
                    }
                }
                vol.at(z, x, y) = acc;
            }
        }
    });
    return vol;
}

} // namespace lfm
