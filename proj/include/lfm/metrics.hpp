#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include "lfm/image.hpp"

namespace lfm {

/// 3x3 Fisher information matrix over source position (x_p, y_p, z_p).
/// Symmetric and positive semi-definite by construction (Gram matrix of
/// score vectors weighted by the kernel).
struct FisherMatrix {
    std::array<std::array<double, 3>, 3> m{};
    std::array<double, 3> h_step{};

    double at(int i, int j) const { return m[i][j]; }
    double trace() const { return m[0][0] + m[1][1] + m[2][2]; }
};

/// Eigenvalues of a symmetric 3x3 matrix, ascending (cyclic Jacobi sweeps).
std::array<double, 3> sym3_eigenvalues(const std::array<std::array<double, 3>, 3>& a);

/// Fisher information of a normalized kernel with respect to source
/// position. psf_at must return kernels of identical dims for all stencil
/// points; each kernel should sum to 1. Scores are central differences of
/// ln(kernel) with per-axis steps h_step (µm); pixels where any stencil
/// value falls below 1e-12 x the center kernel's max are excluded.
FisherMatrix fisher_information(
    const std::function<Image2D(const std::array<double, 3>&, double)>& psf_at,
    const std::array<double, 3>& p, double b,
    const std::array<double, 3>& h_step = {0.1, 0.1, 0.25});

struct Rect {
    std::size_t x0 = 0, y0 = 0;
    std::size_t w = 0, h = 0;
};

/// Michelson contrast (Imax - Imin) / (Imax + Imin) over a patch.
double contrast(const Image2D& img, const Rect& patch);
double contrast(const Image2D& img);

/// Pearson correlation coefficient; result clamped into [-1, 1].
double pearson(const std::vector<double>& a, const std::vector<double>& b);
double pearson(const Image2D& a, const Image2D& b);
double pearson(const Volume3D& a, const Volume3D& b);

/// Peak signal-to-noise ratio. MSE of exactly zero is reported as
/// `identical` rather than an infinite dB value.
struct PsnrResult {
    bool identical = false;
    double db = 0.0;
};
PsnrResult psnr(const std::vector<double>& x, const std::vector<double>& ref,
                double peak);
PsnrResult psnr(const Image2D& x, const Image2D& ref, double peak);
PsnrResult psnr(const Volume3D& x, const Volume3D& ref, double peak);

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Mean local SSIM over all fully valid window positions.
double ssim(const Image2D& x, const Image2D& ref, double peak,
            const SsimParams& params = {});
/// Volume SSIM: mean of per-slice SSIM values.
double ssim(const Volume3D& x, const Volume3D& ref, double peak,
            const SsimParams& params = {});

/// Full width at half maximum of a 1D profile, in the same unit as
/// sample_pitch. Requires exactly one contiguous region above half max,
/// fully interior so both crossings exist; crossings are located by linear
/// interpolation.
double fwhm(const std::vector<double>& profile, double sample_pitch);

} // namespace lfm
