#include "lfm/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "lfm/errors.hpp"

namespace lfm {

std::array<double, 3> sym3_eigenvalues(const std::array<std::array<double, 3>, 3>& a) {
    std::array<std::array<double, 3>, 3> m = a;
    for (int sweep = 0; sweep < 50; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j) off += m[i][j] * m[i][j];
        if (off < 1e-30) break;
        for (int p = 0; p < 3; ++p)
            for (int q = p + 1; q < 3; ++q) {
                if (std::fabs(m[p][q]) < 1e-300) continue;
                const double theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < 3; ++k) {
                    const double mkp = m[k][p], mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double mpk = m[p][k], mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
    }
    std::array<double, 3> ev = {m[0][0], m[1][1], m[2][2]};
    std::sort(ev.begin(), ev.end());
    return ev;
}

FisherMatrix fisher_information(
    const std::function<Image2D(const std::array<double, 3>&, double)>& psf_at,
    const std::array<double, 3>& p, double b,
    const std::array<double, 3>& h_step) {
    for (double h : h_step)
        if (!(h > 0.0)) throw ConfigError("fisher_information: step must be > 0");

    const Image2D center = psf_at(p, b);
    std::array<Image2D, 3> plus, minus;
    for (int i = 0; i < 3; ++i) {
        std::array<double, 3> pp = p, pm = p;
        pp[i] += h_step[i];
        pm[i] -= h_step[i];
        plus[i] = psf_at(pp, b);
        minus[i] = psf_at(pm, b);
        if (!plus[i].same_shape(center) || !minus[i].same_shape(center))
            throw DimensionError("fisher_information: stencil kernels differ in dims");
    }

    const double csum = sum(center.data);
    if (std::fabs(csum - 1.0) > 1e-3)
        throw NumericError("fisher_information: center kernel not normalized");

    const double eps = 1e-12 * min_max(center.data).max;
    if (!(eps > 0.0))
        throw NumericError("fisher_information: degenerate kernel");

    FisherMatrix fm;
    fm.h_step = h_step;
    std::size_t used = 0;
    for (std::size_t idx = 0; idx < center.data.size(); ++idx) {
        const double hc = center.data[idx];
        if (hc < eps) continue;
        std::array<double, 3> score;
        bool valid = true;
        for (int i = 0; i < 3; ++i) {
            const double hp = plus[i].data[idx];
            const double hm = minus[i].data[idx];
            if (hp < eps || hm < eps) {
                valid = false;
                break;
            }
            score[i] = (std::log(hp) - std::log(hm)) / (2.0 * h_step[i]);
        }
        if (!valid) continue;
        ++used;
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) fm.m[i][j] += score[i] * score[j] * hc;
    }
    if (used == 0)
        throw NumericError("fisher_information: all pixels below threshold");
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < i; ++j) fm.m[i][j] = fm.m[j][i];
    return fm;
}

double contrast(const Image2D& img, const Rect& patch) {
    if (patch.w == 0 || patch.h == 0)
        throw DimensionError("contrast: empty patch");
    if (patch.x0 + patch.w > img.width || patch.y0 + patch.h > img.height)
        throw DimensionError("contrast: patch exceeds image bounds");
    double lo = img.at(patch.x0, patch.y0);
    double hi = lo;
    for (std::size_t x = patch.x0; x < patch.x0 + patch.w; ++x)
        for (std::size_t y = patch.y0; y < patch.y0 + patch.h; ++y) {
            const double v = img.at(x, y);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    const double denom = hi + lo;
    if (denom == 0.0) throw NumericError("contrast: Imax + Imin is zero");
    return (hi - lo) / denom;
}

double contrast(const Image2D& img) {
    return contrast(img, Rect{0, 0, img.width, img.height});
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty())
        throw DimensionError("pearson: size mismatch or empty input");
    const double ma = mean(a);
    const double mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0)
        throw NumericError("pearson: zero-variance input");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double pearson(const Image2D& a, const Image2D& b) {
    if (!a.same_shape(b)) throw DimensionError("pearson: image dims differ");
    return pearson(a.data, b.data);
}

double pearson(const Volume3D& a, const Volume3D& b) {
    if (!a.same_shape(b)) throw DimensionError("pearson: volume dims differ");
    return pearson(a.data, b.data);
}

PsnrResult psnr(const std::vector<double>& x, const std::vector<double>& ref,
                double peak) {
    if (x.size() != ref.size() || x.empty())
        throw DimensionError("psnr: size mismatch or empty input");
    if (!(peak > 0.0)) throw ConfigError("psnr: peak must be > 0");
    double mse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - ref[i];
        mse += d * d;
    }
    mse /= static_cast<double>(x.size());
    if (mse == 0.0) return {true, 0.0};
    return {false, 10.0 * std::log10(peak * peak / mse)};
}

PsnrResult psnr(const Image2D& x, const Image2D& ref, double peak) {
    if (!x.same_shape(ref)) throw DimensionError("psnr: image dims differ");
    return psnr(x.data, ref.data, peak);
}

PsnrResult psnr(const Volume3D& x, const Volume3D& ref, double peak) {
    if (!x.same_shape(ref)) throw DimensionError("psnr: volume dims differ");
    return psnr(x.data, ref.data, peak);
}

namespace {

std::vector<double> gaussian_window(int n, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(n) * n);
    const double c = (n - 1) / 2.0;
    double total = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double dx = i - c, dy = j - c;
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            w[static_cast<std::size_t>(i) * n + j] = v;
            total += v;
        }
    for (double& v : w) v /= total;
    return w;
}

} // namespace

double ssim(const Image2D& x, const Image2D& ref, double peak,
            const SsimParams& params) {
    if (!x.same_shape(ref)) throw DimensionError("ssim: image dims differ");
    if (params.window < 1 || params.window % 2 == 0)
        throw ConfigError("ssim: window must be a positive odd size");
    const std::size_t n = static_cast<std::size_t>(params.window);
    if (n > x.width || n > x.height)
        throw DimensionError("ssim: window larger than image");
    if (!(peak > 0.0)) throw ConfigError("ssim: peak must be > 0");

    const std::vector<double> w = gaussian_window(params.window, params.sigma);
    const double c1 = (params.k1 * peak) * (params.k1 * peak);
    const double c2 = (params.k2 * peak) * (params.k2 * peak);

    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t ox = 0; ox + n <= x.width; ++ox)
        for (std::size_t oy = 0; oy + n <= x.height; ++oy) {
            double mx = 0.0, my = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double wij = w[i * n + j];
                    mx += wij * x.at(ox + i, oy + j);
                    my += wij * ref.at(ox + i, oy + j);
                }
            double vx = 0.0, vy = 0.0, cxy = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double wij = w[i * n + j];
                    const double dx = x.at(ox + i, oy + j) - mx;
                    const double dy = ref.at(ox + i, oy + j) - my;
                    vx += wij * dx * dx;
                    vy += wij * dy * dy;
                    cxy += wij * dx * dy;
                }
            const double num = (2.0 * mx * my + c1) * (2.0 * cxy + c2);
            const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
            acc += num / den;
            ++count;
        }
    return acc / static_cast<double>(count);
}

double ssim(const Volume3D& x, const Volume3D& ref, double peak,
            const SsimParams& params) {
    if (!x.same_shape(ref)) throw DimensionError("ssim: volume dims differ");
    double acc = 0.0;
    for (std::size_t z = 0; z < x.depth; ++z)
        acc += ssim(x.slice(z), ref.slice(z), peak, params);
    return acc / static_cast<double>(x.depth);
}

double fwhm(const std::vector<double>& profile, double sample_pitch) {
    if (profile.size() < 3) throw DimensionError("fwhm: profile too short");
    if (!(sample_pitch > 0.0)) throw ConfigError("fwhm: pitch must be > 0");

    const double peak = *std::max_element(profile.begin(), profile.end());
    if (!(peak > 0.0)) throw NumericError("fwhm: profile has no positive peak");
    const double half = peak / 2.0;

    // Contiguous runs strictly above half max.
    std::vector<std::pair<std::size_t, std::size_t>> runs; // [first, last]
    bool in_run = false;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        if (profile[i] > half) {
            if (!in_run) {
                runs.emplace_back(i, i);
                in_run = true;
            } else {
                runs.back().second = i;
            }
        } else {
            in_run = false;
        }
    }
    if (runs.empty()) throw NumericError("fwhm: no region above half max");
    if (runs.size() > 1)
        throw NumericError("fwhm: multiple regions above half max");

    const auto [first, last] = runs.front();
    if (first == 0 || last + 1 == profile.size())
        throw NumericError("fwhm: half-max crossing outside profile");

    const double l0 = profile[first - 1], l1 = profile[first];
    const double left = static_cast<double>(first - 1) + (half - l0) / (l1 - l0);
    const double r0 = profile[last], r1 = profile[last + 1];
    const double right = static_cast<double>(last) + (r0 - half) / (r0 - r1);
    return (right - left) * sample_pitch;
}

} // namespace lfm
