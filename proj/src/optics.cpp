#include "lfm/optics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "lfm/container.hpp"
#include "lfm/errors.hpp"
#include "lfm/parallel.hpp"
#include "lfm/rng.hpp"

namespace lfm {

void OpticalConfig::validate() const {
    const double lengths[] = {M,  F_obj, F_tl, c, F_ml, lenslet_pitch_um,
                              sensor_pitch_um, b, lambda_um};
    for (double v : lengths)
        if (!(v > 0.0)) throw ConfigError("optics: all lengths must be > 0");
    if (!(NA > 0.0) || !(NA < 1.0))
        throw ConfigError("optics: NA must lie in (0, 1) for an air objective");
    if (std::fabs(M - F_tl / F_obj) > 1e-9 * M)
        throw ConfigError("optics: M must equal F_tl/F_obj");
}

void to_json(nlohmann::json& j, const OpticalConfig& cfg) {
    j = nlohmann::json{{"M", cfg.M},
                       {"NA", cfg.NA},
                       {"F_obj", cfg.F_obj},
                       {"F_tl", cfg.F_tl},
                       {"c", cfg.c},
                       {"F_ml", cfg.F_ml},
                       {"lenslet_pitch_um", cfg.lenslet_pitch_um},
                       {"sensor_pitch_um", cfg.sensor_pitch_um},
                       {"b", cfg.b},
                       {"lambda_um", cfg.lambda_um}};
}

void from_json(const nlohmann::json& j, OpticalConfig& cfg) {
    cfg.M = j.value("M", cfg.M);
    cfg.NA = j.value("NA", cfg.NA);
    cfg.F_obj = j.value("F_obj", cfg.F_obj);
    cfg.F_tl = j.value("F_tl", cfg.F_tl);
    cfg.c = j.value("c", j.contains("F_tl") ? cfg.F_tl : cfg.c);
    cfg.F_ml = j.value("F_ml", cfg.F_ml);
    cfg.lenslet_pitch_um = j.value("lenslet_pitch_um", cfg.lenslet_pitch_um);
    cfg.sensor_pitch_um = j.value("sensor_pitch_um", cfg.sensor_pitch_um);
    cfg.b = j.value("b", cfg.b);
    cfg.lambda_um = j.value("lambda_um", cfg.lambda_um);
}

IntermediateImage intermediate_image_position(double o1_um,
                                              const OpticalConfig& cfg) {
    IntermediateImage out;
    out.i2 = cfg.M * (cfg.F_obj * (1.0 + cfg.M) - cfg.M * o1_um);
    const double eps_pole = 1e-9 * cfg.F_obj;
    if (std::fabs(o1_um - cfg.F_obj) < eps_pole) {
        out.i1_at_infinity = true;
        out.i1 = std::numeric_limits<double>::infinity();
    } else {
        out.i1 = cfg.F_obj * o1_um / (o1_um - cfg.F_obj);
    }
    return out;
}

double blur_lenslet_count(double o1_um, double source_extent_um,
                          const OpticalConfig& cfg) {
    const IntermediateImage ii = intermediate_image_position(o1_um, cfg);
    if (!(ii.i2 > 0.0))
        throw NumericError("blur_lenslet_count: tube-lens image distance not positive");
    // As i1 -> infinity the bracket tends to 1 and the bundle radius at the
    // tube lens equals the back-aperture radius.
    const double tl_r =
        ii.i1_at_infinity
            ? cfg.obj_radius()
            : cfg.obj_radius() * (ii.i1 - (cfg.M + 1.0) * cfg.F_obj) / ii.i1;
    const double ml_b = std::fabs(tl_r) * std::fabs(cfg.c - ii.i2) / ii.i2;
    const double ml_tb = 2.0 * ml_b + cfg.M * source_extent_um;
    return ml_tb / cfg.lenslet_pitch_um;
}

std::size_t psf_support_lenslets(double depth_um, const OpticalConfig& cfg) {
    const double o1 = cfg.F_obj + depth_um;
    const double count =
        blur_lenslet_count(o1, cfg.lenslet_pitch_um / cfg.M, cfg);
    // Rays keep spreading after the lenslets: bound the extra lateral travel
    // by the image-side aperture angle plus the steepest lenslet deflection.
    const double post_um =
        cfg.b * (cfg.NA / cfg.M + cfg.lenslet_pitch_um / (2.0 * cfg.F_ml));
    const double half = 0.5 * count + post_um / cfg.lenslet_pitch_um;
    return static_cast<std::size_t>(std::ceil(half)) + 1;
}

namespace {

constexpr std::size_t kRayChunks = 64;

// Concentric square-to-disc map; preserves stratification.
std::pair<double, double> square_to_disc(double u, double v) {
    const double a = 2.0 * u - 1.0;
    const double b = 2.0 * v - 1.0;
    if (a == 0.0 && b == 0.0) return {0.0, 0.0};
    double r, phi;
    if (a * a > b * b) {
        r = a;
        phi = (std::numbers::pi / 4.0) * (b / a);
    } else {
        r = b;
        phi = std::numbers::pi / 2.0 - (std::numbers::pi / 4.0) * (a / b);
    }
    return {r * std::cos(phi), r * std::sin(phi)};
}

void truncate_and_normalize(Image2D& kernel) {
    const double total = sum(kernel.data);
    if (!(total > 0.0))
        throw NumericError("simulate_psf: no energy reached the kernel support");
    for (double& v : kernel.data) v /= total;
    const double thr = 1e-4 * min_max(kernel.data).max;
    for (double& v : kernel.data)
        if (v < thr) v = 0.0;
    const double total2 = sum(kernel.data);
    for (double& v : kernel.data) v /= total2;
}

Image2D trace_geometric(double depth_um, double offset_x_um, double offset_y_um,
                        const OpticalConfig& cfg, std::size_t target_ppl,
                        std::size_t rays, std::uint64_t seed,
                        std::size_t support_lenslets) {
    if (rays < 10000)
        throw ConfigError("simulate_psf: geometric mode needs at least 1e4 rays");

    const double o1 = cfg.F_obj + depth_um;
    const std::size_t r_lens = support_lenslets > 0
                                   ? support_lenslets
                                   : psf_support_lenslets(depth_um, cfg);
    const std::size_t a_ppl = target_ppl;
    const double px = cfg.lenslet_pitch_um / static_cast<double>(a_ppl);
    const std::size_t kw = (2 * r_lens + 1) * a_ppl;
    const std::size_t center = (kw - 1) / 2;
    const double obj_r2 =
        cfg.obj_radius() * cfg.obj_radius() * (1.0 + 1e-9);

    // Per-chunk histograms hold integer ray counts, so the reduction below
    // is exact in any order and the result is thread-count independent.
    std::vector<Image2D> hist(kRayChunks, Image2D(kw, kw));
    const std::size_t base = rays / kRayChunks;
    const std::size_t rem = rays % kRayChunks;

    parallel_chunks(kRayChunks, [&](std::size_t chunk) {
        Rng rng(derive_seed(seed, chunk));
        Image2D& h = hist[chunk];
        const std::size_t n = base + (chunk < rem ? 1 : 0);
        const std::size_t g = static_cast<std::size_t>(
            std::floor(std::sqrt(static_cast<double>(n))));
        for (std::size_t r = 0; r < n; ++r) {
            double u, v;
            if (g > 0 && r < g * g) {
                u = (static_cast<double>(r / g) + rng.uniform()) /
                    static_cast<double>(g);
                v = (static_cast<double>(r % g) + rng.uniform()) /
                    static_cast<double>(g);
            } else {
                u = rng.uniform();
                v = rng.uniform();
            }
            const auto [du, dv] = square_to_disc(u, v);
            double tx = cfg.NA * du;
            double ty = cfg.NA * dv;
            double x = offset_x_um + o1 * tx;
            double y = offset_y_um + o1 * ty;
            tx -= x / cfg.F_obj;
            ty -= y / cfg.F_obj;
            x += cfg.F_obj * tx;
            y += cfg.F_obj * ty;
            if (x * x + y * y > obj_r2) continue; // telecentric stop
            x += cfg.F_tl * tx;
            y += cfg.F_tl * ty;
            tx -= x / cfg.F_tl;
            ty -= y / cfg.F_tl;
            x += cfg.c * tx;
            y += cfg.c * ty;
            const double lx =
                static_cast<double>(std::llround(x / cfg.lenslet_pitch_um));
            const double ly =
                static_cast<double>(std::llround(y / cfg.lenslet_pitch_um));
            tx -= (x - lx * cfg.lenslet_pitch_um) / cfg.F_ml;
            ty -= (y - ly * cfg.lenslet_pitch_um) / cfg.F_ml;
            x += cfg.b * tx;
            y += cfg.b * ty;
            const double jx =
                std::floor(x / px + 0.5) + static_cast<double>(center);
            const double jy =
                std::floor(y / px + 0.5) + static_cast<double>(center);
            if (jx < 0.0 || jy < 0.0 || jx >= static_cast<double>(kw) ||
                jy >= static_cast<double>(kw))
                continue;
            h.at(static_cast<std::size_t>(jx), static_cast<std::size_t>(jy)) +=
                1.0;
        }
    });

    Image2D kernel(kw, kw);
    for (const Image2D& h : hist)
        for (std::size_t i = 0; i < kernel.data.size(); ++i)
            kernel.data[i] += h.data[i];
    truncate_and_normalize(kernel);
    return kernel;
}

std::mutex g_fftw_mutex;

void fft2_inplace(std::vector<std::complex<double>>& field, std::size_t n,
                  int sign) {
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    fftw_plan plan = fftw_plan_dft_2d(
        static_cast<int>(n), static_cast<int>(n),
        reinterpret_cast<fftw_complex*>(field.data()),
        reinterpret_cast<fftw_complex*>(field.data()), sign, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
}

Image2D wave_psf(double depth_um, double offset_x_um, double offset_y_um,
                 const OpticalConfig& cfg, std::size_t target_ppl,
                 std::size_t grid, std::size_t support_lenslets) {
    if (grid < 2 || (grid & (grid - 1)) != 0)
        throw ConfigError("simulate_psf: wave-mode grid must be a power of two");
    (void)support_lenslets;

    const std::size_t n = grid;
    const double px = cfg.lenslet_pitch_um / static_cast<double>(target_ppl);
    const double o1 = cfg.F_obj + depth_um;
    const IntermediateImage ii = intermediate_image_position(o1, cfg);
    const double d = cfg.c - ii.i2; // signed distance MLA -> image point
    const double x0 = -cfg.M * offset_x_um;
    const double y0 = -cfg.M * offset_y_um;
    const double r_fp = std::fabs(d) * cfg.NA / cfg.M;
    const double pi = std::numbers::pi;

    std::vector<std::complex<double>> field(n * n);
    const double half = static_cast<double>(n) / 2.0;
    if (r_fp < px) {
        // Image point effectively on the MLA plane: a single-sample source.
        const long ix = std::lround(x0 / px + half);
        const long iy = std::lround(y0 / px + half);
        if (ix < 0 || iy < 0 || ix >= static_cast<long>(n) ||
            iy >= static_cast<long>(n))
            throw NumericError("simulate_psf: wave source outside the grid");
        field[static_cast<std::size_t>(ix) * n + static_cast<std::size_t>(iy)] =
            1.0;
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double x = (static_cast<double>(i) - half) * px;
            for (std::size_t j = 0; j < n; ++j) {
                const double y = (static_cast<double>(j) - half) * px;
                const double rx = x - x0, ry = y - y0;
                if (rx * rx + ry * ry > (r_fp + px) * (r_fp + px)) continue;
                const double phase = pi * (rx * rx + ry * ry) / (cfg.lambda_um * d);
                field[i * n + j] = std::polar(1.0, phase);
            }
        }
    }

    // Tiled lenslet quadratic phases.
    for (std::size_t i = 0; i < n; ++i) {
        const double x = (static_cast<double>(i) - half) * px;
        const double lx = std::round(x / cfg.lenslet_pitch_um);
        const double xi = x - lx * cfg.lenslet_pitch_um;
        for (std::size_t j = 0; j < n; ++j) {
            const double y = (static_cast<double>(j) - half) * px;
            const double ly = std::round(y / cfg.lenslet_pitch_um);
            const double eta = y - ly * cfg.lenslet_pitch_um;
            const double phase =
                -pi * (xi * xi + eta * eta) / (cfg.lambda_um * cfg.F_ml);
            field[i * n + j] *= std::polar(1.0, phase);
        }
    }

    // Paraxial angular-spectrum transfer over distance b.
    fft2_inplace(field, n, FFTW_FORWARD);
    const double df = 1.0 / (static_cast<double>(n) * px);
    for (std::size_t i = 0; i < n; ++i) {
        const double fi =
            (i < n / 2 ? static_cast<double>(i)
                       : static_cast<double>(i) - static_cast<double>(n)) *
            df;
        for (std::size_t j = 0; j < n; ++j) {
            const double fj =
                (j < n / 2 ? static_cast<double>(j)
                           : static_cast<double>(j) - static_cast<double>(n)) *
                df;
            const double phase =
                -pi * cfg.lambda_um * cfg.b * (fi * fi + fj * fj);
            field[i * n + j] *= std::polar(1.0, phase);
        }
    }
    fft2_inplace(field, n, FFTW_BACKWARD);

    // Crop one row/column so the kernel has odd dims centered on the axis.
    Image2D kernel(n - 1, n - 1);
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t j = 1; j < n; ++j)
            kernel.at(i - 1, j - 1) = std::norm(field[i * n + j]);
    truncate_and_normalize(kernel);
    return kernel;
}

} // namespace

Image2D simulate_psf(double depth_um, double offset_x_um, double offset_y_um,
                     const OpticalConfig& cfg, std::size_t target_ppl,
                     PsfMode mode, std::size_t rays_or_grid, std::uint64_t seed,
                     std::size_t support_lenslets) {
    cfg.validate();
    if (target_ppl < 3 || target_ppl % 2 == 0)
        throw ConfigError("simulate_psf: target pixels-per-lenslet must be odd and >= 3");
    if (mode == PsfMode::geometric)
        return trace_geometric(depth_um, offset_x_um, offset_y_um, cfg,
                               target_ppl, rays_or_grid, seed, support_lenslets);
    return wave_psf(depth_um, offset_x_um, offset_y_um, cfg, target_ppl,
                    rays_or_grid, support_lenslets);
}

PsfStack build_psf_stack(const OpticalConfig& cfg,
                         const std::vector<double>& depths_um,
                         std::size_t target_ppl, std::size_t ns, PsfMode mode,
                         std::size_t rays, std::uint64_t seed) {
    if (depths_um.empty())
        throw ConfigError("build_psf_stack: empty depth list");
    if (ns == 0 || ns % 2 == 0)
        throw ConfigError("build_psf_stack: offset classes per axis must be odd");

    std::size_t support = 0;
    for (double depth : depths_um)
        support = std::max(support, psf_support_lenslets(depth, cfg));

    PsfStack stack;
    stack.a = target_ppl;
    stack.ns = ns;
    stack.depths_um = depths_um;
    stack.kernels.resize(depths_um.size() * ns * ns);

    const double class_step = cfg.lenslet_pitch_um / (cfg.M * static_cast<double>(ns));
    const double class0 = -0.5 * cfg.lenslet_pitch_um / cfg.M + 0.5 * class_step;
    for (std::size_t d = 0; d < depths_um.size(); ++d)
        for (std::size_t ox = 0; ox < ns; ++ox)
            for (std::size_t oy = 0; oy < ns; ++oy) {
                const double off_x = class0 + class_step * static_cast<double>(ox);
                const double off_y = class0 + class_step * static_cast<double>(oy);
                const std::uint64_t kseed =
                    derive_seed(seed, (d * ns + ox) * ns + oy);
                stack.kernel(d, ox, oy) =
                    simulate_psf(depths_um[d], off_x, off_y, cfg, target_ppl,
                                 mode, rays, kseed, support);
            }

    stack.meta["support_lenslets"] = support;
    nlohmann::json optics_json;
    to_json(optics_json, cfg);
    stack.meta["optics"] = optics_json;
    stack.meta["mode"] = mode == PsfMode::geometric ? "geometric" : "wave";
    stack.meta["rays"] = rays;
    stack.meta["seed"] = seed;
    return stack;
}

void write_psf_stack(const PsfStack& stack, const std::string& path) {
    if (stack.kernels.empty())
        throw DimensionError("write_psf_stack: empty stack");
    const std::size_t kw = stack.kernels.front().width;
    const std::size_t kh = stack.kernels.front().height;
    for (const Image2D& k : stack.kernels)
        if (k.width != kw || k.height != kh)
            throw DimensionError("write_psf_stack: kernels differ in dims");

    ContainerBlob blob;
    blob.kind = "psf";
    blob.dims = {stack.depths_um.size(), stack.ns, stack.ns, kw, kh};
    blob.axis_order = {"depth", "class_x", "class_y", "k_x", "k_y"};
    blob.meta = stack.meta;
    blob.meta["depths_um"] = stack.depths_um;
    blob.meta["pixels_per_lenslet"] = stack.a;
    blob.meta["offset_classes"] = stack.ns;
    blob.payload.reserve(stack.kernels.size() * kw * kh);
    for (const Image2D& k : stack.kernels)
        for (double v : k.data) blob.payload.push_back(static_cast<float>(v));
    write_blob(blob, path);
}

PsfStack read_psf_stack(const std::string& path) {
    ContainerBlob blob = read_blob(path);
    if (blob.kind != "psf")
        throw IoError("expected psf container: " + path);
    if (blob.dims.size() != 5)
        throw IoError("psf container must have 5 dims: " + path);
    PsfStack stack;
    try {
        stack.depths_um = blob.meta.at("depths_um").get<std::vector<double>>();
        stack.a = blob.meta.at("pixels_per_lenslet").get<std::size_t>();
        stack.ns = blob.meta.at("offset_classes").get<std::size_t>();
    } catch (const nlohmann::json::exception&) {
        throw IoError("psf container header missing depth/offset fields: " + path);
    }
    const std::size_t nd = blob.dims[0], ns = blob.dims[1];
    const std::size_t kw = blob.dims[3], kh = blob.dims[4];
    if (nd != stack.depths_um.size() || ns != stack.ns || blob.dims[2] != ns)
        throw IoError("psf container dims disagree with header meta: " + path);
    stack.meta = blob.meta;
    stack.kernels.assign(nd * ns * ns, Image2D(kw, kh));
    std::size_t idx = 0;
    for (Image2D& k : stack.kernels)
        for (double& v : k.data) v = static_cast<double>(blob.payload[idx++]);
    return stack;
}

} // namespace lfm
