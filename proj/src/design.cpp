#include "lfm/design.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "lfm/container.hpp"
#include "lfm/deconv.hpp"
#include "lfm/errors.hpp"
#include "lfm/lfcore.hpp"
#include "lfm/phantom.hpp"
#include "lfm/projector.hpp"
#include "lfm/rng.hpp"

namespace lfm {

Lf2Locus lf2_locus(double depth_um, const OpticalConfig& cfg) {
    const IntermediateImage ii =
        intermediate_image_position(cfg.F_obj + depth_um, cfg);
    const double a = cfg.c - ii.i2;
    Lf2Locus out;
    if (std::fabs(a - cfg.F_ml) < 1e-9 * cfg.F_ml) {
        out.at_infinity = true;
        return out;
    }
    out.b_um = a * cfg.F_ml / (a - cfg.F_ml);
    return out;
}

FrequencyPick highest_frequency_at_threshold(
    const std::vector<std::pair<double, double>>& responses,
    double thresh_frac) {
    if (responses.empty())
        throw ConfigError("highest_frequency_at_threshold: empty response list");
    for (std::size_t i = 1; i < responses.size(); ++i)
        if (responses[i].first < responses[i - 1].first)
            throw ConfigError("highest_frequency_at_threshold: frequencies not sorted");

    FrequencyPick pick;
    const double baseline = responses.front().second;
    if (!(baseline > 0.0)) return pick;
    const double cutoff = thresh_frac * baseline;
    for (std::size_t i = responses.size(); i > 0; --i)
        if (responses[i - 1].second >= cutoff) {
            pick.resolvable = true;
            pick.frequency = responses[i - 1].first;
            break;
        }
    return pick;
}

DesignGridSpec DesignGridSpec::full_default() {
    DesignGridSpec spec;
    for (int b = 1000; b <= 5000; b += 250)
        spec.b_values_um.push_back(static_cast<double>(b));
    for (int d = -32; d <= 32; ++d)
        spec.depths_um.push_back(static_cast<double>(d));
    return spec;
}

DesignGridSpec DesignGridSpec::reduced_default() {
    DesignGridSpec spec;
    for (int b = 2000; b <= 3000; b += 250)
        spec.b_values_um.push_back(static_cast<double>(b));
    for (int d = -6; d <= 6; ++d)
        spec.depths_um.push_back(static_cast<double>(d));
    return spec;
}

namespace {

double cell_metric(const DesignCell& cell, const std::string& metric) {
    if (metric == "contrast") return cell.contrast_freq;
    if (metric == "corr") return cell.corr_freq;
    if (metric == "fisher") return cell.fisher_trace;
    if (metric == "fisher_zz") return cell.fisher_zz;
    throw ConfigError("design: unknown metric '" + metric + "'");
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_safe(std::string s) {
    for (char& ch : s)
        if (ch == ',' || ch == '"' || ch == '\n' || ch == '\r') ch = ' ';
    return s;
}

void evaluate_cell(DesignCell& cell, const DesignScanConfig& cfg,
                   const std::vector<double>& freqs, std::uint64_t stack_seed,
                   std::uint64_t fi_seed) {
    OpticalConfig oc = cfg.optics;
    oc.b = cell.b_um;

    const bool use_rl = cfg.rl_iters > 0;
    const std::size_t vpl = use_rl ? cfg.rl_voxels_per_lenslet : 1;
    const std::size_t ns = use_rl ? vpl : 1;
    const ProjectionMode pm =
        use_rl ? ProjectionMode::periodic : ProjectionMode::invariant;

    const PsfStack stack =
        build_psf_stack(oc, {cell.depth_um}, cfg.target_ppl, ns,
                        PsfMode::geometric, cfg.rays, stack_seed);

    const double lat_um =
        oc.lenslet_pitch_um / (oc.M * static_cast<double>(vpl));
    const std::size_t lateral = cfg.lenslets * vpl;

    std::vector<std::pair<double, double>> contrast_resp, corr_resp;
    for (double f : freqs) {
        PhantomSpec ph;
        ph.kind = PhantomSpec::Kind::bars;
        ph.bar_frequencies_lpmm = {f};
        const Volume3D target = render_phantom(ph, 1, lateral, lateral, lat_um, 1.0);
        const LightField4D lf = forward_project(target, stack, pm, vpl);

        Image2D meas;
        if (use_rl) {
            DeconvConfig dc;
            dc.iterations = cfg.rl_iters;
            dc.mode = pm;
            dc.voxels_per_lenslet = vpl;
            meas = richardson_lucy(lf, stack, dc).slice(0);
        } else {
            meas = extract_view(lf, cfg.target_ppl / 2, cfg.target_ppl / 2);
        }
        const Image2D truth = target.slice(0);

        double cval = 0.0, rval = 0.0;
        try {
            cval = contrast(meas);
        } catch (const NumericError&) {
        }
        try {
            rval = pearson(meas.data, truth.data);
        } catch (const NumericError&) {
        }
        contrast_resp.emplace_back(f, cval);
        corr_resp.emplace_back(f, rval);
    }

    const FrequencyPick cp =
        highest_frequency_at_threshold(contrast_resp, cfg.thresh_frac);
    const FrequencyPick rp =
        highest_frequency_at_threshold(corr_resp, cfg.thresh_frac);
    cell.contrast_freq = cp.resolvable ? cp.frequency : 0.0;
    cell.corr_freq = rp.resolvable ? rp.frequency : 0.0;

    // Fisher information for a centered point source; all stencil kernels
    // share one support and one seed (common random numbers keep the
    // finite differences smooth).
    std::size_t support = 0;
    for (double dz : {-cfg.fisher_step[2], 0.0, cfg.fisher_step[2]})
        support = std::max(support, psf_support_lenslets(cell.depth_um + dz, oc));
    const auto psf_at = [&](const std::array<double, 3>& p,
                            double b_arg) -> Image2D {
        OpticalConfig o2 = oc;
        o2.b = b_arg;
        return simulate_psf(p[2], p[0], p[1], o2, cfg.target_ppl,
                            PsfMode::geometric, cfg.rays, fi_seed, support);
    };
    const FisherMatrix fm = fisher_information(
        psf_at, {0.0, 0.0, cell.depth_um}, cell.b_um, cfg.fisher_step);
    cell.fisher_trace = fm.trace();
    cell.fisher_zz = fm.at(2, 2);
}

} // namespace

DesignGrid run_design_scan(const DesignScanConfig& cfg) {
    cfg.optics.validate();
    if (cfg.grid.b_values_um.empty() || cfg.grid.depths_um.empty())
        throw ConfigError("design scan: empty grid");
    if (cfg.lenslets < 3)
        throw ConfigError("design scan: scene needs at least 3 lenslets");
    if (cfg.rl_iters > 0 && cfg.rl_voxels_per_lenslet % 2 == 0)
        throw ConfigError("design scan: voxels per lenslet must be odd");

    std::vector<double> freqs = cfg.frequencies_lpmm;
    if (freqs.empty()) {
        const std::size_t vpl = cfg.rl_iters > 0 ? cfg.rl_voxels_per_lenslet : 1;
        const double lat_um =
            cfg.optics.lenslet_pitch_um / (cfg.optics.M * static_cast<double>(vpl));
        const double fmax = 0.8 * 1000.0 / (2.0 * lat_um);
        freqs = {fmax / 8.0, fmax / 4.0, fmax / 2.0, fmax};
    }
    std::sort(freqs.begin(), freqs.end());

    DesignGrid grid;
    grid.optics = cfg.optics;
    grid.spec = cfg.grid;
    const std::size_t nd = cfg.grid.depths_um.size();
    grid.cells.resize(cfg.grid.b_values_um.size() * nd);

    for (std::size_t ib = 0; ib < cfg.grid.b_values_um.size(); ++ib)
        for (std::size_t id = 0; id < nd; ++id) {
            DesignCell& cell = grid.cells[ib * nd + id];
            cell.b_um = cfg.grid.b_values_um[ib];
            cell.depth_um = cfg.grid.depths_um[id];
            const std::size_t idx = ib * nd + id;
            try {
                evaluate_cell(cell, cfg, freqs, derive_seed(cfg.seed, 2 * idx),
                              derive_seed(cfg.seed, 2 * idx + 1));
            } catch (const Error& e) {
                cell.failed = true;
                cell.error = e.what();
            }
        }
    return grid;
}

std::vector<ProfilePoint> depth_average_profile(const DesignGrid& grid,
                                                const std::string& metric) {
    const std::size_t nd = grid.spec.depths_um.size();
    std::vector<ProfilePoint> profile;
    for (std::size_t ib = 0; ib < grid.spec.b_values_um.size(); ++ib) {
        ProfilePoint pt;
        pt.b_um = grid.spec.b_values_um[ib];
        double acc = 0.0;
        for (std::size_t id = 0; id < nd; ++id) {
            const DesignCell& cell = grid.cell(ib, id);
            if (cell.failed) continue;
            acc += cell_metric(cell, metric);
            ++pt.cells_used;
        }
        pt.average = pt.cells_used > 0 ? acc / static_cast<double>(pt.cells_used) : 0.0;
        profile.push_back(pt);
    }
    return profile;
}

OptimumB optimum_b(const DesignGrid& grid, const std::string& metric) {
    const auto profile = depth_average_profile(grid, metric);
    if (profile.empty()) throw ConfigError("optimum_b: empty grid");
    OptimumB best;
    double second = -std::numeric_limits<double>::infinity();
    bool first = true;
    for (const ProfilePoint& pt : profile) {
        if (first || pt.average > best.average) {
            if (!first) second = std::max(second, best.average);
            best.b_um = pt.b_um;
            best.average = pt.average;
            first = false;
        } else {
            second = std::max(second, pt.average);
        }
    }
    best.margin = profile.size() > 1 ? best.average - second : 0.0;
    return best;
}

Image2D heatmap_image(const DesignGrid& grid, const std::string& metric) {
    const std::size_t nb = grid.spec.b_values_um.size();
    const std::size_t nd = grid.spec.depths_um.size();
    Image2D img(nb, nd);
    for (std::size_t ib = 0; ib < nb; ++ib)
        for (std::size_t id = 0; id < nd; ++id) {
            const DesignCell& cell = grid.cell(ib, id);
            img.at(ib, id) = cell.failed ? 0.0 : cell_metric(cell, metric);
        }
    return img;
}

std::string design_grid_csv(const DesignGrid& grid) {
    std::string csv =
        "b_um,depth_um,fisher_trace,fisher_zz,contrast_freq,corr_freq,failed,error\n";
    for (const DesignCell& cell : grid.cells) {
        csv += fmt_double(cell.b_um) + "," + fmt_double(cell.depth_um) + "," +
               fmt_double(cell.fisher_trace) + "," + fmt_double(cell.fisher_zz) +
               "," + fmt_double(cell.contrast_freq) + "," +
               fmt_double(cell.corr_freq) + "," + (cell.failed ? "1" : "0") +
               "," + csv_safe(cell.error) + "\n";
    }
    return csv;
}

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

std::string profile_csv(const DesignGrid& grid, const std::string& metric) {
    const auto profile = depth_average_profile(grid, metric);
    const OptimumB best = optimum_b(grid, metric);
    std::string csv = "b_um,average,cells_used,is_argmax\n";
    for (const ProfilePoint& pt : profile)
        csv += fmt_double(pt.b_um) + "," + fmt_double(pt.average) + "," +
               std::to_string(pt.cells_used) + "," +
               (pt.b_um == best.b_um ? "1" : "0") + "\n";
    return csv;
}

} // namespace

void emit_heatmap(const DesignGrid& grid, const std::string& metric,
                  const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const Image2D img = heatmap_image(grid, metric);
    write_pgm(img, out_dir + "/heatmap_" + metric + ".pgm", 16);
    write_text(out_dir + "/profile_" + metric + ".csv", profile_csv(grid, metric));
}

void emit_design_artifacts(const DesignGrid& grid, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_text(out_dir + "/grid.csv", design_grid_csv(grid));
    for (const char* metric : {"contrast", "corr", "fisher"})
        emit_heatmap(grid, metric, out_dir);

    std::string profile = "b_um";
    for (const char* metric : {"contrast", "corr", "fisher"})
        profile += std::string(",avg_") + metric + ",cells_" + metric +
                   ",argmax_" + metric;
    profile += "\n";
    std::vector<std::vector<ProfilePoint>> per_metric;
    std::vector<OptimumB> best;
    for (const char* metric : {"contrast", "corr", "fisher"}) {
        per_metric.push_back(depth_average_profile(grid, metric));
        best.push_back(optimum_b(grid, metric));
    }
    for (std::size_t ib = 0; ib < grid.spec.b_values_um.size(); ++ib) {
        profile += fmt_double(grid.spec.b_values_um[ib]);
        for (std::size_t m = 0; m < per_metric.size(); ++m) {
            const ProfilePoint& pt = per_metric[m][ib];
            profile += "," + fmt_double(pt.average) + "," +
                       std::to_string(pt.cells_used) + "," +
                       (pt.b_um == best[m].b_um ? "1" : "0");
        }
        profile += "\n";
    }
    write_text(out_dir + "/profile.csv", profile);

    std::string locus = "depth_um,at_infinity,b_um\n";
    for (double depth : grid.spec.depths_um) {
        const Lf2Locus l = lf2_locus(depth, grid.optics);
        locus += fmt_double(depth) + "," + (l.at_infinity ? "1" : "0") + "," +
                 fmt_double(l.at_infinity ? 0.0 : l.b_um) + "\n";
    }
    write_text(out_dir + "/locus.csv", locus);
}

} // namespace lfm
