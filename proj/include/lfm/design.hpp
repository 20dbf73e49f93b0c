#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lfm/metrics.hpp"
#include "lfm/optics.hpp"

namespace lfm {

/// Sensor distance that focuses a source at this depth under the thin-lens
/// relation 1/a + 1/b = 1/F_ml with a = c - i2(depth). The pole a = F_ml
/// (collimated output) is signaled as at-infinity.
struct Lf2Locus {
    bool at_infinity = false;
    double b_um = 0.0;
};
Lf2Locus lf2_locus(double depth_um, const OpticalConfig& cfg);

/// Largest frequency whose response is at least thresh_frac times the
/// response at the lowest frequency. responses must be sorted by ascending
/// frequency. Not resolvable when the baseline is non-positive or nothing
/// qualifies.
struct FrequencyPick {
    bool resolvable = false;
    double frequency = 0.0;
};
FrequencyPick highest_frequency_at_threshold(
    const std::vector<std::pair<double, double>>& responses, double thresh_frac);

struct DesignCell {
    double b_um = 0.0;
    double depth_um = 0.0;
    bool failed = false;
    std::string error;
    double fisher_trace = 0.0;
    double fisher_zz = 0.0;
    double contrast_freq = 0.0; // 0 = not resolvable at the threshold
    double corr_freq = 0.0;
};

struct DesignGridSpec {
    std::vector<double> b_values_um;
    std::vector<double> depths_um;

    /// 17 sensor positions 1000..5000 µm step 250, depths -32..32 step 1.
    static DesignGridSpec full_default();
    /// 5 positions bracketing b = F_ml, depths -6..6 step 1.
    static DesignGridSpec reduced_default();
};

struct DesignScanConfig {
    OpticalConfig optics;
    DesignGridSpec grid = DesignGridSpec::reduced_default();
    std::vector<double> frequencies_lpmm; // empty = auto below grid Nyquist
    std::size_t lenslets = 13;            // scene extent per axis
    std::size_t target_ppl = 11;
    std::size_t rl_iters = 0;             // 0 = score the raw central view
    std::size_t rl_voxels_per_lenslet = 7;
    std::size_t rays = 100000;
    std::uint64_t seed = 1;
    double thresh_frac = 0.8;
    std::array<double, 3> fisher_step = {0.1, 0.1, 0.25};
};

struct DesignGrid {
    OpticalConfig optics;
    DesignGridSpec spec;
    std::vector<DesignCell> cells; // b-major, depth-minor

    const DesignCell& cell(std::size_t ib, std::size_t id) const {
        return cells[ib * spec.depths_um.size() + id];
    }
};

/// Per cell: image a bar target per frequency through the cell's sensor
/// distance, score contrast and correlation against the ground truth
/// (raw central view when rl_iters = 0, otherwise a Richardson-Lucy
/// reconstruction), reduce with highest_frequency_at_threshold, and
/// compute Fisher information for a centered point source. Failures are
/// recorded per cell and the scan continues.
DesignGrid run_design_scan(const DesignScanConfig& cfg);

/// Depth-averaged profile over non-failed cells, one entry per b.
struct ProfilePoint {
    double b_um = 0.0;
    double average = 0.0;
    std::size_t cells_used = 0;
};
std::vector<ProfilePoint> depth_average_profile(const DesignGrid& grid,
                                                const std::string& metric);

/// Argmax of the depth-averaged profile; ties break to the smallest b.
/// margin = best average minus runner-up average.
struct OptimumB {
    double b_um = 0.0;
    double average = 0.0;
    double margin = 0.0;
};
OptimumB optimum_b(const DesignGrid& grid, const std::string& metric);

/// Heatmap matrix for one metric: width = b values, height = depths.
Image2D heatmap_image(const DesignGrid& grid, const std::string& metric);

/// Writes heatmap_<metric>.pgm (+ sidecar) and profile_<metric>.csv under
/// out_dir. Metric names: contrast, corr, fisher, fisher_zz.
void emit_heatmap(const DesignGrid& grid, const std::string& metric,
                  const std::string& out_dir);

/// Writes grid.csv, the three standard heatmaps, profile.csv and locus.csv.
void emit_design_artifacts(const DesignGrid& grid, const std::string& out_dir);

/// Stable CSV serialization of the grid (used for byte-identity checks).
std::string design_grid_csv(const DesignGrid& grid);

} // namespace lfm
