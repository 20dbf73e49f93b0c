#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lfm/image.hpp"

namespace lfm {

/// Synthetic scene description. Rendered intensities always lie in [0, 1]
/// and rendering is deterministic for a fixed seed.
struct PhantomSpec {
    enum class Kind { empty, bars, tubes, beads };
    Kind kind = Kind::empty;

    // bars: one horizontal band per frequency, square wave along x.
    std::vector<double> bar_frequencies_lpmm;

    // tubes: random lines with a Gaussian cross-section whose FWHM equals
    // the tube diameter.
    std::size_t tube_count = 0;
    double tube_radius_min_um = 0.5;
    double tube_radius_max_um = 1.5;

    // beads: Gaussian blobs; explicit positions (µm) win over random count.
    std::size_t bead_count = 0;
    double bead_radius_um = 0.5;
    std::vector<std::array<double, 3>> bead_positions_um; // (x, y, z)

    std::uint64_t seed = 0;
};

PhantomSpec phantom_from_json(const nlohmann::json& j);
nlohmann::json phantom_to_json(const PhantomSpec& spec);

/// Square-wave period of a bar target in voxels: 1000 / (f_lpmm * lat_um).
double bar_period_voxels(double freq_lpmm, double lat_um);

Volume3D render_phantom(const PhantomSpec& spec, std::size_t nd,
                        std::size_t vx, std::size_t vy, double lat_um,
                        double ax_um);

} // namespace lfm
