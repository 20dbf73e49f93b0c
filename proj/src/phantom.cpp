#include "lfm/phantom.hpp"

#include <cmath>
#include <numbers>

#include "lfm/errors.hpp"
#include "lfm/rng.hpp"

namespace lfm {

namespace {

// FWHM of exp(-d^2 / (2 sigma^2)) is 2.3548 sigma; sigma = r / 1.1774
// makes the cross-section FWHM equal the diameter 2r.
double sigma_for_radius(double r) { return r / 1.17741002251547466; }

PhantomSpec::Kind kind_from_string(const std::string& s) {
    if (s == "empty") return PhantomSpec::Kind::empty;
    if (s == "bars") return PhantomSpec::Kind::bars;
    if (s == "tubes") return PhantomSpec::Kind::tubes;
    if (s == "beads") return PhantomSpec::Kind::beads;
    throw ConfigError("phantom: unknown kind '" + s + "'");
}

std::string kind_to_string(PhantomSpec::Kind k) {
    switch (k) {
        case PhantomSpec::Kind::empty: return "empty";
        case PhantomSpec::Kind::bars: return "bars";
        case PhantomSpec::Kind::tubes: return "tubes";
        case PhantomSpec::Kind::beads: return "beads";
    }
    throw ConfigError("phantom: invalid kind");
}

} // namespace

PhantomSpec phantom_from_json(const nlohmann::json& j) {
    PhantomSpec spec;
    spec.kind = kind_from_string(j.value("kind", std::string("empty")));
    spec.bar_frequencies_lpmm =
        j.value("frequencies_lpmm", spec.bar_frequencies_lpmm);
    spec.tube_count = j.value("tube_count", spec.tube_count);
    if (j.contains("tube_radius_um")) {
        const auto& r = j.at("tube_radius_um");
        if (r.is_array() && r.size() == 2) {
            spec.tube_radius_min_um = r[0].get<double>();
            spec.tube_radius_max_um = r[1].get<double>();
        } else if (r.is_number()) {
            spec.tube_radius_min_um = spec.tube_radius_max_um = r.get<double>();
        } else {
            throw ConfigError("phantom: tube_radius_um must be a number or [min, max]");
        }
    }
    spec.bead_count = j.value("bead_count", spec.bead_count);
    spec.bead_radius_um = j.value("bead_radius_um", spec.bead_radius_um);
    if (j.contains("bead_positions_um"))
        for (const auto& p : j.at("bead_positions_um")) {
            if (!p.is_array() || p.size() != 3)
                throw ConfigError("phantom: bead positions must be [x, y, z] µm");
            spec.bead_positions_um.push_back(
                {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
        }
    spec.seed = j.value("seed", spec.seed);
    return spec;
}

nlohmann::json phantom_to_json(const PhantomSpec& spec) {
    nlohmann::json j;
    j["kind"] = kind_to_string(spec.kind);
    j["seed"] = spec.seed;
    switch (spec.kind) {
        case PhantomSpec::Kind::empty:
            break;
        case PhantomSpec::Kind::bars:
            j["frequencies_lpmm"] = spec.bar_frequencies_lpmm;
            break;
        case PhantomSpec::Kind::tubes:
            j["tube_count"] = spec.tube_count;
            j["tube_radius_um"] = {spec.tube_radius_min_um, spec.tube_radius_max_um};
            break;
        case PhantomSpec::Kind::beads:
            j["bead_count"] = spec.bead_count;
            j["bead_radius_um"] = spec.bead_radius_um;
            if (!spec.bead_positions_um.empty()) {
                nlohmann::json pos = nlohmann::json::array();
                for (const auto& p : spec.bead_positions_um)
                    pos.push_back({p[0], p[1], p[2]});
                j["bead_positions_um"] = pos;
            }
            break;
    }
    return j;
}

double bar_period_voxels(double freq_lpmm, double lat_um) {
    if (!(freq_lpmm > 0.0) || !(lat_um > 0.0))
        throw ConfigError("bar_period_voxels: frequency and pitch must be > 0");
    return 1000.0 / (freq_lpmm * lat_um);
}

namespace {

void render_bars(const PhantomSpec& spec, Volume3D& vol, double lat_um) {
    const std::size_t nfreq = spec.bar_frequencies_lpmm.size();
    if (nfreq == 0) throw ConfigError("phantom: bar target needs frequencies");
    for (double f : spec.bar_frequencies_lpmm)
        if (bar_period_voxels(f, lat_um) < 2.0)
            throw ConfigError("phantom: bar frequency above the voxel Nyquist limit");

    const std::size_t band = std::max<std::size_t>(vol.vy / nfreq, 1);
    for (std::size_t y = 0; y < vol.vy; ++y) {
        const std::size_t k = std::min(y / band, nfreq - 1);
        const double period_um = 1000.0 / spec.bar_frequencies_lpmm[k];
        for (std::size_t x = 0; x < vol.vx; ++x) {
            const double pos = std::fmod(static_cast<double>(x) * lat_um, period_um);
            const double v = pos < 0.5 * period_um ? 1.0 : 0.0;
            for (std::size_t z = 0; z < vol.depth; ++z) vol.at(z, x, y) = v;
        }
    }
}

void render_tubes(const PhantomSpec& spec, Volume3D& vol, double lat_um,
                  double ax_um) {
    Rng rng(spec.seed);
    const double wx = static_cast<double>(vol.vx) * lat_um;
    const double wy = static_cast<double>(vol.vy) * lat_um;
    const double wz = static_cast<double>(vol.depth) * ax_um;
    struct Tube {
        double px, py, pz;
        double dx, dy, dz;
        double sigma;
    };
    std::vector<Tube> tubes;
    tubes.reserve(spec.tube_count);
    for (std::size_t t = 0; t < spec.tube_count; ++t) {
        Tube tube;
        tube.px = rng.uniform(0.0, wx);
        tube.py = rng.uniform(0.0, wy);
        tube.pz = rng.uniform(0.0, wz);
        const double z = rng.uniform(-1.0, 1.0);
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
        tube.dx = s * std::cos(phi);
        tube.dy = s * std::sin(phi);
        tube.dz = z;
        tube.sigma = sigma_for_radius(
            rng.uniform(spec.tube_radius_min_um, spec.tube_radius_max_um));
        tubes.push_back(tube);
    }
    for (std::size_t z = 0; z < vol.depth; ++z) {
        const double pz = static_cast<double>(z) * ax_um;
        for (std::size_t x = 0; x < vol.vx; ++x) {
            const double px = static_cast<double>(x) * lat_um;
            for (std::size_t y = 0; y < vol.vy; ++y) {
                const double py = static_cast<double>(y) * lat_um;
                double best = 0.0;
                for (const Tube& t : tubes) {
                    const double vx_ = px - t.px, vy_ = py - t.py, vz_ = pz - t.pz;
                    const double along = vx_ * t.dx + vy_ * t.dy + vz_ * t.dz;
                    const double d2 = vx_ * vx_ + vy_ * vy_ + vz_ * vz_ - along * along;
                    best = std::max(best,
                                    std::exp(-d2 / (2.0 * t.sigma * t.sigma)));
                }
                vol.at(z, x, y) = best;
            }
        }
    }
}

void render_beads(const PhantomSpec& spec, Volume3D& vol, double lat_um,
                  double ax_um) {
    std::vector<std::array<double, 3>> centers = spec.bead_positions_um;
    if (centers.empty()) {
        Rng rng(spec.seed);
        const double wx = static_cast<double>(vol.vx) * lat_um;
        const double wy = static_cast<double>(vol.vy) * lat_um;
        const double wz = static_cast<double>(vol.depth) * ax_um;
        for (std::size_t i = 0; i < spec.bead_count; ++i)
            centers.push_back({rng.uniform(0.0, wx), rng.uniform(0.0, wy),
                               rng.uniform(0.0, wz)});
    }
    const double sigma = sigma_for_radius(spec.bead_radius_um);
    for (std::size_t z = 0; z < vol.depth; ++z) {
        const double pz = static_cast<double>(z) * ax_um;
        for (std::size_t x = 0; x < vol.vx; ++x) {
            const double px = static_cast<double>(x) * lat_um;
            for (std::size_t y = 0; y < vol.vy; ++y) {
                const double py = static_cast<double>(y) * lat_um;
                double best = 0.0;
                for (const auto& ctr : centers) {
                    const double dx = px - ctr[0], dy = py - ctr[1], dz = pz - ctr[2];
                    const double d2 = dx * dx + dy * dy + dz * dz;
                    best = std::max(best, std::exp(-d2 / (2.0 * sigma * sigma)));
                }
                vol.at(z, x, y) = best;
            }
        }
    }
}

} // namespace

Volume3D render_phantom(const PhantomSpec& spec, std::size_t nd,
                        std::size_t vx, std::size_t vy, double lat_um,
                        double ax_um) {
    if (nd == 0 || vx == 0 || vy == 0)
        throw DimensionError("render_phantom: dims must be positive");
    if (!(lat_um > 0.0) || !(ax_um > 0.0))
        throw ConfigError("render_phantom: voxel pitches must be > 0");
    Volume3D vol(nd, vx, vy);
    switch (spec.kind) {
        case PhantomSpec::Kind::empty:
            break;
        case PhantomSpec::Kind::bars:
            render_bars(spec, vol, lat_um);
            break;
        case PhantomSpec::Kind::tubes:
            render_tubes(spec, vol, lat_um, ax_um);
            break;
        case PhantomSpec::Kind::beads:
            render_beads(spec, vol, lat_um, ax_um);
            break;
    }
    vol.meta["voxel_um"] = {lat_um, lat_um, ax_um};
    vol.meta["phantom"] = phantom_to_json(spec);
    return vol;
}

} // namespace lfm
