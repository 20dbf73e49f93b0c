#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lfm/image.hpp"

namespace lfm {

/// Microscope + MLA geometry, lengths in µm. Defaults describe a 40x/0.9
/// air objective with a 165 mm tube lens, 112 µm lenslets of 2.5 mm focal
/// length and a 3.45 µm sensor.
struct OpticalConfig {
    double M = 40.0;               // magnification
    double NA = 0.9;               // numerical aperture (air)
    double F_obj = 4125.0;         // objective focal length
    double F_tl = 165000.0;        // tube lens focal length
    double c = 165000.0;           // tube lens -> MLA distance, defaults to F_tl
    double F_ml = 2500.0;          // lenslet focal length
    double lenslet_pitch_um = 112.0;
    double sensor_pitch_um = 3.45;
    double b = 2500.0;             // MLA -> sensor distance
    double lambda_um = 0.617;      // emission wavelength

    double obj_radius() const { return F_obj * NA; } // back-aperture radius
    void validate() const;
};

void to_json(nlohmann::json& j, const OpticalConfig& cfg);
void from_json(const nlohmann::json& j, OpticalConfig& cfg);

/// Image positions for a source at axial distance o1 from the objective.
/// i1: intermediate image behind the objective alone (at infinity when o1
/// sits on the front focal plane). i2: image distance behind the tube lens,
/// affine in o1 with slope -M^2.
struct IntermediateImage {
    double i1 = 0.0;
    bool i1_at_infinity = false;
    double i2 = 0.0;
};
IntermediateImage intermediate_image_position(double o1_um, const OpticalConfig& cfg);

/// Total blur footprint at the MLA plane, in lenslets, for a source of
/// lateral extent source_extent_um at axial position o1: (2*ML_b + M*Os)
/// divided by the lenslet pitch.
double blur_lenslet_count(double o1_um, double source_extent_um,
                          const OpticalConfig& cfg);

/// Kernel support half-width in lenslets needed for a source at this depth
/// (analytic footprint plus post-lenslet spread margin).
std::size_t psf_support_lenslets(double depth_um, const OpticalConfig& cfg);

enum class PsfMode { geometric, wave };

/// Sensor-plane kernel for a point source at the given defocus and lateral
/// offset from the central lenslet's axis (object-space µm). The kernel is
/// binned on the rectified grid of target_ppl pixels per lenslet, centered
/// on the central lenslet, normalized to unit sum, truncated at 1e-4 of its
/// max and renormalized. Geometric mode traces rays_or_grid seeded rays
/// (minimum 1e4); wave mode uses a rays_or_grid x rays_or_grid field grid
/// (power of two) and angular-spectrum propagation.
/// support_lenslets overrides the automatic kernel extent (0 = auto).
Image2D simulate_psf(double depth_um, double offset_x_um, double offset_y_um,
                     const OpticalConfig& cfg, std::size_t target_ppl,
                     PsfMode mode, std::size_t rays_or_grid, std::uint64_t seed,
                     std::size_t support_lenslets = 0);

/// Depth- and sub-lenslet-offset-indexed kernels sharing one support size.
/// ns x ns offset classes span one lenslet in object space; class centers
/// sit at ((cls + 0.5)/ns - 0.5) * pitch/M. ns must be odd so the middle
/// class is the lenslet center.
struct PsfStack {
    std::size_t a = 0;  // rectified pixels per lenslet (odd)
    std::size_t ns = 1; // offset classes per axis
    std::vector<double> depths_um;
    std::vector<Image2D> kernels; // [d * ns * ns + ox * ns + oy]
    nlohmann::json meta = nlohmann::json::object();

    const Image2D& kernel(std::size_t d, std::size_t ox, std::size_t oy) const {
        return kernels[(d * ns + ox) * ns + oy];
    }
    Image2D& kernel(std::size_t d, std::size_t ox, std::size_t oy) {
        return kernels[(d * ns + ox) * ns + oy];
    }
    std::size_t center_class() const { return (ns - 1) / 2; }
};

PsfStack build_psf_stack(const OpticalConfig& cfg,
                         const std::vector<double>& depths_um,
                         std::size_t target_ppl, std::size_t ns, PsfMode mode,
                         std::size_t rays, std::uint64_t seed);

/// Container I/O using kind "psf"; depths and offsets live in the header.
void write_psf_stack(const PsfStack& stack, const std::string& path);
PsfStack read_psf_stack(const std::string& path);

} // namespace lfm
