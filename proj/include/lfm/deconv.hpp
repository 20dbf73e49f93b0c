#pragma once

#include "lfm/projector.hpp"

namespace lfm {

struct DeconvConfig {
    std::size_t iterations = 5;
    double epsilon_scale = 1e-9; // guard = scale * max(input)
    ProjectionMode mode = ProjectionMode::invariant;
    std::size_t voxels_per_lenslet = 1;
    bool smooth3 = false; // per-iteration 3x3 lateral box smoothing
};

/// Multiplicative Richardson-Lucy updates
///   v <- v * Adj(I / max(Fwd(v), eps)) / max(Adj(1), eps)
/// starting from a uniform volume whose value is the input mean divided by
/// the depth count. Non-negativity is preserved at every iteration.
Volume3D richardson_lucy(const LightField4D& lf, const PsfStack& psfs,
                         const DeconvConfig& cfg);

} // namespace lfm
