#pragma once

#include "lfm/image.hpp"
#include "lfm/optics.hpp"

namespace lfm {

/// invariant: every voxel in a lenslet uses the stack's center offset
/// class (per-depth shift-invariant convolution). periodic: each voxel
/// selects the class matching its sub-lenslet phase, giving the exact
/// periodically shift-variant model.
enum class ProjectionMode { invariant, periodic };

/// Linear imaging operator A: places each voxel's kernel centered on that
/// voxel's lenslet block and accumulates in ascending depth order. The
/// volume's lateral dims must be voxels_per_lenslet times the lenslet grid.
LightField4D forward_project(const Volume3D& vol, const PsfStack& psfs,
                             ProjectionMode mode,
                             std::size_t voxels_per_lenslet);

/// Exact transpose of forward_project (correlation with the same kernels,
/// including the sensor-boundary clipping).
Volume3D adjoint_project(const LightField4D& lf, const PsfStack& psfs,
                         ProjectionMode mode, std::size_t voxels_per_lenslet);

} // namespace lfm
