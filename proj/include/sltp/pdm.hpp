// Poisson distance map (PDM) of a lung mask and its slice-wise calibration.
//
// The raw map solves  ΔU = -1  inside the mask with U = 0 on the mask
// surface. The calibrated map U_mod equals the per-slice normalized map on a
// band of mid-level slices [i_u, i_d] and decays towards apex and base, which
// gives every lung a core on its 50%-volume slice.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sltp/volume.hpp"

namespace sltp {

/// Where the U = 0 condition sits relative to a background neighbor.
enum class DirichletPlacement {
    /// On the shared voxel face (ghost value -U). The mask is read as a union
    /// of voxel cubes.
    VoxelFace,
    /// At the background voxel center (ghost value 0).
    VoxelCenter,
};

struct PoissonOptions {
    /// Stop when max |ΔU + 1| over the mask falls below tol.
    double tol = 1e-4;
    int max_iter = 10000;
    DirichletPlacement boundary = DirichletPlacement::VoxelFace;
    /// SOR relaxation factor; 0 selects 2 / (1 + sin(pi / (n + 1))) from the
    /// largest mask extent n.
    double omega = 0.0;
    int threads = 1;
    int check_every = 4;
};

struct PoissonResult {
    Volume<double> u;  // unnormalized, zero outside the mask
    double max_value = 0.0;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
};

/// Red-black SOR with the anisotropic 6-neighbor Laplacian. Throws on an empty
/// mask; non-convergence is reported through `converged` and `residual`.
PoissonResult solve_poisson(const Mask3D& mask, const PoissonOptions& options = {});

/// Max |ΔU + 1| over mask voxels under the same discretization as the solver.
double poisson_residual(const Mask3D& mask, const Volume<double>& u, DirichletPlacement boundary);

/// U divided by its maximum.
Volume3D normalize_to_unit_max(const PoissonResult& result);

/// Per axial slice maximum over mask voxels (0 for slices without mask voxels).
std::vector<double> slice_maxima(const Volume3D& field, const Mask3D& mask);

/// Fraction of mask voxels in slices 0..i inclusive.
std::vector<double> cumulative_volume(const Mask3D& mask);

/// First slice at which the cumulative volume fraction reaches `fraction`.
std::size_t volume_slice(std::span<const double> cum_volume, double fraction);

/// Each slice divided by its in-mask maximum; slices with maximum 0 stay 0.
Volume3D per_slice_normalize(const Volume3D& u3d, const Mask3D& mask);

struct ReferenceSlices {
    std::size_t apical_candidate = 0;  // i_u'
    std::size_t basal_candidate = 0;   // i_d'
    std::size_t upper = 0;             // i_u
    std::size_t lower = 0;             // i_d
};

/// i_u' is the largest x whose maximum strictly exceeds every slice above it,
/// i_d' the smallest x whose maximum strictly exceeds every slice below it;
/// i_u = min(S25%, i_u'), i_d = max(S75%, i_d').
ReferenceSlices reference_slices(std::span<const double> slice_max, std::span<const double> cum_volume);

Volume3D modify_pdm(const Volume3D& u3d, const Volume3D& u2d, const Mask3D& mask,
                    std::size_t upper, std::size_t lower, std::span<const double> slice_max);

constexpr double kCoreEpsilon = 1e-6;

/// Voxel of the 50%-volume slice with U_mod within kCoreEpsilon of the slice
/// maximum that is closest (in mm) to the slice's center of mass; ties go to
/// the lexicographically smaller (y, x).
Voxel find_core(const Volume3D& umod, const Mask3D& mask, std::span<const double> cum_volume);

struct PdmField {
    Volume3D u3d;
    Volume3D u2d;
    Volume3D umod;
    std::vector<double> slice_max;
    std::vector<double> cum_volume;
    ReferenceSlices slices;
    Voxel core;
    int solver_iterations = 0;
    double solver_residual = 0.0;
    bool solver_converged = false;
};

PdmField compute_pdm(const Mask3D& mask, const PoissonOptions& options = {});

}  // namespace sltp
