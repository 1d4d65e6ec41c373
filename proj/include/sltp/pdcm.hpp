// Poisson distance conformal map (PDCM): per-voxel (r, theta, phi) lung
// coordinates, the 36-bin sub-region binning, and intensity projections.
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sltp/pdm.hpp"
#include "sltp/volume.hpp"

namespace sltp {

enum class LungSide { Right, Left };
std::string to_string(LungSide side);

struct PdcmField {
    Volume3D r;      // 1 - U_mod
    Volume3D theta;  // azimuth in [0, 2pi), 0 at +x
    Volume3D phi;    // latitude in [-pi/2, pi/2], positive towards the apex
    Mask3D lung;
    Voxel core;
    LungSide side = LungSide::Right;
};

/// theta = atan2(dy, dx) in the axial plane; phi = atan2(apex-ward dz, |(dx, dy)|),
/// with displacements in mm from the core. The core itself gets (0, 0, 0).
PdcmField assign_coordinates(const Volume3D& umod, const Voxel& core, const Mask3D& lung,
                             LungSide side = LungSide::Right);

inline constexpr int kRadialBins = 3;
inline constexpr int kAzimuthBins = 4;
inline constexpr int kLatitudeBins = 3;
inline constexpr int kSubregions = kRadialBins * kAzimuthBins * kLatitudeBins;

struct SubregionBins {
    int radial = 0;
    int azimuth = 0;
    int latitude = 0;
    int index = 0;
};

/// index = b_r * 12 + b_theta * 3 + b_phi.
SubregionBins subregion_bins(double r, double theta, double phi);
int subregion_index(double r, double theta, double phi);
std::array<double, kSubregions> subregion_onehot(int index);

/// Voxel counts per sub-region over the lung.
std::array<std::size_t, kSubregions> subregion_occupancy(const PdcmField& field);

/// Row-major grid of means; NaN marks an empty (missing) cell.
struct Grid2D {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    bool missing(std::size_t r, std::size_t c) const;
    std::size_t present_count() const;
};

/// Mean intensity per (theta, phi) cell; rows index theta, columns phi.
Grid2D angular_projection(const Volume3D& v, const PdcmField& field, std::size_t n_theta = 72,
                          std::size_t n_phi = 36);

/// Mean intensity per regular r interval (1 x n_r grid).
Grid2D radial_projection(const Volume3D& v, const PdcmField& field, std::size_t n_r = 60);

/// Cellwise mean of `projections` minus `reference`; missing anywhere stays missing.
Grid2D population_projection(std::span<const Grid2D> projections, const Grid2D& reference);

/// Cell midpoints for CSV headers.
std::vector<double> theta_midpoints(std::size_t n_theta);
std::vector<double> phi_midpoints(std::size_t n_phi);
std::vector<double> radial_midpoints(std::size_t n_r);

}  // namespace sltp
