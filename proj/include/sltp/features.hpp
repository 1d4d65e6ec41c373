// Per-ROI texture/spatial features and the chi-squared histogram distance.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "sltp/pdcm.hpp"
#include "sltp/sampling.hpp"
#include "sltp/texton.hpp"

namespace sltp {

/// 1/2 sum (p_i - q_i)^2 / (p_i + q_i), skipping zero denominators.
double chi2_distance(std::span<const double> p, std::span<const double> q);

/// One-hot sub-region vector of a center; throws if the center is outside
/// the field's lung.
std::array<double, kSubregions> spatial_feature(const Voxel& center, const PdcmField& field);
int center_subregion(const Voxel& center, const PdcmField& field);

struct RoiRecord {
    Voxel center;
    int scan = 0;
    int lung = 0;
    std::vector<double> texture;
    int subregion = 0;
    double frac950 = 0.0;
    double frac_alt = 0.0;
    bool retained = false;
};

/// ||onehot(subregion) - c||^2 without materializing the one-hot vector.
double spatial_distance(int subregion, std::span<const double> c);

/// Records for every center of one lung: gate, texture histogram and
/// sub-region. Parallel over centers.
std::vector<RoiRecord> extract_rois(const Volume3D& v, const Mask3D& lung, const Mask3D& emph950,
                                    const Mask3D* emph_alt, const PdcmField& field, const TextonCodebook& codebook,
                                    std::span<const Voxel> centers, const RoiShape& shape, int scan, int lung_id,
                                    int threads = 1);

}  // namespace sltp
