// Scan labeling with a trained sLTP model, per-lung signatures, and the
// (r', phi') density projection of labeled ROIs.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sltp/ltp.hpp"
#include "sltp/pdcm.hpp"
#include "sltp/sampling.hpp"
#include "sltp/texton.hpp"

namespace sltp {

inline constexpr std::uint8_t kBackgroundLabel = 0;
inline constexpr std::uint8_t kNoEmphysemaLabel = 1;
inline constexpr int kNoEmphysema = -1;

/// 0-based sLTP k is stored as k + 2; no-emphysema as 1.
std::uint8_t encode_label(int pattern);
int decode_label(std::uint8_t value);

/// Cost without the d_max penalty; ties to the lowest index.
int assign_pattern(const RoiRecord& roi, const PatternModel& model);

struct LabeledCenter {
    Voxel center;
    int pattern = kNoEmphysema;
};

struct LabelMask {
    Mask3D labels;
    Mask3D provenance;  // 1 = sampled center, 2 = filled from the nearest center
    std::vector<LabeledCenter> centers;
};

struct LabelInputs {
    const Volume3D& volume;
    const Mask3D& lung;
    const Mask3D& emph950;
    const Mask3D* emph_alt = nullptr;
    const PdcmField& field;
};

/// Centers that fail the emphysema gate are no-emphysema; the rest take the
/// cheapest sLTP. Other lung voxels copy the nearest center in mm (ties to the
/// lowest center index).
LabelMask label_scan(const LabelInputs& in, const PatternModel& model, const TextonCodebook& codebook,
                     const SursParams& surs, int threads = 1);

/// Center labels for already extracted ROIs (no-emphysema when not retained).
std::vector<LabeledCenter> label_centers(std::span<const RoiRecord> rois, const PatternModel& model);

/// Nearest-center fill of every lung voxel.
LabelMask fill_labels(const Mask3D& lung, std::vector<LabeledCenter> centers, int threads = 1);

/// Fractions of lung voxels per class: index 0 no-emphysema, k + 1 sLTP k.
std::vector<double> signature(const Mask3D& labels, const Mask3D& lung, std::size_t n_patterns);

/// Voxel-count weighted mean of per-lung signatures.
std::vector<double> combine_signatures(std::span<const std::vector<double>> sigs,
                                       std::span<const std::size_t> voxels);

struct DensitySample {
    double r = 0.0;
    double theta = 0.0;
    double phi = 0.0;
    int pattern = 0;
};

struct DensityPoint {
    double r_prime = 0.0;
    double phi_prime = 0.0;
    int pattern = 0;
    double density = 0.0;
};

struct DensityOptions {
    std::size_t n_r = 60;
    std::size_t n_iso = 5000;
    std::size_t grid_r = 60;
    std::size_t grid_phi = 90;
    std::uint64_t seed = 0;
};

struct DensityProjection {
    std::size_t grid_r = 0;
    std::size_t grid_phi = 0;
    std::size_t n_patterns = 0;
    std::vector<std::size_t> cell_count;     // grid_r x grid_phi
    std::vector<std::size_t> pattern_count;  // n_patterns x cells
    std::vector<std::size_t> pattern_total;
    std::vector<double> density;             // n_patterns x cells; NaN where the cell is empty
    std::vector<DensityPoint> points;

    std::size_t cell(std::size_t ir, std::size_t ip) const { return ir * grid_phi + ip; }
};

/// Subsamples each of n_r radial bins to alpha_i * n_iso points
/// (alpha_i = r_i / r_{n_r}), drops x, and bins (r' = |(y, z)|,
/// phi' = atan2(z, y)). density_k = P(cell | k) / P(cell).
DensityProjection density_projection(std::span<const DensitySample> pool, std::size_t n_patterns,
                                     const DensityOptions& options = {});

}  // namespace sltp
