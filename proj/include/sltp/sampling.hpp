// Systematic uniform random sampling (SURS) of ROI centers and the
// emphysema gate that decides which ROIs enter training.
#pragma once

#include <cstdint>
#include <vector>

#include "sltp/volume.hpp"

namespace sltp {

struct SursParams {
    double roi_size_mm = 25.0;  // cube edge, also the stack edge
    double beta1_mm = 25.0;     // bound of the per-stack random shift
    int beta2 = 3;              // samples per stack
    std::uint64_t seed = 0;
};

void validate(const SursParams& p);

/// ROI cube edge in voxels per axis: round(roi_size_mm / spacing), at least 1.
struct RoiShape {
    std::int64_t ex = 1;
    std::int64_t ey = 1;
    std::int64_t ez = 1;
};
RoiShape roi_shape(const Spacing& spacing, double roi_size_mm);

/// Half-open voxel box [lo, hi) of the ROI cube around `center`, clipped to
/// the volume. Even edges start at center - edge/2.
struct Box {
    Voxel lo;
    Voxel hi;
};
Box roi_box(const Voxel& center, const RoiShape& shape, const Dims& dims);

/// Stacks tile the lung bounding box. Each stack draws one shift
/// s in [0, beta1]^3 mm; its beta2 candidates are the R3 low-discrepancy points
/// frac(s / edge + (j + 1/2) alpha) scaled to the stack. Candidates outside the
/// mask are dropped. Output is ordered by stack (x fastest), then j.
std::vector<Voxel> surs_sample(const Mask3D& lung, const SursParams& p);

inline constexpr double kEmphysemaGate = 0.01;

struct GateResult {
    double frac950 = 0.0;
    double frac_alt = 0.0;
    bool retained = false;
};

/// Emphysema fractions over ROI cube ∩ lung. Pass `emph_alt = nullptr` to use
/// the threshold mask for both fractions.
GateResult gate_roi(const Voxel& center, const RoiShape& shape, const Mask3D& emph950,
                    const Mask3D* emph_alt, const Mask3D& lung);

}  // namespace sltp
