// Texton codebook (K-means centroids of 3x3x3 HU patches) and the per-ROI
// texton-frequency histogram.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sltp/sampling.hpp"
#include "sltp/volume.hpp"

namespace sltp {

inline constexpr int kPatchEdge = 3;
inline constexpr int kPatchSize = kPatchEdge * kPatchEdge * kPatchEdge;

struct TextonCodebook {
    int k = 0;
    std::vector<double> textons;  // k x 27, patch order x fastest
    std::uint64_t seed = 0;
    double objective = 0.0;

    std::span<const double> texton(int j) const {
        return {textons.data() + static_cast<std::size_t>(j) * kPatchSize, kPatchSize};
    }
};

struct PatchSampling {
    std::size_t per_roi = 48;
    std::size_t max_total = 60000;
    std::uint64_t seed = 0;
};

/// Random 3^3 patches lying fully inside each ROI cube, drawn per ROI from a
/// stream keyed by `first_item + roi index`. Flattened, 27 values per patch.
std::vector<double> sample_patches(const Volume3D& v, std::span<const Voxel> centers, const RoiShape& shape,
                                   const PatchSampling& options, std::uint64_t first_item = 0);

/// Keeps an evenly strided subset so that at most `max_total` patches remain.
std::vector<double> thin_patches(std::span<const double> patches, std::size_t max_total);

TextonCodebook train_texton_codebook(std::span<const double> patches, int k, std::uint64_t seed,
                                     int threads = 1, int max_iter = 100);

/// Normalized histogram over textons of every stride-1 patch inside the
/// ROI cube (clipped to the volume). Throws if no patch fits.
std::vector<double> texture_feature(const Volume3D& v, const Voxel& center, const RoiShape& shape,
                                    const TextonCodebook& codebook);

}  // namespace sltp
