// Small phantom-derived ROI sets shared by several suites.
#pragma once

#include <vector>

#include "sltp/features.hpp"
#include "sltp/phantom.hpp"
#include "sltp/random.hpp"

struct SmallCohort {
    std::vector<sltp::RoiRecord> rois;  // retained ROIs only
    sltp::TextonCodebook codebook;
};

// Two 40^3 phantoms at 3 mm with 25 mm ROIs; retained ROIs of both lungs.
inline SmallCohort small_cohort(std::uint64_t seed = 1, int textons = 12) {
    using namespace sltp;
    SmallCohort out;
    std::vector<Phantom> phs;
    for (int s = 0; s < 2; ++s) phs.push_back(generate_phantom(three_pattern_spec({40, 40, 40}, {3, 3, 3}, seed + s)));
    const auto shape = roi_shape({3, 3, 3}, 25.0);
    std::vector<double> patches;
    std::vector<std::vector<Voxel>> centers;
    for (std::size_t s = 0; s < phs.size(); ++s) {
        SursParams p;
        p.roi_size_mm = 12.0;
        p.seed = stream_seed(seed, "fixture", s);
        centers.push_back(surs_sample(phs[s].lung, p));
        PatchSampling ps;
        ps.per_roi = 8;
        ps.seed = seed;
        const auto pt = sample_patches(phs[s].volume, centers.back(), shape, ps, s * 100000);
        patches.insert(patches.end(), pt.begin(), pt.end());
    }
    out.codebook = train_texton_codebook(patches, textons, seed);
    for (std::size_t s = 0; s < phs.size(); ++s) {
        const auto pdm = compute_pdm(phs[s].lung);
        const auto field = assign_coordinates(pdm.umod, pdm.core, phs[s].lung);
        const auto emph = threshold_mask(phs[s].volume, phs[s].lung, -950.0f);
        for (auto& r : extract_rois(phs[s].volume, phs[s].lung, emph, nullptr, field, out.codebook, centers[s], shape,
                                    static_cast<int>(s), 0))
            if (r.retained) out.rois.push_back(std::move(r));
    }
    return out;
}

// ROI with a given texture and sub-region.
inline sltp::RoiRecord roi(std::vector<double> texture, int subregion = 0) {
    sltp::RoiRecord r;
    r.texture = std::move(texture);
    r.subregion = subregion;
    r.retained = true;
    return r;
}
