// Synthetic lung phantoms with planted low-attenuation textures.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sltp/volume.hpp"

namespace sltp {

/// Geometric zone of the ellipsoidal phantom lung where a pattern is planted.
/// Zones are defined on normalized ellipsoid coordinates (u, v, w) with w
/// increasing from apex (w = -1) to base (w = +1) and v from anterior to
/// posterior.
enum class RegionFamily { Whole, Apical, MidLevel, Basal, Core, Peel, Anterior, Posterior };

RegionFamily parse_region_family(const std::string& name);
std::string to_string(RegionFamily f);

struct PlantedPattern {
    float mean_hu = -1000.0f;
    double blob_radius_mm = 3.0;
    /// Expected fraction of the zone covered by blobs (Boolean sphere model).
    double blob_density = 0.2;
    RegionFamily family = RegionFamily::Whole;
};

struct PhantomSpec {
    Dims dims{96, 96, 96};
    Spacing spacing{2.0, 2.0, 2.0};
    /// Lung ellipsoid semi-axes in mm; zeros select 0.42/0.36/0.45 of the extent.
    std::array<double, 3> semi_axes_mm{0.0, 0.0, 0.0};
    std::vector<PlantedPattern> patterns;
    float background_hu = -850.0f;
    float noise_hu = 20.0f;
    float outside_hu = 40.0f;
    /// When set, parenchyma and planted textures continue outside the lung
    /// mask (zones extended by their normalized coordinates), so ROI cubes
    /// that cross the mask boundary see the same texture. Planted labels stay
    /// inside the mask.
    bool embedded = false;
    std::uint64_t seed = 1;
};

struct Phantom {
    Volume3D volume;
    Mask3D lung;
    /// 0 outside any planted zone, k + 1 inside the zone of pattern k.
    Volume<std::uint8_t> planted;
};

/// Deterministic in `spec` (including seed). Throws std::invalid_argument when
/// the phantom description is invalid or a pattern's blobs cannot fit in its zone.
Phantom generate_phantom(const PhantomSpec& spec);

/// The three-pattern layout used by the phantom cohort (embedded textures):
/// sparse -1000 HU holes at the apex, dense -975 HU holes at mid level and
/// near-complete -930 HU attenuation at the base.
PhantomSpec three_pattern_spec(Dims dims, Spacing spacing, std::uint64_t seed);

}  // namespace sltp
