#include "sltp/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sltp/random.hpp"

namespace sltp {

RegionFamily parse_region_family(const std::string& name) {
    if (name == "whole") return RegionFamily::Whole;
    if (name == "apical") return RegionFamily::Apical;
    if (name == "mid") return RegionFamily::MidLevel;
    if (name == "basal") return RegionFamily::Basal;
    if (name == "core") return RegionFamily::Core;
    if (name == "peel") return RegionFamily::Peel;
    if (name == "anterior") return RegionFamily::Anterior;
    if (name == "posterior") return RegionFamily::Posterior;
    throw std::invalid_argument("unknown region family: " + name);
}

std::string to_string(RegionFamily f) {
    switch (f) {
        case RegionFamily::Whole: return "whole";
        case RegionFamily::Apical: return "apical";
        case RegionFamily::MidLevel: return "mid";
        case RegionFamily::Basal: return "basal";
        case RegionFamily::Core: return "core";
        case RegionFamily::Peel: return "peel";
        case RegionFamily::Anterior: return "anterior";
        case RegionFamily::Posterior: return "posterior";
    }
    return "whole";
}

namespace {

bool in_family(RegionFamily f, double u, double v, double w) {
    const double rho = std::sqrt(u * u + v * v + w * w);
    switch (f) {
        case RegionFamily::Whole: return true;
        case RegionFamily::Apical: return w < -1.0 / 3.0;
        case RegionFamily::MidLevel: return w >= -1.0 / 3.0 && w <= 1.0 / 3.0;
        case RegionFamily::Basal: return w > 1.0 / 3.0;
        case RegionFamily::Core: return rho < 0.6;
        case RegionFamily::Peel: return rho >= 0.75;
        case RegionFamily::Anterior: return v < -0.2;
        case RegionFamily::Posterior: return v > 0.2;
    }
    return false;
}

}  // namespace

Phantom generate_phantom(const PhantomSpec& spec) {
    for (const auto& p : spec.patterns) {
        if (!(p.mean_hu < spec.background_hu))
            throw std::invalid_argument("planted pattern mean must be below background mean");
        if (!(p.blob_radius_mm > 0.0) || !(p.blob_density > 0.0))
            throw std::invalid_argument("planted pattern needs positive radius and density");
    }
    if (spec.patterns.size() > 250) throw std::invalid_argument("too many planted patterns");
    if (spec.noise_hu < 0.0f) throw std::invalid_argument("noise must be nonnegative");

    const Dims d = spec.dims;
    const Spacing s = spec.spacing;
    Phantom ph{Volume3D(d, s, spec.outside_hu), Mask3D(d, s, 0), Volume<std::uint8_t>(d, s, 0)};

    std::array<double, 3> axes = spec.semi_axes_mm;
    if (axes[0] <= 0.0) axes[0] = 0.42 * d.nx * s.sx;
    if (axes[1] <= 0.0) axes[1] = 0.36 * d.ny * s.sy;
    if (axes[2] <= 0.0) axes[2] = 0.45 * d.nz * s.sz;
    const double cx = 0.5 * (d.nx - 1) * s.sx;
    const double cy = 0.5 * (d.ny - 1) * s.sy;
    const double cz = 0.5 * (d.nz - 1) * s.sz;
    auto normalized = [&](double xm, double ym, double zm) {
        return std::array<double, 3>{(xm - cx) / axes[0], (ym - cy) / axes[1], (zm - cz) / axes[2]};
    };

    Rng rng(stream_seed(spec.seed, "phantom"));

    std::vector<std::size_t> zone_count(spec.patterns.size(), 0);
    // Zone of every textured voxel; equals planted inside the lung.
    Volume<std::uint8_t> zone(d, s, 0);
    for (std::int64_t z = 0; z < d.nz; ++z) {
        for (std::int64_t y = 0; y < d.ny; ++y) {
            for (std::int64_t x = 0; x < d.nx; ++x) {
                const auto i = ph.volume.index(x, y, z);
                const auto n = normalized(x * s.sx, y * s.sy, z * s.sz);
                const bool lung = n[0] * n[0] + n[1] * n[1] + n[2] * n[2] <= 1.0;
                const double noise = spec.noise_hu * rng.normal();
                if (!lung && !spec.embedded) {
                    ph.volume[i] = static_cast<float>(spec.outside_hu + noise);
                    continue;
                }
                ph.lung[i] = lung;
                ph.volume[i] = static_cast<float>(spec.background_hu + noise);
                for (std::size_t k = 0; k < spec.patterns.size(); ++k) {
                    if (in_family(spec.patterns[k].family, n[0], n[1], n[2])) {
                        zone[i] = static_cast<std::uint8_t>(k + 1);
                        if (lung) {
                            ph.planted[i] = zone[i];
                            ++zone_count[k];
                        }
                        break;
                    }
                }
            }
        }
    }

    const double voxel_mm3 = s.sx * s.sy * s.sz;
    const double min_axis = std::min({axes[0], axes[1], axes[2]});
    for (std::size_t k = 0; k < spec.patterns.size(); ++k) {
        const auto& p = spec.patterns[k];
        const double blob_mm3 = 4.0 / 3.0 * std::numbers::pi * std::pow(p.blob_radius_mm, 3);
        if (zone_count[k] == 0 || static_cast<double>(zone_count[k]) * voxel_mm3 < blob_mm3 ||
            p.blob_radius_mm >= 0.5 * min_axis) {
            throw std::invalid_argument("pattern " + std::to_string(k) + " blobs cannot fit in zone " +
                                        to_string(p.family));
        }
        const auto label = static_cast<std::uint8_t>(k + 1);
        // Boolean model: coverage f needs intensity -ln(1 - f) per blob volume.
        const double f = std::min(p.blob_density, 0.999);
        const double intensity = -std::log(1.0 - f) / blob_mm3;
        const double box_mm3 = static_cast<double>(d.count()) * voxel_mm3;
        const auto n_blobs = rng.poisson(intensity * box_mm3);
        const auto rx = static_cast<std::int64_t>(std::ceil(p.blob_radius_mm / s.sx));
        const auto ry = static_cast<std::int64_t>(std::ceil(p.blob_radius_mm / s.sy));
        const auto rz = static_cast<std::int64_t>(std::ceil(p.blob_radius_mm / s.sz));
        const double r2 = p.blob_radius_mm * p.blob_radius_mm;
        for (std::uint64_t b = 0; b < n_blobs; ++b) {
            const double bx = rng.uniform(0.0, d.nx * s.sx) - 0.5 * s.sx;
            const double by = rng.uniform(0.0, d.ny * s.sy) - 0.5 * s.sy;
            const double bz = rng.uniform(0.0, d.nz * s.sz) - 0.5 * s.sz;
            const Voxel c{std::llround(bx / s.sx), std::llround(by / s.sy), std::llround(bz / s.sz)};
            if (!zone.contains(c) || zone(c) != label) continue;
            for (std::int64_t z = c.z - rz; z <= c.z + rz; ++z) {
                for (std::int64_t y = c.y - ry; y <= c.y + ry; ++y) {
                    for (std::int64_t x = c.x - rx; x <= c.x + rx; ++x) {
                        if (!zone.contains(x, y, z)) continue;
                        const double dx = x * s.sx - bx, dy = y * s.sy - by, dz = z * s.sz - bz;
                        if (dx * dx + dy * dy + dz * dz > r2) continue;
                        const auto i = ph.volume.index(x, y, z);
                        if (zone[i] != label) continue;
                        ph.volume[i] = static_cast<float>(p.mean_hu + spec.noise_hu * rng.normal());
                    }
                }
            }
        }
    }
    return ph;
}

PhantomSpec three_pattern_spec(Dims dims, Spacing spacing, std::uint64_t seed) {
    PhantomSpec spec;
    spec.dims = dims;
    spec.spacing = spacing;
    spec.seed = seed;
    spec.embedded = true;
    spec.patterns = {
        {-1000.0f, 1.5, 0.30, RegionFamily::Apical},
        {-975.0f, 1.5, 0.60, RegionFamily::MidLevel},
        {-930.0f, 1.5, 0.999, RegionFamily::Basal},
    };
    return spec;
}

}  // namespace sltp
