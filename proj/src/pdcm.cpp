#include "sltp/pdcm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace sltp {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kHalfPi = 0.5 * std::numbers::pi;

std::size_t azimuth_cell(double theta, std::size_t n) {
    auto b = static_cast<std::int64_t>(std::floor(static_cast<double>(n) * theta / kTwoPi));
    const auto nn = static_cast<std::int64_t>(n);
    b %= nn;
    if (b < 0) b += nn;
    return static_cast<std::size_t>(b);
}

std::size_t clamped_cell(double t, std::size_t n) {
    const double b = std::floor(static_cast<double>(n) * t);
    if (b < 0.0) return 0;
    return std::min(static_cast<std::size_t>(b), n - 1);
}

std::vector<double> midpoints(std::size_t n, double lo, double hi) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * (static_cast<double>(i) + 0.5) / n;
    return out;
}
}  // namespace

std::string to_string(LungSide side) { return side == LungSide::Right ? "right" : "left"; }

PdcmField assign_coordinates(const Volume3D& umod, const Voxel& core, const Mask3D& lung, LungSide side) {
    if (!umod.same_grid(lung)) throw std::invalid_argument("assign_coordinates: grid mismatch");
    if (!lung.contains(core) || !lung(core)) throw std::invalid_argument("assign_coordinates: core outside mask");
    const auto& s = lung.spacing();
    PdcmField f{Volume3D(lung.dims(), s, 0.0f), Volume3D(lung.dims(), s, 0.0f),
                Volume3D(lung.dims(), s, 0.0f), lung, core, side};
    for (std::size_t i = 0; i < lung.size(); ++i) {
        if (!lung[i]) continue;
        const auto v = lung.voxel(i);
        const double dx = (v.x - core.x) * s.sx;
        const double dy = (v.y - core.y) * s.sy;
        const double dz_apex = -(v.z - core.z) * s.sz;  // slice index grows away from the apex
        double theta = std::atan2(dy, dx);
        if (theta < 0.0) theta += kTwoPi;
        if (theta >= kTwoPi) theta = 0.0;
        const double phi = std::atan2(dz_apex, std::hypot(dx, dy));
        f.r[i] = std::clamp(1.0f - umod[i], 0.0f, 1.0f);
        f.theta[i] = static_cast<float>(theta);
        f.phi[i] = static_cast<float>(phi);
    }
    return f;
}

SubregionBins subregion_bins(double r, double theta, double phi) {
    SubregionBins b;
    b.radial = static_cast<int>(clamped_cell(r, kRadialBins));
    b.azimuth = static_cast<int>(azimuth_cell(theta, kAzimuthBins));
    b.latitude = static_cast<int>(clamped_cell((phi + kHalfPi) / std::numbers::pi, kLatitudeBins));
    b.index = b.radial * (kAzimuthBins * kLatitudeBins) + b.azimuth * kLatitudeBins + b.latitude;
    return b;
}

int subregion_index(double r, double theta, double phi) { return subregion_bins(r, theta, phi).index; }

std::array<double, kSubregions> subregion_onehot(int index) {
    if (index < 0 || index >= kSubregions) throw std::out_of_range("subregion index out of range");
    std::array<double, kSubregions> v{};
    v[static_cast<std::size_t>(index)] = 1.0;
    return v;
}

std::array<std::size_t, kSubregions> subregion_occupancy(const PdcmField& field) {
    std::array<std::size_t, kSubregions> counts{};
    for (std::size_t i = 0; i < field.lung.size(); ++i)
        if (field.lung[i]) ++counts[subregion_index(field.r[i], field.theta[i], field.phi[i])];
    return counts;
}

bool Grid2D::missing(std::size_t r, std::size_t c) const { return std::isnan(at(r, c)); }

std::size_t Grid2D::present_count() const {
    return static_cast<std::size_t>(
        std::count_if(values.begin(), values.end(), [](double v) { return !std::isnan(v); }));
}

Grid2D angular_projection(const Volume3D& v, const PdcmField& field, std::size_t n_theta, std::size_t n_phi) {
    if (!v.same_grid(field.lung)) throw std::invalid_argument("angular_projection: grid mismatch");
    if (n_theta == 0 || n_phi == 0) throw std::invalid_argument("angular_projection: empty grid");
    std::vector<double> sum(n_theta * n_phi, 0.0);
    std::vector<std::size_t> count(n_theta * n_phi, 0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!field.lung[i]) continue;
        const auto a = azimuth_cell(field.theta[i], n_theta);
        const auto b = clamped_cell((field.phi[i] + kHalfPi) / std::numbers::pi, n_phi);
        sum[a * n_phi + b] += v[i];
        ++count[a * n_phi + b];
    }
    Grid2D g{n_theta, n_phi, std::vector<double>(n_theta * n_phi)};
    for (std::size_t k = 0; k < sum.size(); ++k)
        g.values[k] = count[k] ? sum[k] / static_cast<double>(count[k]) : std::numeric_limits<double>::quiet_NaN();
    return g;
}

Grid2D radial_projection(const Volume3D& v, const PdcmField& field, std::size_t n_r) {
    if (!v.same_grid(field.lung)) throw std::invalid_argument("radial_projection: grid mismatch");
    if (n_r == 0) throw std::invalid_argument("radial_projection: n_r must be positive");
    std::vector<double> sum(n_r, 0.0);
    std::vector<std::size_t> count(n_r, 0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!field.lung[i]) continue;
        const auto b = clamped_cell(field.r[i], n_r);
        sum[b] += v[i];
        ++count[b];
    }
    Grid2D g{1, n_r, std::vector<double>(n_r)};
    for (std::size_t k = 0; k < n_r; ++k)
        g.values[k] = count[k] ? sum[k] / static_cast<double>(count[k]) : std::numeric_limits<double>::quiet_NaN();
    return g;
}

Grid2D population_projection(std::span<const Grid2D> projections, const Grid2D& reference) {
    if (projections.empty()) throw std::invalid_argument("population_projection: empty list");
    for (const auto& p : projections)
        if (p.rows != reference.rows || p.cols != reference.cols)
            throw std::invalid_argument("population_projection: shape mismatch");
    Grid2D out{reference.rows, reference.cols, std::vector<double>(reference.values.size())};
    for (std::size_t k = 0; k < out.values.size(); ++k) {
        double sum = 0.0;
        for (const auto& p : projections) sum += p.values[k];
        // NaN propagates through the sum and the subtraction.
        out.values[k] = sum / static_cast<double>(projections.size()) - reference.values[k];
    }
    return out;
}

std::vector<double> theta_midpoints(std::size_t n_theta) { return midpoints(n_theta, 0.0, kTwoPi); }
std::vector<double> phi_midpoints(std::size_t n_phi) { return midpoints(n_phi, -kHalfPi, kHalfPi); }
std::vector<double> radial_midpoints(std::size_t n_r) { return midpoints(n_r, 0.0, 1.0); }

}  // namespace sltp
