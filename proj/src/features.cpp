#include "sltp/features.hpp"

#include <stdexcept>

#include "sltp/parallel.hpp"

namespace sltp {

double chi2_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("chi2_distance: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0) throw std::invalid_argument("chi2_distance: negative entry");
        const double den = p[i] + q[i];
        if (den == 0.0) continue;
        const double d = p[i] - q[i];
        s += d * d / den;
    }
    return 0.5 * s;
}

int center_subregion(const Voxel& c, const PdcmField& field) {
    if (!field.lung.contains(c) || !field.lung(c)) throw std::invalid_argument("spatial_feature: center outside lung");
    const auto i = field.lung.index(c);
    return subregion_index(field.r[i], field.theta[i], field.phi[i]);
}

std::array<double, kSubregions> spatial_feature(const Voxel& c, const PdcmField& field) {
    return subregion_onehot(center_subregion(c, field));
}

double spatial_distance(int subregion, std::span<const double> c) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double d = (static_cast<int>(i) == subregion ? 1.0 : 0.0) - c[i];
        s += d * d;
    }
    return s;
}

std::vector<RoiRecord> extract_rois(const Volume3D& v, const Mask3D& lung, const Mask3D& emph950,
                                    const Mask3D* emph_alt, const PdcmField& field, const TextonCodebook& codebook,
                                    std::span<const Voxel> centers, const RoiShape& shape, int scan, int lung_id,
                                    int threads) {
    std::vector<RoiRecord> out(centers.size());
    parallel_for(centers.size(), threads, [&](std::size_t i) {
        auto& r = out[i];
        r.center = centers[i];
        r.scan = scan;
        r.lung = lung_id;
        const auto g = gate_roi(centers[i], shape, emph950, emph_alt, lung);
        r.frac950 = g.frac950;
        r.frac_alt = g.frac_alt;
        r.retained = g.retained;
        r.subregion = center_subregion(centers[i], field);
        r.texture = texture_feature(v, centers[i], shape, codebook);
    });
    return out;
}

}  // namespace sltp
