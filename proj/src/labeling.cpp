#include "sltp/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "sltp/features.hpp"
#include "sltp/parallel.hpp"
#include "sltp/random.hpp"

namespace sltp {

std::uint8_t encode_label(int pattern) {
    if (pattern == kNoEmphysema) return kNoEmphysemaLabel;
    if (pattern < 0 || pattern > 253) throw std::out_of_range("label does not fit in UINT8");
    return static_cast<std::uint8_t>(pattern + 2);
}

int decode_label(std::uint8_t value) {
    if (value == kBackgroundLabel) throw std::invalid_argument("background voxel has no label");
    return value == kNoEmphysemaLabel ? kNoEmphysema : value - 2;
}

int assign_pattern(const RoiRecord& roi, const PatternModel& model) {
    if (model.patterns.empty()) throw std::invalid_argument("assign_pattern: empty model");
    int best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < model.patterns.size(); ++k) {
        const double c = mixed_cost(roi, model.patterns[k], model.lambda, model.W);
        if (c < best_cost) {
            best_cost = c;
            best = static_cast<int>(k);
        }
    }
    return best;
}

LabelMask label_scan(const LabelInputs& in, const PatternModel& model, const TextonCodebook& codebook,
                     const SursParams& surs, int threads) {
    const auto centers = surs_sample(in.lung, surs);
    if (centers.empty()) throw std::runtime_error("label_scan: no sampled centers inside the lung");
    const auto shape = roi_shape(in.lung.spacing(), surs.roi_size_mm);
    const auto rois =
        extract_rois(in.volume, in.lung, in.emph950, in.emph_alt, in.field, codebook, centers, shape, 0, 0, threads);
    return fill_labels(in.lung, label_centers(rois, model), threads);
}

std::vector<LabeledCenter> label_centers(std::span<const RoiRecord> rois, const PatternModel& model) {
    std::vector<LabeledCenter> out(rois.size());
    for (std::size_t c = 0; c < rois.size(); ++c) {
        out[c].center = rois[c].center;
        out[c].pattern = rois[c].retained ? assign_pattern(rois[c], model) : kNoEmphysema;
    }
    return out;
}

LabelMask fill_labels(const Mask3D& lung, std::vector<LabeledCenter> centers, int threads) {
    if (centers.empty()) throw std::runtime_error("fill_labels: no sampled centers");
    LabelMask out{Mask3D(lung.dims(), lung.spacing(), 0), Mask3D(lung.dims(), lung.spacing(), 0), std::move(centers)};
    const auto& s = lung.spacing();
    const auto& d = lung.dims();
    std::vector<std::uint8_t> code(out.centers.size());
    for (std::size_t c = 0; c < code.size(); ++c) code[c] = encode_label(out.centers[c].pattern);
    parallel_for(static_cast<std::size_t>(d.nz), threads, [&](std::size_t zi) {
        const auto z = static_cast<std::int64_t>(zi);
        for (std::int64_t y = 0; y < d.ny; ++y) {
            for (std::int64_t x = 0; x < d.nx; ++x) {
                const auto i = lung.index(x, y, z);
                if (!lung[i]) continue;
                std::size_t best = 0;
                double best_d = std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < out.centers.size(); ++c) {
                    const auto& v = out.centers[c].center;
                    const double dx = (v.x - x) * s.sx, dy = (v.y - y) * s.sy, dz = (v.z - z) * s.sz;
                    const double dd = dx * dx + dy * dy + dz * dz;
                    if (dd < best_d) {
                        best_d = dd;
                        best = c;
                    }
                }
                out.labels[i] = code[best];
                out.provenance[i] = best_d == 0.0 ? 1 : 2;
            }
        }
    });
    return out;
}

std::vector<double> signature(const Mask3D& labels, const Mask3D& lung, std::size_t n_patterns) {
    if (!labels.same_grid(lung)) throw std::invalid_argument("signature: grid mismatch");
    std::vector<double> h(n_patterns + 1, 0.0);
    std::size_t n = 0;
    for (std::size_t i = 0; i < lung.size(); ++i) {
        if (!lung[i]) continue;
        const int p = decode_label(labels[i]);
        const auto slot = static_cast<std::size_t>(p + 1);
        if (slot >= h.size()) throw std::out_of_range("signature: label beyond pattern count");
        h[slot] += 1.0;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("signature: empty lung");
    for (double& v : h) v /= static_cast<double>(n);
    return h;
}

std::vector<double> combine_signatures(std::span<const std::vector<double>> sigs,
                                       std::span<const std::size_t> voxels) {
    if (sigs.empty() || sigs.size() != voxels.size()) throw std::invalid_argument("combine_signatures: bad input");
    std::vector<double> out(sigs.front().size(), 0.0);
    double total = 0.0;
    for (std::size_t s = 0; s < sigs.size(); ++s) {
        if (sigs[s].size() != out.size()) throw std::invalid_argument("combine_signatures: length mismatch");
        const double w = static_cast<double>(voxels[s]);
        total += w;
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * sigs[s][k];
    }
    if (total <= 0.0) throw std::invalid_argument("combine_signatures: zero voxels");
    for (double& v : out) v /= total;
    return out;
}

DensityProjection density_projection(std::span<const DensitySample> pool, std::size_t n_patterns,
                                     const DensityOptions& o) {
    if (pool.empty()) throw std::invalid_argument("density_projection: empty label pool");
    if (o.n_r == 0 || o.grid_r == 0 || o.grid_phi == 0) throw std::invalid_argument("density_projection: empty grid");
    std::vector<std::vector<std::size_t>> bins(o.n_r);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool[i].pattern < 0 || static_cast<std::size_t>(pool[i].pattern) >= n_patterns)
            throw std::invalid_argument("density_projection: pattern out of range");
        const double t = std::floor(pool[i].r * static_cast<double>(o.n_r));
        const auto b = static_cast<std::size_t>(std::clamp(t, 0.0, static_cast<double>(o.n_r - 1)));
        bins[b].push_back(i);
    }
    std::vector<std::size_t> chosen;
    const double r_last = (static_cast<double>(o.n_r) - 0.5) / static_cast<double>(o.n_r);
    for (std::size_t b = 0; b < o.n_r; ++b) {
        auto& members = bins[b];
        const double alpha = ((static_cast<double>(b) + 0.5) / static_cast<double>(o.n_r)) / r_last;
        const auto target =
            std::min(members.size(), static_cast<std::size_t>(std::llround(alpha * static_cast<double>(o.n_iso))));
        Rng rng(stream_seed(o.seed, "isovolume", b));
        for (std::size_t i = 0; i < target; ++i)
            std::swap(members[i], members[i + rng.below(members.size() - i)]);
        members.resize(target);
        std::sort(members.begin(), members.end());
        chosen.insert(chosen.end(), members.begin(), members.end());
    }
    std::sort(chosen.begin(), chosen.end());

    DensityProjection out;
    out.grid_r = o.grid_r;
    out.grid_phi = o.grid_phi;
    out.n_patterns = n_patterns;
    const std::size_t cells = o.grid_r * o.grid_phi;
    out.cell_count.assign(cells, 0);
    out.pattern_count.assign(n_patterns * cells, 0);
    out.pattern_total.assign(n_patterns, 0);
    std::vector<std::size_t> point_cell;
    constexpr double pi = std::numbers::pi;
    for (auto i : chosen) {
        const auto& s = pool[i];
        const double y = s.r * std::cos(s.phi) * std::sin(s.theta);
        const double z = s.r * std::sin(s.phi);
        DensityPoint p{std::hypot(y, z), std::atan2(z, y), s.pattern, 0.0};
        const auto ir = static_cast<std::size_t>(
            std::clamp(std::floor(p.r_prime * static_cast<double>(o.grid_r)), 0.0, static_cast<double>(o.grid_r - 1)));
        const auto ip = static_cast<std::size_t>(std::clamp(std::floor((p.phi_prime + pi) / (2.0 * pi) * o.grid_phi),
                                                            0.0, static_cast<double>(o.grid_phi - 1)));
        const auto c = out.cell(ir, ip);
        ++out.cell_count[c];
        ++out.pattern_count[static_cast<std::size_t>(s.pattern) * cells + c];
        ++out.pattern_total[static_cast<std::size_t>(s.pattern)];
        out.points.push_back(p);
        point_cell.push_back(c);
    }
    const double n = static_cast<double>(out.points.size());
    out.density.assign(n_patterns * cells, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < n_patterns; ++k) {
        for (std::size_t c = 0; c < cells; ++c) {
            if (out.cell_count[c] == 0) continue;
            const double pk = out.pattern_total[k]
                                  ? static_cast<double>(out.pattern_count[k * cells + c]) / out.pattern_total[k]
                                  : 0.0;
            out.density[k * cells + c] = pk / (static_cast<double>(out.cell_count[c]) / n);
        }
    }
    for (std::size_t j = 0; j < out.points.size(); ++j)
        out.points[j].density = out.density[static_cast<std::size_t>(out.points[j].pattern) * cells + point_cell[j]];
    return out;
}

}  // namespace sltp
