#include "sltp/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sltp/random.hpp"

namespace sltp {

void validate(const SursParams& p) {
    if (!(p.roi_size_mm > 0.0)) throw std::invalid_argument("roi_size_mm must be positive");
    if (p.beta2 < 1) throw std::invalid_argument("beta2 must be at least 1");
    if (!(p.beta1_mm >= 0.0)) throw std::invalid_argument("beta1 must be nonnegative");
}

RoiShape roi_shape(const Spacing& s, double roi_size_mm) {
    auto edge = [&](double sp) { return std::max<std::int64_t>(1, std::llround(roi_size_mm / sp)); };
    return {edge(s.sx), edge(s.sy), edge(s.sz)};
}

Box roi_box(const Voxel& c, const RoiShape& shape, const Dims& d) {
    auto axis = [](std::int64_t center, std::int64_t edge, std::int64_t n, std::int64_t& lo, std::int64_t& hi) {
        lo = std::clamp<std::int64_t>(center - edge / 2, 0, n);
        hi = std::clamp<std::int64_t>(center - edge / 2 + edge, 0, n);
    };
    Box b;
    axis(c.x, shape.ex, d.nx, b.lo.x, b.hi.x);
    axis(c.y, shape.ey, d.ny, b.lo.y, b.hi.y);
    axis(c.z, shape.ez, d.nz, b.lo.z, b.hi.z);
    return b;
}

std::vector<Voxel> surs_sample(const Mask3D& lung, const SursParams& p) {
    validate(p);
    const auto& d = lung.dims();
    Voxel lo{d.nx, d.ny, d.nz}, hi{-1, -1, -1};
    for (std::size_t i = 0; i < lung.size(); ++i) {
        if (!lung[i]) continue;
        const auto v = lung.voxel(i);
        lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
        hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
    }
    if (hi.x < 0) throw std::invalid_argument("surs_sample: empty lung mask");

    const auto shape = roi_shape(lung.spacing(), p.roi_size_mm);
    const std::int64_t nsx = (hi.x - lo.x) / shape.ex + 1;
    const std::int64_t nsy = (hi.y - lo.y) / shape.ey + 1;
    const std::int64_t nsz = (hi.z - lo.z) / shape.ez + 1;
    const auto& s = lung.spacing();
    const double edge_mm[3] = {shape.ex * s.sx, shape.ey * s.sy, shape.ez * s.sz};
    // Generalized golden ratio for three dimensions.
    constexpr double g = 1.22074408460575947536;
    const double alpha[3] = {1.0 / g, 1.0 / (g * g), 1.0 / (g * g * g)};

    std::vector<Voxel> centers;
    for (std::int64_t kz = 0; kz < nsz; ++kz) {
        for (std::int64_t ky = 0; ky < nsy; ++ky) {
            for (std::int64_t kx = 0; kx < nsx; ++kx) {
                const auto stack_id = static_cast<std::uint64_t>(kx + nsx * (ky + nsy * kz));
                Rng rng(stream_seed(p.seed, "surs", stack_id));
                double shift[3];
                for (double& v : shift) v = rng.uniform(0.0, p.beta1_mm);
                const std::int64_t origin[3] = {lo.x + kx * shape.ex, lo.y + ky * shape.ey, lo.z + kz * shape.ez};
                const double sp[3] = {s.sx, s.sy, s.sz};
                const std::int64_t edge[3] = {shape.ex, shape.ey, shape.ez};
                for (int j = 0; j < p.beta2; ++j) {
                    std::int64_t c[3];
                    for (int a = 0; a < 3; ++a) {
                        double t = shift[a] / edge_mm[a] + (j + 0.5) * alpha[a];
                        t -= std::floor(t);
                        const auto off = std::min<std::int64_t>(
                            static_cast<std::int64_t>(std::floor(t * edge_mm[a] / sp[a])), edge[a] - 1);
                        c[a] = origin[a] + off;
                    }
                    const Voxel v{c[0], c[1], c[2]};
                    if (lung.contains(v) && lung(v)) centers.push_back(v);
                }
            }
        }
    }
    return centers;
}

GateResult gate_roi(const Voxel& center, const RoiShape& shape, const Mask3D& emph950, const Mask3D* emph_alt,
                    const Mask3D& lung) {
    if (!emph950.same_grid(lung) || (emph_alt && !emph_alt->same_grid(lung)))
        throw std::invalid_argument("gate_roi: mask grids differ");
    const auto b = roi_box(center, shape, lung.dims());
    std::size_t n = 0, a = 0, c = 0;
    for (std::int64_t z = b.lo.z; z < b.hi.z; ++z) {
        for (std::int64_t y = b.lo.y; y < b.hi.y; ++y) {
            for (std::int64_t x = b.lo.x; x < b.hi.x; ++x) {
                const auto i = lung.index(x, y, z);
                if (!lung[i]) continue;
                ++n;
                a += emph950[i] ? 1 : 0;
                if (emph_alt) c += (*emph_alt)[i] ? 1 : 0;
            }
        }
    }
    if (n == 0) throw std::invalid_argument("gate_roi: ROI cube does not intersect the lung");
    GateResult g;
    g.frac950 = static_cast<double>(a) / static_cast<double>(n);
    g.frac_alt = emph_alt ? static_cast<double>(c) / static_cast<double>(n) : g.frac950;
    g.retained = g.frac950 > kEmphysemaGate && g.frac_alt > kEmphysemaGate;
    return g;
}

}  // namespace sltp
