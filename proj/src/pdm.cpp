#include "sltp/pdm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "sltp/parallel.hpp"

namespace sltp {

namespace {

constexpr std::int64_t kOffsets[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                         {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};

// Compressed stencil over mask voxels: neighbor slots hold an index into the
// unknown vector, or -1 for a background / out-of-volume neighbor.
struct Stencil {
    std::vector<std::size_t> grid_index;
    std::vector<std::array<std::int64_t, 6>> neighbors;
    std::vector<double> diagonal;
    std::array<double, 6> weight{};
    std::size_t red_count = 0;  // unknowns [0, red_count) have even parity
};

Stencil build_stencil(const Mask3D& mask, DirichletPlacement boundary) {
    const auto& d = mask.dims();
    const auto& s = mask.spacing();
    Stencil st;
    const double ax = 1.0 / (s.sx * s.sx), ay = 1.0 / (s.sy * s.sy), az = 1.0 / (s.sz * s.sz);
    st.weight = {ax, ax, ay, ay, az, az};

    std::vector<std::int64_t> slot(mask.size(), -1);
    for (int parity = 0; parity < 2; ++parity) {
        for (std::int64_t z = 0; z < d.nz; ++z)
            for (std::int64_t y = 0; y < d.ny; ++y)
                for (std::int64_t x = 0; x < d.nx; ++x) {
                    const auto i = mask.index(x, y, z);
                    if (!mask[i] || ((x + y + z) & 1) != parity) continue;
                    slot[i] = static_cast<std::int64_t>(st.grid_index.size());
                    st.grid_index.push_back(i);
                }
        if (parity == 0) st.red_count = st.grid_index.size();
    }
    const std::size_t n = st.grid_index.size();
    st.neighbors.resize(n);
    st.diagonal.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const auto v = mask.voxel(st.grid_index[k]);
        double diag = 0.0;
        for (int j = 0; j < 6; ++j) {
            const std::int64_t x = v.x + kOffsets[j][0], y = v.y + kOffsets[j][1], z = v.z + kOffsets[j][2];
            std::int64_t nb = -1;
            if (mask.contains(x, y, z)) nb = slot[mask.index(x, y, z)];
            st.neighbors[k][j] = nb;
            diag += st.weight[j];
            if (nb < 0 && boundary == DirichletPlacement::VoxelFace) diag += st.weight[j];
        }
        st.diagonal[k] = diag;
    }
    return st;
}

double stencil_residual(const Stencil& st, const std::vector<double>& u, std::size_t k) {
    double acc = 1.0 - st.diagonal[k] * u[k];
    for (int j = 0; j < 6; ++j) {
        const auto nb = st.neighbors[k][j];
        if (nb >= 0) acc += st.weight[j] * u[static_cast<std::size_t>(nb)];
    }
    return acc;
}

double max_residual(const Stencil& st, const std::vector<double>& u, int threads) {
    const std::size_t n = u.size();
    const std::size_t blocks = std::min<std::size_t>(n, 64);
    std::vector<double> partial(blocks, 0.0);
    parallel_for(blocks, threads, [&](std::size_t b) {
        const std::size_t begin = n * b / blocks, end = n * (b + 1) / blocks;
        double m = 0.0;
        for (std::size_t k = begin; k < end; ++k) m = std::max(m, std::abs(stencil_residual(st, u, k)));
        partial[b] = m;
    });
    double m = 0.0;
    for (double p : partial) m = std::max(m, p);
    return m;
}

}  // namespace

PoissonResult solve_poisson(const Mask3D& mask, const PoissonOptions& options) {
    const auto st = build_stencil(mask, options.boundary);
    const std::size_t n = st.grid_index.size();
    if (n == 0) throw std::invalid_argument("solve_poisson: empty mask");

    double omega = options.omega;
    if (omega <= 0.0) {
        const auto& d = mask.dims();
        std::int64_t lo[3] = {d.nx, d.ny, d.nz}, hi[3] = {-1, -1, -1};
        for (auto gi : st.grid_index) {
            const auto v = mask.voxel(gi);
            lo[0] = std::min(lo[0], v.x), hi[0] = std::max(hi[0], v.x);
            lo[1] = std::min(lo[1], v.y), hi[1] = std::max(hi[1], v.y);
            lo[2] = std::min(lo[2], v.z), hi[2] = std::max(hi[2], v.z);
        }
        const auto extent = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]}) + 1;
        omega = 2.0 / (1.0 + std::sin(std::numbers::pi / static_cast<double>(extent + 1)));
    }

    std::vector<double> u(n, 0.0);
    const int threads = std::max(1, options.threads);
    auto sweep_color = [&](std::size_t begin, std::size_t end) {
        const std::size_t count = end - begin;
        const std::size_t blocks = std::min<std::size_t>(count, static_cast<std::size_t>(threads) * 4);
        parallel_for(blocks, threads, [&](std::size_t b) {
            const std::size_t lo = begin + count * b / blocks, hi = begin + count * (b + 1) / blocks;
            for (std::size_t k = lo; k < hi; ++k) {
                double acc = 1.0;
                for (int j = 0; j < 6; ++j) {
                    const auto nb = st.neighbors[k][j];
                    if (nb >= 0) acc += st.weight[j] * u[static_cast<std::size_t>(nb)];
                }
                const double gs = acc / st.diagonal[k];
                u[k] += omega * (gs - u[k]);
            }
        });
    };

    PoissonResult result;
    result.residual = std::numeric_limits<double>::infinity();
    int it = 0;
    while (it < options.max_iter) {
        sweep_color(0, st.red_count);
        sweep_color(st.red_count, n);
        ++it;
        if (it % std::max(1, options.check_every) == 0 || it == options.max_iter) {
            result.residual = max_residual(st, u, threads);
            if (result.residual < options.tol) {
                result.converged = true;
                break;
            }
        }
    }
    result.iterations = it;

    result.u = Volume<double>(mask.dims(), mask.spacing(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        result.u[st.grid_index[k]] = u[k];
        result.max_value = std::max(result.max_value, u[k]);
    }
    return result;
}

double poisson_residual(const Mask3D& mask, const Volume<double>& u, DirichletPlacement boundary) {
    const auto st = build_stencil(mask, boundary);
    std::vector<double> packed(st.grid_index.size());
    for (std::size_t k = 0; k < packed.size(); ++k) packed[k] = u[st.grid_index[k]];
    return max_residual(st, packed, 1);
}

Volume3D normalize_to_unit_max(const PoissonResult& result) {
    Volume3D out(result.u.dims(), result.u.spacing(), 0.0f);
    if (result.max_value <= 0.0) return out;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(result.u[i] / result.max_value);
    return out;
}

std::vector<double> slice_maxima(const Volume3D& field, const Mask3D& mask) {
    const auto& d = mask.dims();
    std::vector<double> out(static_cast<std::size_t>(d.nz), 0.0);
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x) {
                const auto i = mask.index(x, y, z);
                if (mask[i]) out[z] = std::max(out[z], static_cast<double>(field[i]));
            }
    return out;
}

std::vector<double> cumulative_volume(const Mask3D& mask) {
    const auto& d = mask.dims();
    std::vector<double> counts(static_cast<std::size_t>(d.nz), 0.0);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) counts[static_cast<std::size_t>(mask.voxel(i).z)] += 1.0;
    double total = 0.0;
    for (double c : counts) total += c;
    if (total == 0.0) throw std::invalid_argument("cumulative_volume: empty mask");
    double run = 0.0;
    for (auto& c : counts) {
        run += c;
        c = run / total;
    }
    return counts;
}

std::size_t volume_slice(std::span<const double> cum_volume, double fraction) {
    for (std::size_t i = 0; i < cum_volume.size(); ++i)
        if (cum_volume[i] >= fraction - 1e-12) return i;
    throw std::invalid_argument("volume_slice: fraction not reached");
}

Volume3D per_slice_normalize(const Volume3D& u3d, const Mask3D& mask) {
    const auto smax = slice_maxima(u3d, mask);
    Volume3D out(u3d.dims(), u3d.spacing(), 0.0f);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!mask[i]) continue;
        const double m = smax[static_cast<std::size_t>(mask.voxel(i).z)];
        out[i] = m > 0.0 ? static_cast<float>(u3d[i] / m) : 0.0f;
    }
    return out;
}

ReferenceSlices reference_slices(std::span<const double> slice_max, std::span<const double> cum_volume) {
    if (slice_max.empty()) throw std::invalid_argument("reference_slices: empty profile");
    if (std::none_of(slice_max.begin(), slice_max.end(), [](double v) { return v > 0.0; }))
        throw std::invalid_argument("reference_slices: no slice with positive maximum");
    if (cum_volume.size() != slice_max.size())
        throw std::invalid_argument("reference_slices: profile length mismatch");

    const std::size_t n = slice_max.size();
    ReferenceSlices out;
    // Running maxima make both predicates O(n): x qualifies from above iff it
    // strictly exceeds the maximum of all earlier slices.
    double above = -std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < n; ++x) {
        if (slice_max[x] > above) out.apical_candidate = x;
        above = std::max(above, slice_max[x]);
    }
    double below = -std::numeric_limits<double>::infinity();
    for (std::size_t k = n; k-- > 0;) {
        if (slice_max[k] > below) out.basal_candidate = k;
        below = std::max(below, slice_max[k]);
    }
    out.upper = std::min(volume_slice(cum_volume, 0.25), out.apical_candidate);
    out.lower = std::max(volume_slice(cum_volume, 0.75), out.basal_candidate);
    return out;
}

Volume3D modify_pdm(const Volume3D& u3d, const Volume3D& u2d, const Mask3D& mask, std::size_t upper,
                    std::size_t lower, std::span<const double> slice_max) {
    if (upper > lower) throw std::invalid_argument("modify_pdm: i_u > i_d");
    if (upper >= slice_max.size() || lower >= slice_max.size())
        throw std::invalid_argument("modify_pdm: reference slice out of range");
    const double top = slice_max[upper], bottom = slice_max[lower];
    if (!(top > 0.0) || !(bottom > 0.0))
        throw std::invalid_argument("modify_pdm: zero maximum at a reference slice");
    Volume3D out(u3d.dims(), u3d.spacing(), 0.0f);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!mask[i]) continue;
        const auto z = static_cast<std::size_t>(mask.voxel(i).z);
        double v;
        if (z < upper) v = u3d[i] / top;
        else if (z > lower) v = u3d[i] / bottom;
        else v = u2d[i];
        out[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return out;
}

Voxel find_core(const Volume3D& umod, const Mask3D& mask, std::span<const double> cum_volume) {
    const auto z = static_cast<std::int64_t>(volume_slice(cum_volume, 0.5));
    const auto& d = mask.dims();
    const auto& s = mask.spacing();
    double smax = -1.0, cx = 0.0, cy = 0.0;
    std::size_t count = 0;
    for (std::int64_t y = 0; y < d.ny; ++y)
        for (std::int64_t x = 0; x < d.nx; ++x) {
            if (!mask(x, y, z)) continue;
            smax = std::max(smax, static_cast<double>(umod(x, y, z)));
            cx += x * s.sx;
            cy += y * s.sy;
            ++count;
        }
    if (count == 0) throw std::invalid_argument("find_core: 50% volume slice is empty");
    cx /= static_cast<double>(count);
    cy /= static_cast<double>(count);

    Voxel best{-1, -1, z};
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::int64_t y = 0; y < d.ny; ++y)
        for (std::int64_t x = 0; x < d.nx; ++x) {
            if (!mask(x, y, z) || umod(x, y, z) < smax - kCoreEpsilon) continue;
            const double dx = x * s.sx - cx, dy = y * s.sy - cy;
            const double d2 = dx * dx + dy * dy;
            if (d2 < best_d2 - 1e-9) {
                best_d2 = d2;
                best = {x, y, z};
            }
        }
    return best;
}

PdmField compute_pdm(const Mask3D& mask, const PoissonOptions& options) {
    PdmField f;
    const auto solved = solve_poisson(mask, options);
    f.solver_iterations = solved.iterations;
    f.solver_residual = solved.residual;
    f.solver_converged = solved.converged;
    f.u3d = normalize_to_unit_max(solved);
    f.u2d = per_slice_normalize(f.u3d, mask);
    f.slice_max = slice_maxima(f.u3d, mask);
    f.cum_volume = cumulative_volume(mask);
    f.slices = reference_slices(f.slice_max, f.cum_volume);
    f.umod = modify_pdm(f.u3d, f.u2d, mask, f.slices.upper, f.slices.lower, f.slice_max);
    f.core = find_core(f.umod, mask, f.cum_volume);
    return f;
}

}  // namespace sltp
