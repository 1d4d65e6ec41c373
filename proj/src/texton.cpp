#include "sltp/texton.hpp"

#include <stdexcept>

#include "sltp/kmeans.hpp"
#include "sltp/random.hpp"

namespace sltp {

namespace {

void read_patch(const Volume3D& v, std::int64_t x0, std::int64_t y0, std::int64_t z0, double* out) {
    int t = 0;
    for (std::int64_t z = z0; z < z0 + kPatchEdge; ++z)
        for (std::int64_t y = y0; y < y0 + kPatchEdge; ++y)
            for (std::int64_t x = x0; x < x0 + kPatchEdge; ++x) out[t++] = v(x, y, z);
}

}  // namespace

std::vector<double> sample_patches(const Volume3D& v, std::span<const Voxel> centers, const RoiShape& shape,
                                   const PatchSampling& o, std::uint64_t first_item) {
    std::vector<double> out;
    double buf[kPatchSize];
    for (std::size_t r = 0; r < centers.size(); ++r) {
        const auto b = roi_box(centers[r], shape, v.dims());
        const std::int64_t nx = b.hi.x - b.lo.x - kPatchEdge + 1;
        const std::int64_t ny = b.hi.y - b.lo.y - kPatchEdge + 1;
        const std::int64_t nz = b.hi.z - b.lo.z - kPatchEdge + 1;
        if (nx <= 0 || ny <= 0 || nz <= 0) continue;
        Rng rng(stream_seed(o.seed, "patches", first_item + r));
        for (std::size_t j = 0; j < o.per_roi; ++j) {
            const auto x = b.lo.x + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(nx)));
            const auto y = b.lo.y + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(ny)));
            const auto z = b.lo.z + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(nz)));
            read_patch(v, x, y, z, buf);
            out.insert(out.end(), buf, buf + kPatchSize);
        }
    }
    return out;
}

std::vector<double> thin_patches(std::span<const double> patches, std::size_t max_total) {
    const std::size_t n = patches.size() / kPatchSize;
    if (n <= max_total) return {patches.begin(), patches.end()};
    std::vector<double> out;
    out.reserve(max_total * kPatchSize);
    for (std::size_t j = 0; j < max_total; ++j) {
        const std::size_t i = j * n / max_total;
        out.insert(out.end(), patches.begin() + i * kPatchSize, patches.begin() + (i + 1) * kPatchSize);
    }
    return out;
}

TextonCodebook train_texton_codebook(std::span<const double> patches, int k, std::uint64_t seed, int threads,
                                     int max_iter) {
    if (k < 1) throw std::invalid_argument("texton codebook: K must be at least 1");
    if (patches.size() % kPatchSize != 0) throw std::invalid_argument("texton codebook: ragged patch list");
    if (patches.size() / kPatchSize < static_cast<std::size_t>(k))
        throw std::invalid_argument("texton codebook: fewer patches than textons");
    KMeansOptions o;
    o.k = k;
    o.seed = stream_seed(seed, "textons");
    o.threads = threads;
    o.max_iter = max_iter;
    o.refine = false;
    auto r = kmeans(patches, kPatchSize, o);
    return {k, std::move(r.centroids), seed, r.objective};
}

std::vector<double> texture_feature(const Volume3D& v, const Voxel& center, const RoiShape& shape,
                                    const TextonCodebook& codebook) {
    if (codebook.k < 1) throw std::invalid_argument("texture_feature: empty codebook");
    const auto b = roi_box(center, shape, v.dims());
    if (b.hi.x - b.lo.x < kPatchEdge || b.hi.y - b.lo.y < kPatchEdge || b.hi.z - b.lo.z < kPatchEdge)
        throw std::invalid_argument("texture_feature: ROI too small for one patch");
    std::vector<double> hist(static_cast<std::size_t>(codebook.k), 0.0);
    double buf[kPatchSize];
    std::size_t n = 0;
    for (std::int64_t z = b.lo.z; z + kPatchEdge <= b.hi.z; ++z) {
        for (std::int64_t y = b.lo.y; y + kPatchEdge <= b.hi.y; ++y) {
            for (std::int64_t x = b.lo.x; x + kPatchEdge <= b.hi.x; ++x) {
                read_patch(v, x, y, z, buf);
                hist[static_cast<std::size_t>(nearest_centroid({buf, kPatchSize}, codebook.textons, kPatchSize))] +=
                    1.0;
                ++n;
            }
        }
    }
    for (double& h : hist) h /= static_cast<double>(n);
    return hist;
}

}  // namespace sltp
