// Squared-error K-means over row-major point sets with k-means++ seeding.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sltp {

struct KMeansOptions {
    int k = 1;
    int max_iter = 300;
    int n_init = 1;
    std::uint64_t seed = 0;
    int threads = 1;
    /// Single-point exchange moves after Lloyd converges (Hartigan refinement).
    bool refine = true;
};

struct KMeansResult {
    std::size_t dim = 0;
    std::vector<double> centroids;  // k x dim
    std::vector<int> labels;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    int repaired = 0;  // empty clusters reseeded

    std::span<const double> centroid(std::size_t j) const { return {centroids.data() + j * dim, dim}; }
};

double squared_distance(std::span<const double> a, std::span<const double> b);

/// Index of the nearest centroid; ties go to the lowest index.
int nearest_centroid(std::span<const double> x, std::span<const double> centroids, std::size_t dim);

/// Throws when there are fewer points than clusters. Empty clusters are
/// reseeded from the point farthest from its centroid.
KMeansResult kmeans(std::span<const double> points, std::size_t dim, const KMeansOptions& options);

}  // namespace sltp
