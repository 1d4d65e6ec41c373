// LTP similarity graph from leave-one-pattern-out replacement tests, and its
// two-level map-equation partitioning into sLTPs.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sltp/ltp.hpp"

namespace sltp {

/// Dense symmetric n x n matrix.
struct SquareMatrix {
    std::size_t n = 0;
    std::vector<double> v;

    SquareMatrix() = default;
    explicit SquareMatrix(std::size_t n_, double fill = 0.0) : n(n_), v(n_ * n_, fill) {}
    double& operator()(std::size_t i, std::size_t j) { return v[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return v[i * n + j]; }
};

/// counts(i, j) = members of pattern i relabeled to j when i is removed. The
/// relabeling uses the model's lambda * W spatial term and the d_max penalty;
/// ROIs blocked from every pattern are not counted.
SquareMatrix replacement_counts(const PatternModel& model, std::span<const RoiRecord> rois, int threads = 1);

struct SimilarityGraph {
    std::size_t n = 0;
    SquareMatrix counts;
    std::vector<std::size_t> members;
    std::vector<double> ratio;  // sum_j counts(i, j) / N_i
    std::vector<bool> active;   // ratio > eta
    SquareMatrix weights;
    double eta = 0.5;
};

SimilarityGraph build_similarity_graph(const SquareMatrix& counts, std::span<const std::size_t> members,
                                       double eta = 0.5);

/// Strength over twice the total edge weight. Throws on an all-zero graph.
std::vector<double> node_frequencies(const SquareMatrix& g);

/// Two-level map equation (bits) of a module assignment. Nodes without edges
/// contribute nothing wherever they are placed. An edgeless graph has L = 0.
double map_equation(const SquareMatrix& g, std::span<const int> modules);

enum class InfomapMode { Greedy, Exhaustive };

struct Partition {
    std::vector<int> modules;  // module id per node, 0-based, ordered by size
    std::size_t module_count = 0;
    double codelength = 0.0;
};

inline constexpr std::size_t kExhaustiveLimit = 12;

/// Isolated nodes end up as singleton modules. Exhaustive mode enumerates all
/// set partitions of the connected nodes (n <= 12); greedy mode keeps the best
/// of `restarts` seeded local-move/aggregation runs. Module ids are ordered by
/// node count (descending), then smallest member.
Partition infomap_partition(const SquareMatrix& g, InfomapMode mode, std::uint64_t seed = 0, int restarts = 10);

/// Relabels modules by (size desc, smallest member) and fills the counts.
Partition canonical_partition(std::span<const int> modules, const SquareMatrix& g);

/// sLTPs: one pattern per module with pooled members and recomputed centroids.
PatternModel finalize_sltps(const Partition& partition, const PatternModel& model, std::span<const RoiRecord> rois);

}  // namespace sltp
