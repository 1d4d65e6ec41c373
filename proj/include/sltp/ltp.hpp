// Lung texture patterns (LTPs): texture-only K-means initialization and the
// spatially augmented relabeling with the mixed chi2 / squared-l2 cost.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sltp/features.hpp"

namespace sltp {

struct Pattern {
    std::vector<double> texture;  // mean texture histogram of the members
    std::vector<double> spatial;  // mean sub-region one-hot of the members
    std::vector<std::size_t> members;
    double d_max = 0.0;  // largest member chi2 distance to `texture`
};

struct PatternModel {
    std::vector<Pattern> patterns;
    std::vector<int> labels;  // pattern index per ROI
    double lambda = 0.0;
    double W = 0.0;
    bool penalty = true;
    int sweeps = 0;
    bool converged = true;
    int repaired = 0;

    std::size_t size() const { return patterns.size(); }
};

/// Centroids, member lists and d_max from a labeling. Patterns without
/// members are dropped and the remaining labels compacted in order.
PatternModel build_patterns(std::span<const RoiRecord> rois, std::span<const int> labels);

double sst_texture(std::span<const RoiRecord> rois);
double sst_spatial(std::span<const RoiRecord> rois);

/// SST_T / SST_S. Throws std::domain_error when every ROI shares one
/// sub-region.
double compute_W(std::span<const RoiRecord> rois);

PatternModel init_ltps(std::span<const RoiRecord> rois, int n_ltp, std::uint64_t seed, int threads = 1,
                       int n_init = 10);

double mixed_cost(const RoiRecord& roi, const Pattern& p, double lambda, double W);

struct AugmentOptions {
    int max_sweeps = 200;
    bool penalty = true;
    int threads = 1;
};

/// Relabels against the previous sweep's centroids and d_max until the
/// partition stops changing. A ROI never moves into a pattern whose d_max its
/// texture distance exceeds; with every pattern forbidden it keeps its label.
PatternModel augment_ltps(const PatternModel& model, std::span<const RoiRecord> rois, double lambda, double W,
                          const AugmentOptions& options = {});

/// Sum over patterns and members of chi2(member texture, pattern texture).
double ssw_texture(const PatternModel& model, std::span<const RoiRecord> rois);

std::vector<double> default_lambda_grid(int points = 21, double hi = 2.0);

struct LambdaTuning {
    double lambda = 0.0;
    bool fallback = false;       // no grid value met the bound
    std::vector<double> grid;
    std::vector<double> delta;   // relative SSW_T increase per grid value
    double baseline_ssw = 0.0;
    PatternModel baseline;       // augment_ltps(model0, 0)
    PatternModel model;          // augment_ltps(baseline, lambda)
};

/// The baseline is the lambda = 0 augmentation of `model0`, so delta(0) = 0.
/// Picks the largest grid lambda with delta < lt.
LambdaTuning tune_lambda(std::span<const RoiRecord> rois, const PatternModel& model0, std::span<const double> grid,
                         double lt, double W, const AugmentOptions& options = {});

}  // namespace sltp
