#include "sltp/ltp.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "sltp/kmeans.hpp"
#include "sltp/parallel.hpp"
#include "sltp/random.hpp"

namespace sltp {

namespace {

std::size_t texture_bins(std::span<const RoiRecord> rois) {
    if (rois.empty()) throw std::invalid_argument("no ROIs");
    const auto n = rois.front().texture.size();
    for (const auto& r : rois)
        if (r.texture.size() != n) throw std::invalid_argument("ROI texture histograms differ in length");
    return n;
}

}  // namespace

PatternModel build_patterns(std::span<const RoiRecord> rois, std::span<const int> labels) {
    if (labels.size() != rois.size()) throw std::invalid_argument("build_patterns: label count mismatch");
    const auto bins = texture_bins(rois);
    int n = 0;
    for (int l : labels) {
        if (l < 0) throw std::invalid_argument("build_patterns: negative label");
        n = std::max(n, l + 1);
    }
    std::vector<int> remap(static_cast<std::size_t>(n), -1);
    for (int l : labels) remap[static_cast<std::size_t>(l)] = 0;
    int next = 0;
    for (auto& m : remap)
        if (m == 0) m = next++;

    PatternModel model;
    model.patterns.resize(static_cast<std::size_t>(next));
    model.labels.resize(labels.size());
    for (auto& p : model.patterns) {
        p.texture.assign(bins, 0.0);
        p.spatial.assign(kSubregions, 0.0);
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int k = remap[static_cast<std::size_t>(labels[i])];
        model.labels[i] = k;
        auto& p = model.patterns[static_cast<std::size_t>(k)];
        p.members.push_back(i);
        for (std::size_t b = 0; b < bins; ++b) p.texture[b] += rois[i].texture[b];
        p.spatial[static_cast<std::size_t>(rois[i].subregion)] += 1.0;
    }
    for (auto& p : model.patterns) {
        const double m = static_cast<double>(p.members.size());
        for (double& v : p.texture) v /= m;
        for (double& v : p.spatial) v /= m;
        for (auto i : p.members) p.d_max = std::max(p.d_max, chi2_distance(rois[i].texture, p.texture));
    }
    return model;
}

double sst_texture(std::span<const RoiRecord> rois) {
    const auto bins = texture_bins(rois);
    std::vector<double> mean(bins, 0.0);
    for (const auto& r : rois)
        for (std::size_t b = 0; b < bins; ++b) mean[b] += r.texture[b];
    for (double& v : mean) v /= static_cast<double>(rois.size());
    double s = 0.0;
    for (const auto& r : rois) s += chi2_distance(r.texture, mean);
    return s;
}

double sst_spatial(std::span<const RoiRecord> rois) {
    if (rois.empty()) throw std::invalid_argument("no ROIs");
    std::vector<double> mean(kSubregions, 0.0);
    for (const auto& r : rois) mean[static_cast<std::size_t>(r.subregion)] += 1.0;
    for (double& v : mean) v /= static_cast<double>(rois.size());
    double s = 0.0;
    for (const auto& r : rois) s += spatial_distance(r.subregion, mean);
    return s;
}

double compute_W(std::span<const RoiRecord> rois) {
    if (rois.size() < 2) throw std::invalid_argument("compute_W: need at least two ROIs");
    const double ss = sst_spatial(rois);
    if (ss <= 0.0) throw std::domain_error("compute_W: all ROIs share one sub-region");
    return sst_texture(rois) / ss;
}

PatternModel init_ltps(std::span<const RoiRecord> rois, int n_ltp, std::uint64_t seed, int threads, int n_init) {
    const auto bins = texture_bins(rois);
    if (n_ltp < 1) throw std::invalid_argument("init_ltps: N_LTP must be at least 1");
    if (rois.size() < static_cast<std::size_t>(n_ltp)) throw std::invalid_argument("init_ltps: fewer ROIs than N_LTP");
    std::vector<double> points;
    points.reserve(rois.size() * bins);
    for (const auto& r : rois) points.insert(points.end(), r.texture.begin(), r.texture.end());
    KMeansOptions o;
    o.k = n_ltp;
    o.n_init = n_init;
    o.seed = stream_seed(seed, "ltp-init");
    o.threads = threads;
    const auto km = kmeans(points, bins, o);
    auto model = build_patterns(rois, km.labels);
    model.repaired = km.repaired;
    return model;
}

double mixed_cost(const RoiRecord& roi, const Pattern& p, double lambda, double W) {
    double c = chi2_distance(roi.texture, p.texture);
    if (lambda != 0.0 && W != 0.0) c += lambda * W * spatial_distance(roi.subregion, p.spatial);
    return c;
}

PatternModel augment_ltps(const PatternModel& model, std::span<const RoiRecord> rois, double lambda, double W,
                          const AugmentOptions& o) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("augment_ltps: lambda must be nonnegative");
    if (model.labels.size() != rois.size()) throw std::invalid_argument("augment_ltps: model/ROI mismatch");
    PatternModel cur = model;
    cur.lambda = lambda;
    cur.W = W;
    cur.penalty = o.penalty;
    cur.converged = false;
    cur.sweeps = 0;
    for (int sweep = 0; sweep < o.max_sweeps; ++sweep) {
        std::vector<int> next(rois.size());
        parallel_for(rois.size(), o.threads, [&](std::size_t i) {
            int best = cur.labels[i];
            double best_cost = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < cur.patterns.size(); ++k) {
                const auto& p = cur.patterns[k];
                const double chi = chi2_distance(rois[i].texture, p.texture);
                if (o.penalty && chi > p.d_max && static_cast<int>(k) != cur.labels[i]) continue;
                double c = chi;
                if (lambda != 0.0 && W != 0.0) c += lambda * W * spatial_distance(rois[i].subregion, p.spatial);
                if (c < best_cost) {
                    best_cost = c;
                    best = static_cast<int>(k);
                }
            }
            next[i] = best;
        });
        cur.sweeps = sweep + 1;
        if (next == cur.labels) {
            cur.converged = true;
            break;
        }
        auto rebuilt = build_patterns(rois, next);
        cur.patterns = std::move(rebuilt.patterns);
        cur.labels = std::move(rebuilt.labels);
    }
    return cur;
}

double ssw_texture(const PatternModel& model, std::span<const RoiRecord> rois) {
    double s = 0.0;
    for (const auto& p : model.patterns)
        for (auto i : p.members) s += chi2_distance(rois[i].texture, p.texture);
    return s;
}

std::vector<double> default_lambda_grid(int points, double hi) {
    if (points < 1) throw std::invalid_argument("lambda grid needs at least one point");
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = points == 1 ? 0.0 : hi * i / (points - 1);
    return g;
}

LambdaTuning tune_lambda(std::span<const RoiRecord> rois, const PatternModel& model0, std::span<const double> grid,
                         double lt, double W, const AugmentOptions& o) {
    if (grid.empty()) throw std::invalid_argument("tune_lambda: empty grid");
    LambdaTuning t;
    t.grid.assign(grid.begin(), grid.end());
    t.baseline = augment_ltps(model0, rois, 0.0, W, o);
    t.baseline_ssw = ssw_texture(t.baseline, rois);
    bool found = false;
    for (double lambda : grid) {
        auto m = lambda == 0.0 ? t.baseline : augment_ltps(t.baseline, rois, lambda, W, o);
        m.lambda = lambda;
        const double ssw = ssw_texture(m, rois);
        double delta = 0.0;
        if (t.baseline_ssw > 0.0)
            delta = (ssw - t.baseline_ssw) / t.baseline_ssw;
        else if (ssw > 0.0)
            delta = std::numeric_limits<double>::infinity();
        t.delta.push_back(delta);
        if (delta < lt && (!found || lambda > t.lambda)) {
            found = true;
            t.lambda = lambda;
            t.model = std::move(m);
        }
    }
    if (!found) {
        t.fallback = true;
        t.lambda = 0.0;
        t.model = t.baseline;
    }
    return t;
}

}  // namespace sltp
