#include "sltp/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "sltp/parallel.hpp"
#include "sltp/random.hpp"

namespace sltp {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

int nearest_centroid(std::span<const double> x, std::span<const double> centroids, std::size_t dim) {
    const std::size_t k = centroids.size() / dim;
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
        const double d = squared_distance(x, centroids.subspan(j * dim, dim));
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(j);
        }
    }
    return best;
}

namespace {

struct Points {
    std::span<const double> data;
    std::size_t dim;
    std::size_t n;
    std::span<const double> row(std::size_t i) const { return data.subspan(i * dim, dim); }
};

std::vector<double> plus_plus(const Points& p, int k, Rng& rng) {
    std::vector<double> c(static_cast<std::size_t>(k) * p.dim);
    std::vector<double> d2(p.n, std::numeric_limits<double>::infinity());
    std::size_t pick = rng.below(p.n);
    for (int j = 0; j < k; ++j) {
        std::copy_n(p.data.begin() + pick * p.dim, p.dim, c.begin() + j * p.dim);
        if (j + 1 == k) break;
        double total = 0.0;
        for (std::size_t i = 0; i < p.n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(p.row(i), {c.data() + j * p.dim, p.dim}));
            total += d2[i];
        }
        if (total <= 0.0) {
            pick = rng.below(p.n);
            continue;
        }
        const double target = rng.uniform() * total;
        double acc = 0.0;
        pick = p.n - 1;
        for (std::size_t i = 0; i < p.n; ++i) {
            acc += d2[i];
            if (acc > target && d2[i] > 0.0) {
                pick = i;
                break;
            }
        }
    }
    return c;
}

void recompute_means(const Points& p, int k, const std::vector<int>& labels, std::vector<double>& c,
                     std::vector<std::size_t>& counts) {
    std::fill(c.begin(), c.end(), 0.0);
    counts.assign(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < p.n; ++i) {
        const auto j = static_cast<std::size_t>(labels[i]);
        ++counts[j];
        for (std::size_t t = 0; t < p.dim; ++t) c[j * p.dim + t] += p.data[i * p.dim + t];
    }
    for (std::size_t j = 0; j < counts.size(); ++j)
        if (counts[j])
            for (std::size_t t = 0; t < p.dim; ++t) c[j * p.dim + t] /= static_cast<double>(counts[j]);
}

double objective_of(const Points& p, const std::vector<int>& labels, const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.n; ++i)
        s += squared_distance(p.row(i), {c.data() + static_cast<std::size_t>(labels[i]) * p.dim, p.dim});
    return s;
}

// Moves single points between clusters while that lowers the objective.
void hartigan(const Points& p, int k, std::vector<int>& labels, std::vector<double>& c,
              std::vector<std::size_t>& counts, int max_pass) {
    for (int pass = 0; pass < max_pass; ++pass) {
        bool moved = false;
        for (std::size_t i = 0; i < p.n; ++i) {
            const auto a = static_cast<std::size_t>(labels[i]);
            if (counts[a] <= 1) continue;
            const auto x = p.row(i);
            const double na = static_cast<double>(counts[a]);
            const double remove = na / (na - 1.0) * squared_distance(x, {c.data() + a * p.dim, p.dim});
            double best_gain = 1e-12 * std::max(1.0, remove);
            std::size_t best = a;
            for (std::size_t b = 0; b < static_cast<std::size_t>(k); ++b) {
                if (b == a) continue;
                const double nb = static_cast<double>(counts[b]);
                const double add = nb / (nb + 1.0) * squared_distance(x, {c.data() + b * p.dim, p.dim});
                if (remove - add > best_gain) {
                    best_gain = remove - add;
                    best = b;
                }
            }
            if (best == a) continue;
            const double nb = static_cast<double>(counts[best]);
            for (std::size_t t = 0; t < p.dim; ++t) {
                c[a * p.dim + t] = (c[a * p.dim + t] * na - x[t]) / (na - 1.0);
                c[best * p.dim + t] = (c[best * p.dim + t] * nb + x[t]) / (nb + 1.0);
            }
            --counts[a];
            ++counts[best];
            labels[i] = static_cast<int>(best);
            moved = true;
        }
        if (!moved) break;
    }
    recompute_means(p, k, labels, c, counts);
}

KMeansResult run_once(const Points& p, const KMeansOptions& o, std::uint64_t init) {
    Rng rng(stream_seed(o.seed, "kmeans", init));
    KMeansResult r;
    r.dim = p.dim;
    r.centroids = plus_plus(p, o.k, rng);
    r.labels.assign(p.n, -1);
    std::vector<double> dist(p.n);
    std::vector<std::size_t> counts;
    for (int it = 0; it < o.max_iter; ++it) {
        std::vector<int> next(p.n);
        parallel_for(p.n, o.threads, [&](std::size_t i) {
            next[i] = nearest_centroid(p.row(i), r.centroids, p.dim);
            dist[i] = squared_distance(p.row(i), r.centroid(static_cast<std::size_t>(next[i])));
        });
        const bool same = next == r.labels;
        r.labels = std::move(next);
        r.iterations = it + 1;
        recompute_means(p, o.k, r.labels, r.centroids, counts);
        bool repaired = false;
        std::vector<char> taken(p.n, 0);
        for (std::size_t j = 0; j < counts.size(); ++j) {
            if (counts[j]) continue;
            std::size_t far = p.n;
            for (std::size_t i = 0; i < p.n; ++i) {
                const auto own = static_cast<std::size_t>(r.labels[i]);
                if (taken[i] || counts[own] <= 1) continue;
                if (far == p.n || dist[i] > dist[far]) far = i;
            }
            if (far == p.n) break;
            taken[far] = 1;
            --counts[static_cast<std::size_t>(r.labels[far])];
            r.labels[far] = static_cast<int>(j);
            counts[j] = 1;
            ++r.repaired;
            repaired = true;
        }
        if (repaired) {
            recompute_means(p, o.k, r.labels, r.centroids, counts);
            continue;
        }
        if (same) {
            r.converged = true;
            break;
        }
    }
    if (o.refine) hartigan(p, o.k, r.labels, r.centroids, counts, o.max_iter);
    r.objective = objective_of(p, r.labels, r.centroids);
    return r;
}

}  // namespace

KMeansResult kmeans(std::span<const double> points, std::size_t dim, const KMeansOptions& o) {
    if (dim == 0 || points.size() % dim != 0) throw std::invalid_argument("kmeans: bad point dimension");
    if (o.k < 1) throw std::invalid_argument("kmeans: k must be at least 1");
    const Points p{points, dim, points.size() / dim};
    if (p.n < static_cast<std::size_t>(o.k)) throw std::invalid_argument("kmeans: fewer points than clusters");
    KMeansResult best;
    for (int init = 0; init < std::max(1, o.n_init); ++init) {
        auto r = run_once(p, o, static_cast<std::uint64_t>(init));
        if (init == 0 || r.objective < best.objective) best = std::move(r);
    }
    return best;
}

}  // namespace sltp
