#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sltp/graph.hpp"

using namespace sltp;

namespace {

double entropy(const std::vector<double>& w) {
    const double t = std::accumulate(w.begin(), w.end(), 0.0);
    if (t <= 0.0) return 0.0;
    double h = 0.0;
    for (double x : w)
        if (x > 0.0) h -= x / t * std::log2(x / t);
    return h;
}

// L = q H(Q) + sum_m p_m H(P_m), computed from module exit and visit rates.
double map_equation_oracle(const SquareMatrix& g, const std::vector<int>& mod) {
    std::vector<double> s(g.n, 0.0);
    double two_w = 0.0;
    for (std::size_t i = 0; i < g.n; ++i)
        for (std::size_t j = 0; j < g.n; ++j)
            if (i != j) s[i] += g(i, j), two_w += g(i, j);
    if (two_w == 0.0) return 0.0;
    const int k = *std::max_element(mod.begin(), mod.end()) + 1;
    std::vector<double> q(static_cast<std::size_t>(k), 0.0);
    for (std::size_t i = 0; i < g.n; ++i)
        for (std::size_t j = 0; j < g.n; ++j)
            if (mod[i] != mod[j]) q[static_cast<std::size_t>(mod[i])] += g(i, j) / two_w;
    const double q_tot = std::accumulate(q.begin(), q.end(), 0.0);
    double L = q_tot * entropy(q);
    for (int m = 0; m < k; ++m) {
        std::vector<double> codebook{q[static_cast<std::size_t>(m)]};
        for (std::size_t i = 0; i < g.n; ++i)
            if (mod[i] == m) codebook.push_back(s[i] / two_w);
        const double pm = std::accumulate(codebook.begin(), codebook.end(), 0.0);
        L += pm * entropy(codebook);
    }
    return L;
}

SquareMatrix random_graph(Rng& rng, std::size_t n, double density) {
    SquareMatrix g(n);
    // Planted groups of about three nodes with stronger internal weights.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool same = i / 3 == j / 3;
            if (rng.uniform() < (same ? 0.9 : density)) g(i, j) = g(j, i) = (same ? 1.0 : 0.3) * rng.uniform(0.2, 1.0);
        }
    return g;
}

std::vector<int> relabel(const std::vector<int>& m) {
    std::map<int, int> ids;
    std::vector<int> out;
    for (int x : m) out.push_back(ids.emplace(x, static_cast<int>(ids.size())).first->second);
    return out;
}

}  // namespace

TEST_SUITE("sltp-graph") {

TEST_CASE("replacement counts") {
    // Patterns 0 and 1 share one texture; pattern 2 is far from both.
    std::vector<RoiRecord> rois{roi({1, 0, 0}), roi({1, 0, 0}), roi({1, 0, 0}), roi({1, 0, 0}), roi({1, 0, 0}),
                                roi({0, 0, 1}), roi({0, 0, 1})};
    const auto m = build_patterns(rois, std::vector<int>{0, 0, 0, 1, 1, 2, 2});
    const auto c = replacement_counts(m, rois);
    CHECK(c(0, 1) == 3.0);
    CHECK(c(1, 0) == 2.0);
    CHECK(c(0, 2) == 0.0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(c(2, j) == 0.0);

    const auto g = build_similarity_graph(c, std::vector<std::size_t>{3, 2, 2});
    CHECK(g.ratio == std::vector<double>{1.0, 1.0, 0.0});
    CHECK(g.active == std::vector<bool>{true, true, false});
    CHECK(g.weights(0, 1) == 1.0);
    CHECK(g.weights(1, 0) == 1.0);
    CHECK(g.weights(0, 2) == 0.0);
}

TEST_CASE("replacement rows never exceed the pattern size") {
    const auto c = small_cohort(4);
    const auto m = augment_ltps(init_ltps(c.rois, 12, 1), c.rois, 0.5, compute_W(c.rois));
    const auto counts = replacement_counts(m, c.rois);
    for (std::size_t i = 0; i < m.size(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < m.size(); ++j) row += counts(i, j);
        CHECK(counts(i, i) == 0.0);
        CHECK(row <= static_cast<double>(m.patterns[i].members.size()));
    }
    CHECK(replacement_counts(m, c.rois, 4).v == counts.v);
}

TEST_CASE("similarity graph examples") {
    SquareMatrix c(3);
    c(0, 1) = 4;
    c(1, 0) = 2;
    c(1, 2) = 1;
    c(2, 0) = 1;
    const std::vector<std::size_t> n{8, 4, 10};
    const auto g = build_similarity_graph(c, n);
    // Ratios 0.5, 0.75, 0.1: only node 1 passes eta = 0.5.
    CHECK(g.active == std::vector<bool>{false, true, false});
    CHECK(std::all_of(g.weights.v.begin(), g.weights.v.end(), [](double w) { return w == 0.0; }));

    const auto all = build_similarity_graph(c, n, 0.0);
    CHECK(all.weights(0, 1) == doctest::Approx(6.0 / 12.0));
    CHECK(all.weights(1, 2) == doctest::Approx(1.0 / 14.0));
    CHECK(all.weights(0, 2) == doctest::Approx(1.0 / 18.0));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(all.weights(i, j) == all.weights(j, i));

    SquareMatrix over(2);
    over(0, 1) = 5;
    CHECK_THROWS(build_similarity_graph(over, std::vector<std::size_t>{4, 4}));
    CHECK_THROWS(build_similarity_graph(over, std::vector<std::size_t>{4}));
}

TEST_CASE("node frequencies") {
    SquareMatrix g(3);
    g(0, 1) = g(1, 0) = 1.0;
    g(1, 2) = g(2, 1) = 3.0;
    const auto p = node_frequencies(g);
    CHECK(p[0] == doctest::Approx(1.0 / 8));
    CHECK(p[1] == doctest::Approx(4.0 / 8));
    CHECK(p[2] == doctest::Approx(3.0 / 8));
    CHECK_THROWS(node_frequencies(SquareMatrix(3)));
    SquareMatrix asym(2);
    asym(0, 1) = 1.0;
    CHECK_THROWS(node_frequencies(asym));
}

TEST_CASE("map equation worked examples") {
    // Two disjoint unit triangles.
    SquareMatrix g(6);
    for (std::size_t a : {0u, 3u})
        for (std::size_t i = a; i < a + 3; ++i)
            for (std::size_t j = a; j < a + 3; ++j)
                if (i != j) g(i, j) = 1.0;
    CHECK(map_equation(g, std::vector<int>{0, 0, 0, 0, 0, 0}) == doctest::Approx(std::log2(6.0)));
    CHECK(map_equation(g, std::vector<int>{0, 0, 0, 1, 1, 1}) == doctest::Approx(std::log2(3.0)));
    CHECK(map_equation(SquareMatrix(4), std::vector<int>{0, 1, 2, 3}) == 0.0);
    CHECK_THROWS(map_equation(g, std::vector<int>{0, 0}));

    const auto p = infomap_partition(g, InfomapMode::Exhaustive);
    CHECK(p.module_count == 2);
    CHECK(p.modules == std::vector<int>{0, 0, 0, 1, 1, 1});
    CHECK(p.codelength == doctest::Approx(std::log2(3.0)));
    const auto q = infomap_partition(g, InfomapMode::Greedy, 1);
    CHECK(q.modules == p.modules);
}

TEST_CASE("map equation agrees with the entropy form") {
    Rng rng(21);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 2 + rng.below(9);
        const auto g = random_graph(rng, n, 0.3);
        std::vector<int> mod(n);
        for (auto& m : mod) m = static_cast<int>(rng.below(4));
        mod = relabel(mod);
        CHECK(map_equation(g, mod) == doctest::Approx(map_equation_oracle(g, mod)).epsilon(1e-10));
    }
}

TEST_CASE("exhaustive search finds the brute-force optimum") {
    Rng rng(5);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = 3 + rng.below(6);
        const auto g = random_graph(rng, n, 0.25);
        double best = std::numeric_limits<double>::infinity();
        oracle::for_each_set_partition(n, [&](const std::vector<int>& a) { best = std::min(best, map_equation_oracle(g, a)); });
        const auto p = infomap_partition(g, InfomapMode::Exhaustive);
        CHECK(p.codelength == doctest::Approx(best).epsilon(1e-9));
    }
    CHECK_THROWS(infomap_partition(SquareMatrix(13), InfomapMode::Exhaustive));
}

TEST_CASE("greedy search matches the optimum on most small graphs") {
    Rng rng(6);
    int hits = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 4 + rng.below(7);
        const auto g = random_graph(rng, n, 0.2);
        const auto e = infomap_partition(g, InfomapMode::Exhaustive);
        const auto gr = infomap_partition(g, InfomapMode::Greedy, static_cast<std::uint64_t>(t));
        CHECK(gr.codelength >= e.codelength - 1e-9);
        CHECK(gr.codelength == doctest::Approx(map_equation_oracle(g, gr.modules)).epsilon(1e-10));
        hits += gr.codelength <= e.codelength + 1e-9;
    }
    CHECK(hits >= 95);
}

TEST_CASE("isolated nodes become singleton modules") {
    SquareMatrix g(5);
    g(1, 3) = g(3, 1) = 1.0;
    for (auto mode : {InfomapMode::Exhaustive, InfomapMode::Greedy}) {
        const auto p = infomap_partition(g, mode);
        CHECK(p.module_count == 4);
        CHECK(p.modules[1] == p.modules[3]);
        CHECK(p.modules[1] == 0);
        CHECK(p.modules[0] != p.modules[2]);
        CHECK(p.modules[0] != p.modules[4]);
        CHECK(p.modules[2] != p.modules[4]);
    }
    const auto empty = infomap_partition(SquareMatrix(3), InfomapMode::Greedy);
    CHECK(empty.modules == std::vector<int>{0, 1, 2});
    CHECK(empty.codelength == 0.0);
}

TEST_CASE("partition is invariant under node relabeling and weight scaling") {
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        const std::size_t n = 4 + rng.below(6);
        const auto g = random_graph(rng, n, 0.2);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
        SquareMatrix h(n), s(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                h(perm[i], perm[j]) = g(i, j);
                s(i, j) = 7.5 * g(i, j);
            }
        const auto a = infomap_partition(g, InfomapMode::Exhaustive);
        const auto b = infomap_partition(h, InfomapMode::Exhaustive);
        const auto c = infomap_partition(s, InfomapMode::Exhaustive);
        CHECK(b.codelength == doctest::Approx(a.codelength).epsilon(1e-9));
        CHECK(c.codelength == doctest::Approx(a.codelength).epsilon(1e-9));
        CHECK(c.modules == a.modules);
        std::vector<int> back(n);
        for (std::size_t i = 0; i < n; ++i) back[i] = b.modules[perm[i]];
        CHECK(oracle::ari_pairs(back, a.modules) == doctest::Approx(1.0));
    }
}

TEST_CASE("canonical module order") {
    SquareMatrix g(5);
    const auto p = canonical_partition(std::vector<int>{7, 3, 3, 7, 7}, g);
    CHECK(p.modules == std::vector<int>{0, 1, 1, 0, 0});
    const auto q = canonical_partition(std::vector<int>{5, 2, 2, 5, 9}, g);
    CHECK(q.modules == std::vector<int>{0, 1, 1, 0, 2});
    CHECK(q.module_count == 3);
}

TEST_CASE("sLTP finalization pools members") {
    std::vector<RoiRecord> rois{roi({1, 0}, 0), roi({0.8, 0.2}, 1), roi({0, 1}, 2), roi({0.2, 0.8}, 3)};
    const auto m = build_patterns(rois, std::vector<int>{0, 1, 2, 2});
    Partition id;
    id.modules = {0, 1, 2};
    const auto same = finalize_sltps(id, m, rois);
    CHECK(same.labels == m.labels);
    for (std::size_t k = 0; k < 3; ++k) CHECK(same.patterns[k].texture == m.patterns[k].texture);

    Partition merge;
    merge.modules = {0, 0, 1};
    const auto f = finalize_sltps(merge, m, rois);
    REQUIRE(f.size() == 2);
    CHECK(f.labels == std::vector<int>{0, 0, 1, 1});
    CHECK(f.patterns[0].texture[0] == doctest::Approx(0.9));
    CHECK(f.patterns[0].spatial[0] == doctest::Approx(0.5));
    CHECK(f.patterns[0].spatial[1] == doctest::Approx(0.5));
    CHECK(f.patterns[0].d_max == doctest::Approx(oracle::chi2({1, 0}, {0.9, 0.1})));
    Partition bad;
    bad.modules = {0, 1};
    CHECK_THROWS(finalize_sltps(bad, m, rois));
}

}  // TEST_SUITE
