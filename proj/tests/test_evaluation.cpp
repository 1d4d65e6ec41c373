#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "oracles.hpp"
#include "sltp/hungarian.hpp"
#include "sltp/metrics.hpp"
#include "sltp/random.hpp"
#include "sltp/regression.hpp"

using namespace sltp;

namespace {

// Minimum over injective maps of the smaller side into the larger one.
double brute_rect(const CostMatrix& c) {
    double best = std::numeric_limits<double>::infinity();
    const bool by_row = c.rows <= c.cols;
    const std::size_t small = by_row ? c.rows : c.cols, large = by_row ? c.cols : c.rows;
    std::vector<std::size_t> pick;
    std::vector<bool> used(large, false);
    std::function<void(double)> rec = [&](double acc) {
        if (pick.size() == small) {
            best = std::min(best, acc);
            return;
        }
        for (std::size_t j = 0; j < large; ++j) {
            if (used[j]) continue;
            used[j] = true;
            pick.push_back(j);
            const std::size_t i = pick.size() - 1;
            rec(acc + (by_row ? c(i, j) : c(j, i)));
            pick.pop_back();
            used[j] = false;
        }
    };
    rec(0.0);
    return best;
}

double icc_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size()), k = 2.0;
    double g = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) g += a[i] + b[i];
    g /= n * k;
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double ssr = 0.0, sse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double r = (a[i] + b[i]) / 2;
        ssr += k * (r - g) * (r - g);
        sse += std::pow(a[i] - r - ma + g, 2) + std::pow(b[i] - r - mb + g, 2);
    }
    const double ssc = n * ((ma - g) * (ma - g) + (mb - g) * (mb - g));
    const double msr = ssr / (n - 1), msc = ssc / (k - 1), mse = sse / ((n - 1) * (k - 1));
    return (msr - mse) / (msr + (k - 1) * mse + k * (msc - mse) / n);
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (auto& v : m.v) v = rng.uniform();
    return m;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("Hungarian examples") {
    CostMatrix id(3, 3, 1.0);
    for (std::size_t i = 0; i < 3; ++i) id(i, i) = 0.0;
    CHECK(hungarian_match(id).row_to_col == std::vector<int>{0, 1, 2});
    CHECK(hungarian_match(id).cost == 0.0);
    // Every permutation costs the same; the smallest one wins.
    CHECK(hungarian_match(CostMatrix(4, 4, 2.5)).row_to_col == std::vector<int>{0, 1, 2, 3});
    CostMatrix c(2, 2);
    c.v = {4, 1, 2, 3};
    CHECK(hungarian_match(c).row_to_col == std::vector<int>{1, 0});
    CHECK(hungarian_match(c).cost == 3.0);
}

TEST_CASE("Hungarian matches brute force") {
    Rng rng(11);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + rng.below(6);
        CostMatrix c(n, n);
        for (auto& v : c.v) v = t % 3 == 0 ? static_cast<double>(rng.below(4)) : rng.uniform(0, 10);
        const auto a = hungarian_match(c);
        CHECK(a.cost == doctest::Approx(oracle::brute_assignment(c.v, n)).epsilon(1e-12));
        std::vector<int> sorted = a.row_to_col;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < n; ++i) CHECK(sorted[i] == static_cast<int>(i));
        double cost = 0.0;
        for (std::size_t i = 0; i < n; ++i) cost += c(i, static_cast<std::size_t>(a.row_to_col[i]));
        CHECK(cost == doctest::Approx(a.cost));
    }
}

TEST_CASE("Hungarian on rectangular matrices") {
    Rng rng(12);
    for (int t = 0; t < 300; ++t) {
        const std::size_t r = 1 + rng.below(5), c = 1 + rng.below(5);
        CostMatrix m(r, c);
        for (auto& v : m.v) v = rng.uniform(0, 5);
        const auto a = hungarian_match(m);
        CHECK(a.cost == doctest::Approx(brute_rect(m)).epsilon(1e-12));
        const auto matched = std::count_if(a.row_to_col.begin(), a.row_to_col.end(), [](int j) { return j >= 0; });
        CHECK(static_cast<std::size_t>(matched) == std::min(r, c));
    }
}

TEST_CASE("Dice") {
    Mask3D a({4, 1, 1}, {}, 0), b({4, 1, 1}, {}, 0);
    CHECK(dice(a, b) == 1.0);
    a(0, 0, 0) = a(1, 0, 0) = 1;
    b(1, 0, 0) = b(2, 0, 0) = b(3, 0, 0) = 1;
    CHECK(dice(a, b) == doctest::Approx(2.0 / 5.0));
    CHECK(dice(a, a) == 1.0);
    Mask3D la({3, 1, 1}, {}, 2), lb({3, 1, 1}, {}, 2);
    lb(2, 0, 0) = 3;
    CHECK(dice_of_label(la, lb, 2) == doctest::Approx(0.8));
    CHECK(dice_of_label(la, lb, 3) == 0.0);
    const std::vector<Mask3D> va{la}, vb{lb};
    CHECK(mean_label_dice(va, vb, 2) == doctest::Approx(0.4));
    CHECK_THROWS(dice(a, Mask3D({2, 1, 1}, {}, 0)));
}

TEST_CASE("ranks and correlations") {
    const std::vector<double> x{3, 1, 4, 1, 5, 9, 2, 6};
    CHECK(midranks(x) == oracle::average_ranks(x));
    Rng rng(13);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> a(12), b(12);
        for (std::size_t i = 0; i < 12; ++i) {
            a[i] = static_cast<double>(rng.below(6));
            b[i] = a[i] + rng.normal();
        }
        CHECK(pearson(a, b) == doctest::Approx(oracle::pearson(a, b)).epsilon(1e-12));
        CHECK(spearman(a, b) ==
              doctest::Approx(oracle::pearson(oracle::average_ranks(a), oracle::average_ranks(b))).epsilon(1e-12));
    }
    const std::vector<double> up{1, 2, 3, 4}, sq{1, 4, 9, 16}, down{4, 3, 2, 1};
    CHECK(spearman(up, sq) == doctest::Approx(1.0));
    CHECK(spearman(up, down) == doctest::Approx(-1.0));

    const std::vector<std::vector<double>> fa{{0.1, 0.5}, {0.2, 0.5}, {0.3, 0.5}};
    const std::vector<std::vector<double>> fb{{0.3, 0.1}, {0.2, 0.2}, {0.1, 0.3}};
    // Column 1 of `fa` is constant and skipped.
    CHECK(mean_fraction_spearman(fa, fb) == doctest::Approx(-1.0));
}

TEST_CASE("Cohen's kappa") {
    const std::vector<int> a{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
    const std::vector<int> b{1, 1, 1, 1, 0, 1, 0, 0, 0, 1};
    CHECK(cohen_kappa(a, b) == doctest::Approx(0.4));
    CHECK(cohen_kappa(a, a) == 1.0);
    const std::vector<int> same(6, 2);
    CHECK(cohen_kappa(same, same) == 1.0);
    const std::vector<int> other(6, 3);
    CHECK(cohen_kappa(same, other) == 0.0);
}

TEST_CASE("ICC(2,1)") {
    Rng rng(14);
    std::vector<double> t(30);
    for (auto& v : t) v = rng.uniform(0, 10);
    CHECK(icc21(t, t) == doctest::Approx(1.0));

    // Constant offset c: ICC = 2 s^2 / (2 s^2 + c^2) with the sample variance s^2.
    const double c = 1.5;
    std::vector<double> p(t);
    for (auto& v : p) v += c;
    const double m = std::accumulate(t.begin(), t.end(), 0.0) / 30;
    double s2 = 0.0;
    for (double v : t) s2 += (v - m) * (v - m);
    s2 /= 29;
    CHECK(icc21(p, t) == doctest::Approx(2 * s2 / (2 * s2 + c * c)).epsilon(1e-9));

    for (int k = 0; k < 50; ++k) {
        std::vector<double> q(t);
        for (auto& v : q) v += rng.normal() * (1 + k % 5);
        CHECK(icc21(q, t) == doctest::Approx(icc_oracle(q, t)).epsilon(1e-9));
        CHECK(icc21(q, t) <= 1.0);
    }
}

TEST_CASE("adjusted Rand index") {
    const std::vector<int> a{0, 0, 1, 1, 2, 2};
    const std::vector<int> perm{5, 5, 3, 3, 9, 9};
    CHECK(adjusted_rand_index(a, perm) == doctest::Approx(1.0));
    Rng rng(15);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 2 + rng.below(30);
        std::vector<int> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = static_cast<int>(rng.below(4));
            y[i] = rng.uniform() < 0.6 ? x[i] : static_cast<int>(rng.below(5));
        }
        CHECK(adjusted_rand_index(x, y) == doctest::Approx(oracle::ari_pairs(x, y)).epsilon(1e-12));
    }
}

TEST_CASE("reproducibility of learned patterns") {
    const std::vector<int> ref{0, 0, 1, 1, 2, 2};
    const std::vector<std::vector<int>> same{{0, 0, 1, 1, 2, 2}, {2, 2, 0, 0, 1, 1}};
    CHECK(reproducibility_ln(ref, same) == doctest::Approx(1.0));
    const std::vector<std::vector<int>> merged{{0, 0, 0, 0, 1, 1}};
    // Patterns 0 and 1 compete for candidate 0; one of them gets 1, the other nothing.
    CHECK(reproducibility_ln(ref, merged) == doctest::Approx(2.0 / 3.0));
    const std::vector<int> two{0, 0, 1, 1};
    const std::vector<std::vector<int>> one{{0, 0, 0, 0}};
    CHECK(reproducibility_ln(two, one) == doctest::Approx(0.5));
    const std::vector<std::vector<int>> split{{0, 1, 2, 2}};
    CHECK(reproducibility_ln(two, split) == doctest::Approx(0.75));
}

TEST_CASE("simplex projection") {
    CHECK(project_to_simplex(std::vector<double>{0.2, 0.3, 0.5}) == std::vector<double>{0.2, 0.3, 0.5});
    const auto p = project_to_simplex(std::vector<double>{2.0, 0.0});
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(p[1] == doctest::Approx(0.0));
    Rng rng(16);
    for (int t = 0; t < 300; ++t) {
        std::vector<double> v(1 + rng.below(7));
        for (auto& x : v) x = rng.uniform(-2, 2);
        const auto x = project_to_simplex(v);
        CHECK(std::accumulate(x.begin(), x.end(), 0.0) == doctest::Approx(1.0));
        // KKT: x = max(v - tau, 0) for a single tau.
        double tau = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t i = 0; i < v.size(); ++i)
            if (x[i] > 0) tau = v[i] - x[i];
        REQUIRE(!std::isnan(tau));
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK(x[i] >= 0.0);
            if (x[i] > 0) CHECK(v[i] - x[i] == doctest::Approx(tau).epsilon(1e-9));
            else CHECK(v[i] <= tau + 1e-9);
        }
    }
}

TEST_CASE("constrained regression against a grid search") {
    Rng rng(17);
    for (int t = 0; t < 5; ++t) {
        const auto X = random_matrix(rng, 15, 2);
        const auto Y = random_matrix(rng, 15, 2);
        const auto fit = fit_constrained_regression(X, Y);
        // Rows of A are (a, 1 - a) and (b, 1 - b).
        double best = std::numeric_limits<double>::infinity(), ba = 0, bb = 0;
        for (int i = 0; i <= 1000; ++i)
            for (int j = 0; j <= 1000; ++j) {
                Matrix A(2, 2);
                A.v = {i / 1000.0, 1 - i / 1000.0, j / 1000.0, 1 - j / 1000.0};
                const double f = regression_objective(X, A, Y);
                if (f < best) best = f, ba = i / 1000.0, bb = j / 1000.0;
            }
        CHECK(fit.objective <= best + 1e-12);
        CHECK(std::abs(fit.A(0, 0) - ba) < 2e-3);
        CHECK(std::abs(fit.A(1, 0) - bb) < 2e-3);
        for (std::size_t k = 1; k < fit.history.size(); ++k) CHECK(fit.history[k] <= fit.history[k - 1] + 1e-15);
    }
}

TEST_CASE("constrained regression feasibility and interpolation") {
    Rng rng(18);
    for (int t = 0; t < 10; ++t) {
        const auto X = random_matrix(rng, 40, 5);
        Matrix truth(5, 3);
        for (std::size_t i = 0; i < 5; ++i) {
            std::vector<double> row{rng.uniform(0.1, 1), rng.uniform(0.1, 1), rng.uniform(0.1, 1)};
            const double s = row[0] + row[1] + row[2];
            for (std::size_t j = 0; j < 3; ++j) truth(i, j) = row[j] / s;
        }
        const auto fit = fit_constrained_regression(X, multiply(X, truth));
        CHECK(fit.objective < 1e-10);
        for (std::size_t i = 0; i < 5; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < 3; ++j) {
                CHECK(fit.A(i, j) >= -1e-8);
                s += fit.A(i, j);
            }
            CHECK(std::abs(s - 1.0) < 1e-8);
        }
        const auto free_fit = fit_constrained_regression(X, random_matrix(rng, 40, 3));
        for (std::size_t i = 0; i < 5; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < 3; ++j) {
                CHECK(free_fit.A(i, j) >= -1e-8);
                s += free_fit.A(i, j);
            }
            CHECK(std::abs(s - 1.0) < 1e-8);
        }
    }
}

TEST_CASE("cross-validation folds") {
    Rng rng(19);
    const auto X = random_matrix(rng, 22, 4);
    Matrix truth(4, 2);
    for (std::size_t i = 0; i < 4; ++i) truth(i, 0) = 1 - (truth(i, 1) = rng.uniform());
    const auto cv = cross_validate(X, multiply(X, truth), 4, 3);
    std::vector<int> sizes(4, 0);
    for (int f : cv.fold) ++sizes[static_cast<std::size_t>(f)];
    CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
    for (double v : cv.icc) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(cross_validate(X, multiply(X, truth), 4, 3).fold == cv.fold);
    CHECK_THROWS(cross_validate(X, multiply(X, truth), 30, 3));
}

}  // TEST_SUITE
