#include "sltp/regression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sltp/metrics.hpp"
#include "sltp/random.hpp"

namespace sltp {

Matrix multiply(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("multiply: shape mismatch");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double x = a(i, k);
            if (x == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += x * b(k, j);
        }
    return c;
}

namespace {

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

double spectral_norm_sym(const Matrix& m) {
    std::vector<double> x(m.rows, 1.0 / std::sqrt(static_cast<double>(m.rows))), y(m.rows);
    double lambda = 0.0;
    for (int it = 0; it < 500; ++it) {
        for (std::size_t i = 0; i < m.rows; ++i) {
            y[i] = 0.0;
            for (std::size_t j = 0; j < m.cols; ++j) y[i] += m(i, j) * x[j];
        }
        const double norm = std::sqrt(std::inner_product(y.begin(), y.end(), y.begin(), 0.0));
        if (norm == 0.0) return 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) x[i] = y[i] / norm;
        if (std::abs(norm - lambda) <= 1e-12 * norm) {
            lambda = norm;
            break;
        }
        lambda = norm;
    }
    return lambda;
}

void project_rows(Matrix& a) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        const auto p = project_to_simplex({a.v.data() + i * a.cols, a.cols});
        std::copy(p.begin(), p.end(), a.v.begin() + static_cast<std::ptrdiff_t>(i * a.cols));
    }
}

}  // namespace

std::vector<double> project_to_simplex(std::span<const double> x) {
    if (x.empty()) throw std::invalid_argument("project_to_simplex: empty vector");
    std::vector<double> u(x.begin(), x.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cum += u[j];
        const double t = (cum - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) theta = t;
    }
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::max(0.0, x[i] - theta);
    // Renormalize rounding drift so the row sum is exactly representable near 1.
    const double s = std::accumulate(out.begin(), out.end(), 0.0);
    if (s > 0.0)
        for (double& v : out) v /= s;
    return out;
}

double regression_objective(const Matrix& X, const Matrix& A, const Matrix& Y) {
    const auto R = multiply(X, A);
    if (R.rows != Y.rows || R.cols != Y.cols) throw std::invalid_argument("regression: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < R.v.size(); ++i) s += (R.v[i] - Y.v[i]) * (R.v[i] - Y.v[i]);
    return s;
}

RegressionResult fit_constrained_regression(const Matrix& X, const Matrix& Y, double tol, int max_iter) {
    if (X.rows == 0 || X.cols == 0 || Y.cols == 0) throw std::invalid_argument("regression: empty problem");
    if (X.rows != Y.rows) throw std::invalid_argument("regression: X and Y row counts differ");
    const auto Xt = transpose(X);
    const auto XtX = multiply(Xt, X);
    const auto XtY = multiply(Xt, Y);
    const double L = 2.0 * spectral_norm_sym(XtX);

    RegressionResult r;
    r.A = Matrix(X.cols, Y.cols, 1.0 / static_cast<double>(Y.cols));
    r.objective = regression_objective(X, r.A, Y);
    r.history.push_back(r.objective);
    if (L == 0.0) {
        r.converged = true;
        return r;
    }
    double step = 1.0 / L;
    for (int it = 0; it < max_iter; ++it) {
        // grad = 2 (X^T X A - X^T Y)
        auto G = multiply(XtX, r.A);
        for (std::size_t i = 0; i < G.v.size(); ++i) G.v[i] = 2.0 * (G.v[i] - XtY.v[i]);
        Matrix next;
        double f = 0.0;
        for (int halving = 0; halving < 60; ++halving) {
            next = r.A;
            for (std::size_t i = 0; i < next.v.size(); ++i) next.v[i] -= step * G.v[i];
            project_rows(next);
            f = regression_objective(X, next, Y);
            if (f <= r.objective) break;
            step *= 0.5;
        }
        r.iterations = it + 1;
        if (f > r.objective) {
            r.converged = true;
            break;
        }
        const double prev = r.objective;
        r.A = std::move(next);
        r.objective = f;
        r.history.push_back(f);
        if (f <= 1e-300 || (prev - f) <= tol * std::max(prev, 1e-300)) {
            r.converged = true;
            break;
        }
    }
    return r;
}

CrossValidation cross_validate(const Matrix& X, const Matrix& Y, int folds, std::uint64_t seed) {
    if (folds < 2 || static_cast<std::size_t>(folds) > X.rows)
        throw std::invalid_argument("cross_validate: folds must be in [2, scans]");
    if (X.rows != Y.rows) throw std::invalid_argument("cross_validate: X and Y row counts differ");
    std::vector<std::size_t> order(X.rows);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(stream_seed(seed, "cv-folds"));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    CrossValidation cv;
    cv.fold.assign(X.rows, 0);
    for (std::size_t i = 0; i < order.size(); ++i) cv.fold[order[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
    cv.predicted = Matrix(Y.rows, Y.cols);
    for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < X.rows; ++i) (cv.fold[i] == f ? test : train).push_back(i);
        Matrix xt(train.size(), X.cols), yt(train.size(), Y.cols);
        for (std::size_t r = 0; r < train.size(); ++r) {
            for (std::size_t c = 0; c < X.cols; ++c) xt(r, c) = X(train[r], c);
            for (std::size_t c = 0; c < Y.cols; ++c) yt(r, c) = Y(train[r], c);
        }
        const auto fit = fit_constrained_regression(xt, yt);
        for (auto i : test)
            for (std::size_t c = 0; c < Y.cols; ++c) {
                double s = 0.0;
                for (std::size_t k = 0; k < X.cols; ++k) s += X(i, k) * fit.A(k, c);
                cv.predicted(i, c) = s;
            }
    }
    for (std::size_t c = 0; c < Y.cols; ++c) {
        std::vector<double> p(Y.rows), t(Y.rows);
        for (std::size_t i = 0; i < Y.rows; ++i) {
            p[i] = cv.predicted(i, c);
            t[i] = Y(i, c);
        }
        double value = std::nan("");
        try {
            value = icc21(p, t);
        } catch (const std::invalid_argument&) {
        }
        cv.icc.push_back(value);
    }
    return cv;
}

}  // namespace sltp
