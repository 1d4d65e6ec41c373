#include "sltp/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sltp {

namespace {

struct Duals {
    std::vector<double> u, v;
    std::vector<int> row_to_col;
};

// Shortest augmenting path with potentials, O(n^3). Square input.
Duals solve(const std::vector<double>& a, std::size_t n) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    Duals d;
    d.u.assign(u.begin() + 1, u.end());
    d.v.assign(v.begin() + 1, v.end());
    d.row_to_col.assign(n, -1);
    for (std::size_t j = 1; j <= n; ++j) d.row_to_col[p[j] - 1] = static_cast<int>(j - 1);
    return d;
}

// Kuhn augmenting path over tight edges.
bool augment(std::size_t r, const std::vector<char>& tight, std::size_t n, std::vector<int>& col_owner,
             std::vector<char>& seen) {
    for (std::size_t j = 0; j < n; ++j) {
        if (!tight[r * n + j] || seen[j]) continue;
        seen[j] = 1;
        if (col_owner[j] < 0 || augment(static_cast<std::size_t>(col_owner[j]), tight, n, col_owner, seen)) {
            col_owner[j] = static_cast<int>(r);
            return true;
        }
    }
    return false;
}

bool completable(std::size_t first, const std::vector<char>& tight, std::size_t n, const std::vector<char>& col_used) {
    std::vector<int> owner(n, -1);
    for (std::size_t j = 0; j < n; ++j)
        if (col_used[j]) owner[j] = -2;
    for (std::size_t r = first; r < n; ++r) {
        std::vector<char> seen(n, 0);
        for (std::size_t j = 0; j < n; ++j) seen[j] = col_used[j];
        if (!augment(r, tight, n, owner, seen)) return false;
    }
    return true;
}

}  // namespace

Assignment hungarian_match(const CostMatrix& c) {
    if (c.rows == 0 || c.cols == 0) throw std::invalid_argument("hungarian_match: empty cost matrix");
    if (c.v.size() != c.rows * c.cols) throw std::invalid_argument("hungarian_match: size mismatch");
    double hi = -std::numeric_limits<double>::infinity();
    double scale = 1.0;
    for (double x : c.v) {
        if (!std::isfinite(x)) throw std::invalid_argument("hungarian_match: non-finite cost");
        hi = std::max(hi, x);
        scale = std::max(scale, std::abs(x));
    }
    const std::size_t n = std::max(c.rows, c.cols);
    std::vector<double> a(n * n, hi);
    for (std::size_t i = 0; i < c.rows; ++i)
        for (std::size_t j = 0; j < c.cols; ++j) a[i * n + j] = c(i, j);

    const auto d = solve(a, n);
    const double eps = 1e-9 * scale;
    std::vector<char> tight(n * n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) tight[i * n + j] = std::abs(a[i * n + j] - d.u[i] - d.v[j]) <= eps;

    auto total = [&](const std::vector<int>& perm) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i * n + static_cast<std::size_t>(perm[i])];
        return s;
    };
    std::vector<int> perm(n, -1);
    std::vector<char> col_used(n, 0);
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
        ok = false;
        for (std::size_t j = 0; j < n; ++j) {
            if (!tight[i * n + j] || col_used[j]) continue;
            col_used[j] = 1;
            if (completable(i + 1, tight, n, col_used)) {
                perm[i] = static_cast<int>(j);
                ok = true;
                break;
            }
            col_used[j] = 0;
        }
    }
    if (!ok || total(perm) > total(d.row_to_col) + eps * static_cast<double>(n)) perm = d.row_to_col;

    Assignment out;
    out.row_to_col.assign(c.rows, -1);
    for (std::size_t i = 0; i < c.rows; ++i) {
        const auto j = static_cast<std::size_t>(perm[i]);
        if (j < c.cols) {
            out.row_to_col[i] = static_cast<int>(j);
            out.cost += c(i, j);
        }
    }
    return out;
}

}  // namespace sltp
