// Minimum-cost assignment (Hungarian method) on rectangular cost matrices.
#pragma once

#include <cstddef>
#include <vector>

namespace sltp {

struct CostMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    CostMatrix() = default;
    CostMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}
    double& operator()(std::size_t i, std::size_t j) { return v[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

struct Assignment {
    std::vector<int> row_to_col;  // -1 for rows matched to padding
    double cost = 0.0;            // over real cells only
};

/// Rectangular inputs are padded to square with the maximum cost. Among
/// optimal assignments the lexicographically smallest (by row) is returned.
Assignment hungarian_match(const CostMatrix& c);

}  // namespace sltp
