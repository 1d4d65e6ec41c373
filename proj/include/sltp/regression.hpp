// Simplex-constrained least squares  min ||XA - Y||^2  with every row of A on
// the probability simplex, and a k-fold cross-validation harness.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sltp {

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}
    double& operator()(std::size_t i, std::size_t j) { return v[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

Matrix multiply(const Matrix& a, const Matrix& b);

/// Euclidean projection onto {x >= 0, sum x = 1}.
std::vector<double> project_to_simplex(std::span<const double> x);

double regression_objective(const Matrix& X, const Matrix& A, const Matrix& Y);

struct RegressionResult {
    Matrix A;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;  // objective after each iteration, starting with the initial A
};

/// Projected gradient from the uniform A with step 1/L (L from power
/// iteration on 2 X^T X), halved whenever a step would raise the objective.
/// Stops when the relative decrease falls below tol.
RegressionResult fit_constrained_regression(const Matrix& X, const Matrix& Y, double tol = 1e-13,
                                            int max_iter = 200000);

struct CrossValidation {
    Matrix predicted;         // rows follow the input scans
    std::vector<double> icc;  // per output column
    std::vector<int> fold;    // fold of each scan
};

CrossValidation cross_validate(const Matrix& X, const Matrix& Y, int folds = 4, std::uint64_t seed = 0);

}  // namespace sltp
