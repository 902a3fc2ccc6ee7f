#pragma once

#include "xaiopt/model.hpp"

namespace xaiopt {

struct LassoOptions {
    double alpha = 1e-10;
    double tolerance = 1e-8;
    int max_iterations = 10000;
    bool fit_intercept = true;
};

struct LinearFit {
    Vector coefficients;
    double intercept = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Weighted lasso by cyclic coordinate descent, minimizing
///   (1 / (2 sum w)) sum_i w_i (y_i - b - x_i . beta)^2 + alpha * |beta|_1.
/// Throws InputError when every row of x is identical (nothing to fit).
LinearFit weighted_lasso(const Matrix& x, const Vector& y, const Vector& weights,
                         const LassoOptions& options = {});

/// Minimum-norm weighted least squares (no intercept).
Vector weighted_least_squares(const Matrix& x, const Vector& y, const Vector& weights);

} // namespace xaiopt
