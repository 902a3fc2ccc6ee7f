#include "xaiopt/linear_fit.hpp"

#include "xaiopt/errors.hpp"

#include <cmath>

namespace xaiopt {
namespace {

double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

} // namespace

LinearFit weighted_lasso(const Matrix& x, const Vector& y, const Vector& weights,
                         const LassoOptions& options) {
    const auto n = x.rows();
    const auto p = x.cols();
    if (y.size() != n || weights.size() != n) {
        throw InputError("weighted_lasso: inconsistent sample counts");
    }
    if (n == 0) {
        throw InputError("weighted_lasso: no samples");
    }
    bool identical = true;
    for (Eigen::Index i = 1; i < n && identical; ++i) {
        identical = x.row(i) == x.row(0);
    }
    if (identical) {
        throw InputError("singular surrogate fit: all perturbation samples are identical");
    }
    const double wsum = weights.sum();
    if (!(wsum > 0.0)) {
        throw InputError("singular surrogate fit: sample weights sum to zero");
    }
    const Vector w = weights / wsum;

    Vector x_mean = Vector::Zero(p);
    double y_mean = 0.0;
    if (options.fit_intercept) {
        x_mean = x.transpose() * w;
        y_mean = w.dot(y);
    }
    const Matrix xc = x.rowwise() - x_mean.transpose();
    const Vector yc = y.array() - y_mean;

    Vector col_sq(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        col_sq(j) = (xc.col(j).array().square() * w.array()).sum();
    }

    LinearFit fit;
    fit.coefficients = Vector::Zero(p);
    Vector residual = yc;
    for (int it = 0; it < options.max_iterations; ++it) {
        double max_delta = 0.0;
        double max_coef = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (col_sq(j) <= 0.0) {
                continue;
            }
            const double old = fit.coefficients(j);
            const double rho = (xc.col(j).array() * w.array() * residual.array()).sum() +
                               col_sq(j) * old;
            const double updated = soft_threshold(rho, options.alpha) / col_sq(j);
            if (updated != old) {
                residual -= xc.col(j) * (updated - old);
                fit.coefficients(j) = updated;
            }
            max_delta = std::max(max_delta, std::abs(updated - old));
            max_coef = std::max(max_coef, std::abs(updated));
        }
        fit.iterations = it + 1;
        if (max_delta <= options.tolerance * std::max(1.0, max_coef)) {
            fit.converged = true;
            break;
        }
    }
    fit.intercept = y_mean - x_mean.dot(fit.coefficients);
    return fit;
}

Vector weighted_least_squares(const Matrix& x, const Vector& y, const Vector& weights) {
    const Vector sw = weights.array().sqrt();
    const Matrix xw = sw.asDiagonal() * x;
    const Vector yw = sw.asDiagonal() * y;
    return xw.completeOrthogonalDecomposition().solve(yw);
}

} // namespace xaiopt
