#pragma once

#include <Eigen/Dense>
#include <span>

namespace pli {

/// Row-major so that each observation or particle is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Lower-triangular L with L * L^T = m. Throws pli::Error("not positive definite")
/// on a non-positive pivot; only the lower triangle of `m` is read.
Matrix cholesky_spd(const Matrix& m);

/// Weighted mean of the rows of `points`.
Vector weighted_mean(const Matrix& points, std::span<const double> weights);

/// Weighted (biased, weights summing to one) covariance about `mean`.
Matrix weighted_covariance(const Matrix& points, std::span<const double> weights, const Vector& mean);

}  // namespace pli
