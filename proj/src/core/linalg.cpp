#include "pli/core/linalg.hpp"

#include <cmath>

#include "pli/core/error.hpp"

namespace pli {

Matrix cholesky_spd(const Matrix& m) {
  if (m.rows() != m.cols()) throw Error("cholesky_spd: matrix is not square");
  const Eigen::Index n = m.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double diag = m(j, j);
    for (Eigen::Index k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0)) throw Error("not positive definite");
    const double pivot = std::sqrt(diag);
    l(j, j) = pivot;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / pivot;
    }
  }
  return l;
}

Vector weighted_mean(const Matrix& points, std::span<const double> weights) {
  Vector mean = Vector::Zero(points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double w = weights[static_cast<std::size_t>(i)];
    if (w != 0.0) mean += w * points.row(i).transpose();
  }
  return mean;
}

Matrix weighted_covariance(const Matrix& points, std::span<const double> weights, const Vector& mean) {
  const Eigen::Index d = points.cols();
  Matrix cov = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double w = weights[static_cast<std::size_t>(i)];
    if (w == 0.0) continue;
    const Vector centered = points.row(i).transpose() - mean;
    cov.noalias() += w * centered * centered.transpose();
  }
  return 0.5 * (cov + cov.transpose());
}

}  // namespace pli
