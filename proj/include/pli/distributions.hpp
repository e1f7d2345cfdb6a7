#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "pli/core/linalg.hpp"
#include "pli/core/rng.hpp"

namespace pli {

/// Diagonal floor added to every fitted covariance.
inline constexpr double kCovarianceJitter = 1e-6;

/// Uniform density on an axis-aligned box.
struct BoxUniform {
  Vector lower;
  Vector upper;

  BoxUniform(Vector lower_bounds, Vector upper_bounds);
  [[nodiscard]] bool contains(const Eigen::Ref<const Vector>& x) const;
};

/// Multivariate normal with a dense covariance. The Cholesky factor is
/// computed once on construction.
class GaussianFull {
 public:
  GaussianFull(Vector mean, Matrix covariance);

  [[nodiscard]] const Vector& mean() const { return mean_; }
  [[nodiscard]] const Matrix& covariance() const { return covariance_; }
  [[nodiscard]] const Matrix& cholesky() const { return cholesky_; }
  [[nodiscard]] Eigen::Index dim() const { return mean_.size(); }
  [[nodiscard]] double log_prob(const Eigen::Ref<const Vector>& x) const;

 private:
  Vector mean_;
  Matrix covariance_;
  Matrix cholesky_;
  double log_normalizer_;
};

/// Independent log-normal marginals, parameterised in log space.
struct LogNormalDiag {
  Vector log_mean;
  Vector log_std;

  LogNormalDiag(Vector mu, Vector sigma);
};

struct GaussianMixture {
  Vector weights;
  std::vector<GaussianFull> components;

  GaussianMixture(Vector mixture_weights, std::vector<GaussianFull> parts);
};

using DensityModel = std::variant<BoxUniform, GaussianFull, LogNormalDiag, GaussianMixture>;

Eigen::Index dim(const DensityModel& model);

/// `count` i.i.d. rows.
Matrix sample(const DensityModel& model, Eigen::Index count, RngStream& rng);

/// Exact log-density, -inf outside the support.
double log_prob(const DensityModel& model, const Eigen::Ref<const Vector>& x);

/// log_prob for every row of `points`.
std::vector<double> log_prob_rows(const DensityModel& model, const Matrix& points);

/// Closed-form weighted maximum likelihood Gaussian with covariance floor `jitter`.
GaussianFull fit_gaussian_weighted(const Matrix& points, std::span<const double> weights,
                                   double jitter = kCovarianceJitter);

struct EmOptions {
  int max_iters = 200;
  double tol = 1e-8;
  int restarts = 3;
  double jitter = kCovarianceJitter;
};

struct EmDiagnostics {
  /// Weighted log-likelihood after each E-step of the restart that was kept.
  std::vector<double> log_likelihood_trace;
  int reinitializations = 0;
  int dropped_components = 0;
};

/// Weighted EM for a k-component Gaussian mixture. Seeding is k-means++ on a
/// weight-resampled copy of the points; the restart with the best final
/// weighted log-likelihood is returned.
GaussianMixture fit_gmm_weighted_em(const Matrix& points, std::span<const double> weights, int k,
                                    RngStream& rng, const EmOptions& options = {},
                                    EmDiagnostics* diagnostics = nullptr);

/// Systematic resampling: `count` indices drawn in proportion to normalized `weights`.
std::vector<Eigen::Index> systematic_resample(std::span<const double> weights, std::size_t count, RngStream& rng);

/// Sum_i w_i log q(x_i).
double weighted_log_likelihood(const DensityModel& model, const Matrix& points, std::span<const double> weights);

}  // namespace pli
