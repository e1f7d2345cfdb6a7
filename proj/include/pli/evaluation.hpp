#pragma once

#include <optional>
#include <string>

#include "pli/distributions.hpp"
#include "pli/ipm.hpp"
#include "pli/simulators.hpp"

namespace pli {

/// Conjugate posterior of the Gaussian location task, N(sum x / (N + 1), 0.1 / (N + 1) I).
GaussianFull gaussian_location_reference(const Matrix& reference);

/// Normalized cell masses of the GMM-task posterior on a regular grid.
struct GridPosterior {
  Eigen::Vector2d lower;
  Eigen::Vector2d cell;
  int resolution = 0;
  /// Row-major over (x index, y index).
  std::vector<double> mass;

  [[nodiscard]] Eigen::Vector2d center(std::size_t index) const;
  [[nodiscard]] Eigen::Vector2d mean() const;
  [[nodiscard]] Eigen::Matrix2d covariance() const;
};

/// Log posterior of the GMM task (uniform prior on [-10, 10]^2) on a grid over
/// [lower, upper], normalized over the grid.
GridPosterior gmm_task_grid_posterior(const Matrix& reference, const Eigen::Vector2d& lower,
                                      const Eigen::Vector2d& upper, int resolution = 400);

/// Two-stage grid posterior: a coarse grid over the prior box, then a grid of
/// the same resolution over the cells within 30 nats of the coarse maximum.
GridPosterior gmm_task_refined_posterior(const Matrix& reference, int resolution = 400);

/// Exact-posterior samples for the GMM task: cells drawn by mass, jittered uniformly within the cell.
Matrix gmm_task_reference_samples(const Matrix& reference, Eigen::Index count, RngStream& rng,
                                  int resolution = 400);
Matrix sample_grid_posterior(const GridPosterior& grid, Eigen::Index count, RngStream& rng);

struct PosteriorMetrics {
  double mmd2 = 0.0;
  double w2 = 0.0;
  bool w2_converged = false;
  /// Rows per side used for the transport estimate.
  Eigen::Index w2_points = 0;
};

/// MMD^2 on all rows; entropic W2 on the first `max_w2_points` rows of each set.
PosteriorMetrics posterior_sample_metrics(const Matrix& model_samples, const Matrix& reference_samples,
                                          const MmdConfig& mmd = {}, const SinkhornConfig& sinkhorn = {},
                                          Eigen::Index max_w2_points = 1000);

/// `count` parameter draws from `model` that fall inside the prior support.
/// Throws "model mass outside prior" when more than 90% of draws are rejected.
Matrix draw_in_support(const DensityModel& model, const DensityModel& prior, Eigen::Index count, RngStream& rng);

enum class PpcMode { kPerParameterMean, kPooled };

struct PpcOptions {
  Eigen::Index sims = 1000;
  PpcMode mode = PpcMode::kPerParameterMean;
  /// Observations per parameter in per-parameter mode; non-positive means N.
  Eigen::Index sims_per_param = 0;
  MmdConfig mmd;
  SinkhornConfig sinkhorn;
  bool compute_w2 = true;
  int threads = 1;
};

struct PpcResult {
  double mmd2 = 0.0;
  std::optional<double> w2;
};

PpcResult posterior_predictive_check(const Matrix& parameters, const TaskSpec& task, const Matrix& reference,
                                     RngStream& rng, const PpcOptions& options = {});
PpcResult posterior_predictive_check(const DensityModel& model, const TaskSpec& task, const Matrix& reference,
                                     RngStream& rng, const PpcOptions& options = {});

/// Mean over rows k of sum |x*_{k mod N} - x_k|, where x_k rolls out parameters
/// row k from reference initial state k mod N.
double furuta_sync_error(const Matrix& parameters, const Matrix& reference_states, const Matrix& reference_trajs,
                         const FurutaOptions& options = {}, int threads = 1);
double furuta_sync_error(const DensityModel& model, const DensityModel& prior, const Matrix& reference_states,
                         const Matrix& reference_trajs, Eigen::Index sims, RngStream& rng,
                         const FurutaOptions& options = {}, int threads = 1);

struct EvalReport {
  std::string task;
  std::string method;
  Eigen::Index n_obs = 0;
  Eigen::Index sims_per_param = 0;
  std::uint64_t seed = 0;
  int iteration_count = 0;
  std::optional<double> mmd2_posterior;
  std::optional<double> w2_posterior;
  std::optional<double> ppc_mmd2;
  std::optional<double> ppc_w2;
  std::optional<double> furuta_sync_error;
  double wall_seconds = 0.0;
};

}  // namespace pli
