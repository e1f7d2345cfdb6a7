#include "pli/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "pli/core/error.hpp"
#include "pli/core/numeric.hpp"

namespace pli {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPriorHalfWidth = 10.0;

double gmm_log_likelihood(const Matrix& reference, double x, double y) {
  const double log_half = std::log(0.5);
  const double wide = log_half - std::log(2.0 * std::numbers::pi);
  const double narrow = log_half - std::log(2.0 * std::numbers::pi * 0.01);
  double total = 0.0;
  for (Eigen::Index i = 0; i < reference.rows(); ++i) {
    const double dx = reference(i, 0) - x;
    const double dy = reference(i, 1) - y;
    const double r2 = dx * dx + dy * dy;
    const double a = wide - 0.5 * r2;
    const double b = narrow - 50.0 * r2;
    const double hi = std::max(a, b);
    total += hi + std::log1p(std::exp(std::min(a, b) - hi));
  }
  return total;
}

}  // namespace

GaussianFull gaussian_location_reference(const Matrix& reference) {
  const Eigen::Index d = reference.cols();
  const auto n = static_cast<double>(reference.rows());
  const Vector mean = reference.colwise().sum().transpose() / (n + 1.0);
  return GaussianFull(mean, (0.1 / (n + 1.0)) * Matrix::Identity(d, d));
}

Eigen::Vector2d GridPosterior::center(std::size_t index) const {
  const auto ix = static_cast<double>(index / static_cast<std::size_t>(resolution));
  const auto iy = static_cast<double>(index % static_cast<std::size_t>(resolution));
  return {lower(0) + (ix + 0.5) * cell(0), lower(1) + (iy + 0.5) * cell(1)};
}

Eigen::Vector2d GridPosterior::mean() const {
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < mass.size(); ++i) m += mass[i] * center(i);
  return m;
}

Eigen::Matrix2d GridPosterior::covariance() const {
  const Eigen::Vector2d m = mean();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < mass.size(); ++i) {
    const Eigen::Vector2d c = center(i) - m;
    cov += mass[i] * c * c.transpose();
  }
  return cov;
}

GridPosterior gmm_task_grid_posterior(const Matrix& reference, const Eigen::Vector2d& lower,
                                      const Eigen::Vector2d& upper, int resolution) {
  if (reference.cols() != 2) throw Error("gmm grid posterior needs 2-D observations");
  if (resolution < 1 || !(upper.array() > lower.array()).all()) throw Error("invalid grid specification");
  GridPosterior grid{lower, (upper - lower) / resolution, resolution, {}};
  const auto cells = static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution);
  std::vector<double> log_mass(cells, kNegInf);
  for (std::size_t i = 0; i < cells; ++i) {
    const Eigen::Vector2d c = grid.center(i);
    if (c.cwiseAbs().maxCoeff() > kPriorHalfWidth) continue;
    log_mass[i] = gmm_log_likelihood(reference, c(0), c(1));
  }
  grid.mass = normalize_log_weights(log_mass);
  return grid;
}

GridPosterior gmm_task_refined_posterior(const Matrix& reference, int resolution) {
  const Eigen::Vector2d box(kPriorHalfWidth, kPriorHalfWidth);
  const GridPosterior coarse = gmm_task_grid_posterior(reference, -box, box, resolution);
  const double peak = *std::max_element(coarse.mass.begin(), coarse.mass.end());
  const double floor = peak * std::exp(-30.0);
  Eigen::Vector2d lo = box;
  Eigen::Vector2d hi = -box;
  for (std::size_t i = 0; i < coarse.mass.size(); ++i) {
    if (coarse.mass[i] <= floor) continue;
    const Eigen::Vector2d c = coarse.center(i);
    lo = lo.cwiseMin(c - 0.5 * coarse.cell);
    hi = hi.cwiseMax(c + 0.5 * coarse.cell);
  }
  lo = (lo - coarse.cell).cwiseMax(-box);
  hi = (hi + coarse.cell).cwiseMin(box);
  return gmm_task_grid_posterior(reference, lo, hi, resolution);
}

Matrix sample_grid_posterior(const GridPosterior& grid, Eigen::Index count, RngStream& rng) {
  std::vector<double> cumulative(grid.mass.size());
  std::partial_sum(grid.mass.begin(), grid.mass.end(), cumulative.begin());
  Matrix out(count, 2);
  for (Eigen::Index j = 0; j < count; ++j) {
    const double u = rng.uniform() * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
    const Eigen::Vector2d c = grid.center(idx);
    out(j, 0) = c(0) + (rng.uniform() - 0.5) * grid.cell(0);
    out(j, 1) = c(1) + (rng.uniform() - 0.5) * grid.cell(1);
  }
  return out;
}

Matrix gmm_task_reference_samples(const Matrix& reference, Eigen::Index count, RngStream& rng, int resolution) {
  return sample_grid_posterior(gmm_task_refined_posterior(reference, resolution), count, rng);
}

PosteriorMetrics posterior_sample_metrics(const Matrix& model_samples, const Matrix& reference_samples,
                                          const MmdConfig& mmd, const SinkhornConfig& sinkhorn,
                                          Eigen::Index max_w2_points) {
  PosteriorMetrics out;
  out.mmd2 = mmd2_unbiased(model_samples, reference_samples, mmd);
  const Eigen::Index a = std::min(max_w2_points, model_samples.rows());
  const Eigen::Index b = std::min(max_w2_points, reference_samples.rows());
  const SinkhornResult w2 = sinkhorn_solve(model_samples.topRows(a), reference_samples.topRows(b), sinkhorn);
  out.w2 = w2.cost;
  out.w2_converged = w2.converged;
  out.w2_points = std::max(a, b);
  return out;
}

Matrix draw_in_support(const DensityModel& model, const DensityModel& prior, Eigen::Index count, RngStream& rng) {
  if (count < 1) throw Error("draw count must be positive");
  Matrix out(count, dim(model));
  Eigen::Index kept = 0;
  for (int round = 0; round < 10 && kept < count; ++round) {
    RngStream round_rng = rng.split(static_cast<std::uint64_t>(round));
    const Matrix draws = sample(model, count, round_rng);
    const std::vector<double> lp = log_prob_rows(prior, draws);
    for (Eigen::Index i = 0; i < draws.rows() && kept < count; ++i) {
      if (lp[static_cast<std::size_t>(i)] > kNegInf) out.row(kept++) = draws.row(i);
    }
  }
  if (kept < count) throw Error("model mass outside prior: more than 90% of parameter draws rejected");
  return out;
}

PpcResult posterior_predictive_check(const Matrix& parameters, const TaskSpec& task, const Matrix& reference,
                                     RngStream& rng, const PpcOptions& options) {
  if (parameters.cols() != task.param_dim) throw Error("parameter dimension does not match the task");
  if (reference.cols() != task.obs_dim) throw Error("reference dimension does not match the task");
  const auto n = static_cast<std::size_t>(parameters.rows());
  if (n == 0) throw Error("posterior predictive check needs parameters");
  const ReferenceScorer mmd(reference, MetricSpec{MetricKind::kMmd, options.mmd, options.sinkhorn});
  PpcResult out;

  if (options.mode == PpcMode::kPooled) {
    Matrix pooled(parameters.rows(), task.obs_dim);
    parallel_for(n, options.threads, [&](std::size_t k) {
      RngStream child = rng.split(k);
      const Vector xi = parameters.row(static_cast<Eigen::Index>(k)).transpose();
      pooled.row(static_cast<Eigen::Index>(k)) = task.simulate(xi, 1, child);
    });
    out.mmd2 = mmd(pooled);
    if (options.compute_w2) out.w2 = sinkhorn_w2(reference, pooled, options.sinkhorn);
    return out;
  }

  const Eigen::Index m = options.sims_per_param > 0 ? options.sims_per_param : reference.rows();
  std::vector<double> mmd_values(n);
  std::vector<double> w2_values(n, 0.0);
  parallel_for(n, options.threads, [&](std::size_t k) {
    RngStream child = rng.split(k);
    const Vector xi = parameters.row(static_cast<Eigen::Index>(k)).transpose();
    const Matrix sims = task.simulate(xi, m, child);
    mmd_values[k] = mmd(sims);
    if (options.compute_w2) w2_values[k] = sinkhorn_w2(reference, sims, options.sinkhorn);
  });
  // Ordered sums keep the result independent of the thread count.
  out.mmd2 = std::accumulate(mmd_values.begin(), mmd_values.end(), 0.0) / static_cast<double>(n);
  if (options.compute_w2) out.w2 = std::accumulate(w2_values.begin(), w2_values.end(), 0.0) / static_cast<double>(n);
  return out;
}

PpcResult posterior_predictive_check(const DensityModel& model, const TaskSpec& task, const Matrix& reference,
                                     RngStream& rng, const PpcOptions& options) {
  RngStream draw_rng = rng.split(0);
  const Matrix params = draw_in_support(model, task.prior, options.sims, draw_rng);
  RngStream sim_rng = rng.split(1);
  return posterior_predictive_check(params, task, reference, sim_rng, options);
}

double furuta_sync_error(const Matrix& parameters, const Matrix& reference_states, const Matrix& reference_trajs,
                         const FurutaOptions& options, int threads) {
  if (reference_states.rows() < 1 || reference_states.rows() != reference_trajs.rows()) {
    throw Error("furuta reference states and trajectories must have matching, non-zero row counts");
  }
  const auto n = static_cast<std::size_t>(parameters.rows());
  if (n == 0) throw Error("furuta_sync_error needs parameters");
  std::vector<double> errors(n);
  parallel_for(n, threads, [&](std::size_t k) {
    const Eigen::Index r = static_cast<Eigen::Index>(k) % reference_states.rows();
    const FurutaParams p = FurutaParams::from_vector(parameters.row(static_cast<Eigen::Index>(k)).transpose(), options);
    const Vector traj = furuta_rollout(p, reference_states.row(r).transpose(), options);
    if (traj.size() != reference_trajs.cols()) throw Error("furuta trajectory width mismatch");
    errors[k] = (reference_trajs.row(r).transpose() - traj).cwiseAbs().sum();
  });
  return std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(n);
}

double furuta_sync_error(const DensityModel& model, const DensityModel& prior, const Matrix& reference_states,
                         const Matrix& reference_trajs, Eigen::Index sims, RngStream& rng,
                         const FurutaOptions& options, int threads) {
  const Matrix params = draw_in_support(model, prior, sims, rng);
  return furuta_sync_error(params, reference_states, reference_trajs, options, threads);
}

}  // namespace pli
