#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pli/distributions.hpp"
#include "pli/ipm.hpp"
#include "pli/simulators.hpp"

namespace pli {

struct AbcConfig {
  int particles = 1000;
  int iterations = 200;
  /// PMC: fraction of particles kept per iteration and quantile of the bandwidth.
  double alpha = 0.1;
  /// SMC: target ESS ratio between consecutive bandwidths.
  double smc_alpha = 0.5;
  /// SMC: resample when ESS drops below this fraction of the particle count.
  double resample_fraction = 0.5;
  /// Simulations per particle; non-positive means M = N.
  int sims_per_param = 0;
  int kernel_components = 5;
  EmOptions em;
  int threads = 1;
};

struct ParticlePopulation {
  Matrix particles;
  std::vector<double> weights;
  std::vector<double> scores;
  double bandwidth = 0.0;
};

struct AbcIterationSummary {
  int iteration = 0;
  double bandwidth = 0.0;
  double ess = 0.0;
  /// SMC: move acceptance rate. PMC: share of new proposals among kept particles.
  double acceptance = 0.0;
  double min_score = 0.0;
  double median_score = 0.0;
  double max_score = 0.0;
};

struct AbcResult {
  ParticlePopulation population;
  std::vector<AbcIterationSummary> history;
};

using AbcObserver = std::function<void(const AbcIterationSummary&)>;

struct SmcBandwidth {
  double bandwidth = 0.0;
  std::vector<double> weights;
};

/// Smallest sorted unique score whose indicator-reweighted ESS reaches
/// alpha * ESS(prev_weights). Falls back to the largest finite score when no
/// candidate reaches the target.
SmcBandwidth smc_bandwidth_update(std::span<const double> scores, std::span<const double> prev_weights,
                                  double alpha);

AbcResult smc_abc_run(const TaskSpec& task, const Matrix& reference, const MetricSpec& metric, const AbcConfig& cfg,
                      const RngStream& rng, const AbcObserver& observer = {});

/// Sorted element at index ceil(alpha * n) - 1.
double pmc_quantile_bandwidth(std::span<const double> scores, double alpha);

/// Weighted EM mixture with `components` parts; a single Gaussian with twice the
/// weighted covariance plus jitter when fewer than components * d particles are given.
DensityModel fit_perturbation_kernel(const Matrix& particles, std::span<const double> weights, int components,
                                     RngStream& rng, const EmOptions& em = {});

AbcResult pmc_abc_run(const TaskSpec& task, const Matrix& reference, const MetricSpec& metric, const AbcConfig& cfg,
                      const RngStream& rng, const AbcObserver& observer = {});

}  // namespace pli
