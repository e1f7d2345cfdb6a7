#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pli/core/error.hpp"
#include "pli/distributions.hpp"
#include "pli/ipm.hpp"
#include "pli/simulators.hpp"

namespace pli {

enum class EstimatorKind { kGaussian, kGmm };

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::kGaussian;
  int components = 5;
  EmOptions em;
};

struct PliConfig {
  /// Trust-region bound on KL(q_t || pi_{t-1}).
  double epsilon = 0.5;
  /// Base bandwidth beta; non-positive means 1 / (2N).
  double base_bandwidth = 0.0;
  double eta_min = 1e-6;
  double eta_max = 1e6;
  int max_dual_evaluations = 200;
  double log_eta_tolerance = 1e-6;
  int iterations = 20;
  int samples_per_iter = 5000;
  /// Simulations per particle; non-positive means M = N.
  int sims_per_param = 0;
  EstimatorSpec estimator;
  int threads = 1;
};

struct EtaSolution {
  double eta = 0.0;
  double beta = 0.0;
  double dual = 0.0;
  int evaluations = 0;
  /// Set when at most one particle carries weight and eta was pinned to eta_max.
  bool constraint_inactive = false;
};

struct WeightResult {
  std::vector<double> weights;
  double ess = 0.0;
};

struct InferenceState {
  int iteration = 0;
  DensityModel proposal;
  DensityModel model;
  Matrix particles;
  std::vector<double> scores;
  std::vector<double> weights;
  double base_bandwidth = 0.0;
  double eta = 0.0;
  double beta = 0.0;
  double dual = 0.0;
  double ess = 0.0;
  double empirical_kl = 0.0;
  bool constraint_inactive = false;
  bool bandwidth_retried = false;
};

/// log of the tempered pseudo-likelihood, -score / (2 beta_t).
double pseudo_log_likelihood(double score, double beta_t);

/// Sample-based dual g(eta) of the trust-region problem. Entries with
/// log_prior_ratio = -inf or score = +inf carry no mass.
double dual_value(double eta, std::span<const double> scores, std::span<const double> log_prior_ratio,
                  double epsilon, double base_bandwidth);

/// Maximizes the dual over log(eta) in [eta_min, eta_max] by golden-section search.
EtaSolution optimize_eta(std::span<const double> scores, std::span<const double> log_prior_ratio,
                         const PliConfig& cfg, double base_bandwidth);

/// Self-normalized weights exp((log_prior - log_proposal) / (1 + eta) - score / (2 beta_t)).
WeightResult wml_weights(std::span<const double> scores, std::span<const double> log_prior,
                         std::span<const double> log_proposal, double eta, double beta_t);

/// Weighted maximum-likelihood fit of the configured estimator.
DensityModel fit_estimator(const Matrix& particles, std::span<const double> weights, const EstimatorSpec& spec,
                           RngStream& rng);

/// Resolved base bandwidth for a reference of `n_obs` rows.
double resolve_base_bandwidth(const PliConfig& cfg, Eigen::Index n_obs);

/// One iteration: sample from `proposal`, simulate, score, solve for eta and
/// refit. `iteration` is recorded in the returned state.
InferenceState pli_step(const DensityModel& proposal, int iteration, const TaskSpec& task,
                        const ReferenceScorer& scorer, const PliConfig& cfg, RngStream& rng);

struct PliResult {
  DensityModel model;
  std::vector<InferenceState> states;
};

using StateObserver = std::function<void(const InferenceState&)>;

/// Runs cfg.iterations steps starting from the task prior. Iteration t draws
/// from rng.split(t). The observer, if set, sees every state as it completes.
PliResult pli_run(const TaskSpec& task, const Matrix& reference, const MetricSpec& metric, const PliConfig& cfg,
                  const RngStream& rng, const StateObserver& observer = {});

}  // namespace pli
