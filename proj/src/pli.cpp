#include "pli/pli.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pli/core/numeric.hpp"

namespace pli {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw Error("length mismatch between scores and log densities");
}

bool carries_mass(double score, double log_ratio) { return std::isfinite(score) && log_ratio > -kInf; }

}  // namespace

double pseudo_log_likelihood(double score, double beta_t) {
  if (!(beta_t > 0.0)) throw Error("bandwidth must be positive");
  return -score / (2.0 * beta_t);
}

double dual_value(double eta, std::span<const double> scores, std::span<const double> log_prior_ratio,
                  double epsilon, double base_bandwidth) {
  check_lengths(scores.size(), log_prior_ratio.size());
  const double scale = 1.0 + eta;
  std::vector<double> terms(scores.size(), -kInf);
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (!carries_mass(scores[k], log_prior_ratio[k])) continue;
    terms[k] = log_prior_ratio[k] / scale - scores[k] / (2.0 * base_bandwidth * scale);
  }
  const double log_k = std::log(static_cast<double>(scores.size()));
  return -eta * epsilon - scale * (log_sum_exp(terms) - log_k);
}

EtaSolution optimize_eta(std::span<const double> scores, std::span<const double> log_prior_ratio,
                         const PliConfig& cfg, double base_bandwidth) {
  check_lengths(scores.size(), log_prior_ratio.size());
  if (scores.size() < 2) throw Error("optimize_eta: need at least two particles");
  if (!(cfg.eta_min > 0.0) || !(cfg.eta_max > cfg.eta_min)) throw ConfigError("invalid eta bounds");

  std::size_t live = 0;
  for (std::size_t k = 0; k < scores.size(); ++k) live += carries_mass(scores[k], log_prior_ratio[k]) ? 1 : 0;
  if (live == 0) {
    throw DegenerateWeightsError("degenerate weights: no particle has finite score and prior density; "
                                 "raise base_bandwidth or widen the proposal");
  }

  EtaSolution out;
  auto dual_at = [&](double log_eta) {
    ++out.evaluations;
    return dual_value(std::exp(log_eta), scores, log_prior_ratio, cfg.epsilon, base_bandwidth);
  };
  auto finish = [&](double eta, double dual) {
    out.eta = eta;
    out.dual = dual;
    out.beta = (1.0 + eta) * base_bandwidth;
    return out;
  };

  if (live == 1) {
    out.constraint_inactive = true;
    return finish(cfg.eta_max, dual_at(std::log(cfg.eta_max)));
  }

  const double lo0 = std::log(cfg.eta_min);
  const double hi0 = std::log(cfg.eta_max);
  const double f_lo0 = dual_at(lo0);
  const double f_hi0 = dual_at(hi0);

  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = lo0;
  double hi = hi0;
  double c = hi - r * (hi - lo);
  double d = lo + r * (hi - lo);
  double fc = dual_at(c);
  double fd = dual_at(d);
  while (hi - lo > cfg.log_eta_tolerance && out.evaluations < cfg.max_dual_evaluations) {
    if (fc >= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - r * (hi - lo);
      fc = dual_at(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + r * (hi - lo);
      fd = dual_at(d);
    }
  }
  double best_x = fc >= fd ? c : d;
  double best_f = std::max(fc, fd);
  // The optimum may sit on a bound, which the interior bracket only approaches.
  if (f_lo0 >= best_f) {
    best_x = lo0;
    best_f = f_lo0;
  }
  if (f_hi0 > best_f) {
    best_x = hi0;
    best_f = f_hi0;
  }
  const double eta = best_x == lo0 ? cfg.eta_min : best_x == hi0 ? cfg.eta_max : std::exp(best_x);
  return finish(eta, best_f);
}

WeightResult wml_weights(std::span<const double> scores, std::span<const double> log_prior,
                         std::span<const double> log_proposal, double eta, double beta_t) {
  check_lengths(scores.size(), log_prior.size());
  check_lengths(scores.size(), log_proposal.size());
  if (!(beta_t > 0.0)) throw Error("bandwidth must be positive");
  std::vector<double> log_w(scores.size(), -kInf);
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (!std::isfinite(scores[k]) || log_prior[k] == -kInf) continue;
    log_w[k] = (log_prior[k] - log_proposal[k]) / (1.0 + eta) + pseudo_log_likelihood(scores[k], beta_t);
  }
  WeightResult out;
  try {
    out.weights = normalize_log_weights(log_w);
  } catch (const DegenerateWeightsError&) {
    throw DegenerateWeightsError("degenerate weights: all particle weights underflow; raise base_bandwidth");
  }
  out.ess = effective_sample_size(out.weights);
  return out;
}

DensityModel fit_estimator(const Matrix& particles, std::span<const double> weights, const EstimatorSpec& spec,
                           RngStream& rng) {
  if (spec.kind == EstimatorKind::kGaussian) return fit_gaussian_weighted(particles, weights, spec.em.jitter);
  return fit_gmm_weighted_em(particles, weights, spec.components, rng, spec.em);
}

double resolve_base_bandwidth(const PliConfig& cfg, Eigen::Index n_obs) {
  if (cfg.base_bandwidth > 0.0) return cfg.base_bandwidth;
  if (n_obs < 1) throw ConfigError("reference set is empty");
  return 1.0 / (2.0 * static_cast<double>(n_obs));
}

InferenceState pli_step(const DensityModel& proposal, int iteration, const TaskSpec& task,
                        const ReferenceScorer& scorer, const PliConfig& cfg, RngStream& rng) {
  if (cfg.samples_per_iter < 2) throw ConfigError("samples_per_iter must be at least 2");
  if (!(cfg.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  const Eigen::Index k_total = cfg.samples_per_iter;
  const Eigen::Index m = cfg.sims_per_param > 0 ? cfg.sims_per_param : scorer.reference().rows();

  InferenceState state{iteration, proposal, proposal, {}, {}, {}};
  RngStream sample_rng = rng.split(0);
  state.particles = sample(proposal, k_total, sample_rng);
  const std::vector<double> log_prior = log_prob_rows(task.prior, state.particles);
  const std::vector<double> log_proposal = log_prob_rows(proposal, state.particles);

  // Particles outside the prior support are never simulated.
  state.scores.assign(static_cast<std::size_t>(k_total), kInf);
  const RngStream sim_rng = rng.split(1);
  parallel_for(static_cast<std::size_t>(k_total), cfg.threads, [&](std::size_t k) {
    if (log_prior[k] == -kInf) return;
    RngStream child = sim_rng.split(k);
    const Vector xi = state.particles.row(static_cast<Eigen::Index>(k)).transpose();
    const double s = scorer(task.simulate(xi, m, child));
    state.scores[k] = std::isnan(s) ? kInf : std::max(0.0, s);
  });

  std::vector<double> log_ratio(log_prior.size(), -kInf);
  for (std::size_t k = 0; k < log_ratio.size(); ++k) {
    if (log_prior[k] > -kInf) log_ratio[k] = log_prior[k] - log_proposal[k];
  }

  state.base_bandwidth = resolve_base_bandwidth(cfg, scorer.reference().rows());
  for (int attempt = 0;; ++attempt) {
    try {
      const EtaSolution eta = optimize_eta(state.scores, log_ratio, cfg, state.base_bandwidth);
      WeightResult w = wml_weights(state.scores, log_prior, log_proposal, eta.eta, eta.beta);
      state.eta = eta.eta;
      state.beta = eta.beta;
      state.dual = eta.dual;
      state.constraint_inactive = eta.constraint_inactive;
      state.weights = std::move(w.weights);
      state.ess = w.ess;
      break;
    } catch (const DegenerateWeightsError&) {
      if (attempt > 0) throw;
      state.base_bandwidth *= 2.0;
      state.bandwidth_retried = true;
    }
  }
  state.empirical_kl = empirical_kl_to_uniform(state.weights);

  RngStream fit_rng = rng.split(2);
  state.model = fit_estimator(state.particles, state.weights, cfg.estimator, fit_rng);
  return state;
}

PliResult pli_run(const TaskSpec& task, const Matrix& reference, const MetricSpec& metric, const PliConfig& cfg,
                  const RngStream& rng, const StateObserver& observer) {
  if (cfg.iterations < 0) throw ConfigError("iterations must be non-negative");
  if (reference.cols() != task.obs_dim) throw ConfigError("reference dimension does not match the task");
  const ReferenceScorer scorer(reference, metric);
  PliResult result{task.prior, {}};
  result.states.reserve(static_cast<std::size_t>(cfg.iterations));
  for (int t = 0; t < cfg.iterations; ++t) {
    RngStream step_rng = rng.split(static_cast<std::uint64_t>(t));
    try {
      result.states.push_back(pli_step(result.model, t, task, scorer, cfg, step_rng));
    } catch (const DegenerateWeightsError& e) {
      throw DegenerateWeightsError("iteration " + std::to_string(t) + ": " + e.what());
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw Error("iteration " + std::to_string(t) + ": " + e.what());
    }
    result.model = result.states.back().model;
    if (observer) observer(result.states.back());
  }
  return result;
}

}  // namespace pli
