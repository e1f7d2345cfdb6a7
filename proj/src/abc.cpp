#include "pli/abc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pli/core/error.hpp"
#include "pli/core/numeric.hpp"

namespace pli {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate(const TaskSpec& task, const Matrix& reference, const AbcConfig& cfg) {
  if (cfg.particles < 2) throw ConfigError("abc: need at least two particles");
  if (cfg.iterations < 0) throw ConfigError("abc: iterations must be non-negative");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("abc: alpha must lie in (0, 1)");
  if (!(cfg.smc_alpha > 0.0 && cfg.smc_alpha <= 1.0)) throw ConfigError("abc: smc_alpha must lie in (0, 1]");
  if (reference.cols() != task.obs_dim) throw ConfigError("reference dimension does not match the task");
}

Eigen::Index sims_per_param(const AbcConfig& cfg, const Matrix& reference) {
  return cfg.sims_per_param > 0 ? cfg.sims_per_param : reference.rows();
}

// Scores every row whose prior log-density is finite; the rest get +inf.
std::vector<double> score_rows(const TaskSpec& task, const ReferenceScorer& scorer, const Matrix& particles,
                               std::span<const double> log_prior, Eigen::Index m, const RngStream& rng,
                               int threads) {
  std::vector<double> scores(static_cast<std::size_t>(particles.rows()), kInf);
  parallel_for(scores.size(), threads, [&](std::size_t k) {
    if (log_prior[k] == -kInf) return;
    RngStream child = rng.split(k);
    const Vector xi = particles.row(static_cast<Eigen::Index>(k)).transpose();
    const double s = scorer(task.simulate(xi, m, child));
    scores[k] = std::isnan(s) ? kInf : s;
  });
  return scores;
}

AbcIterationSummary summarize(int iteration, double bandwidth, std::span<const double> weights,
                              std::span<const double> scores, double acceptance) {
  std::vector<double> alive;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (weights[k] > 0.0) alive.push_back(scores[k]);
  }
  std::sort(alive.begin(), alive.end());
  AbcIterationSummary out{iteration, bandwidth, effective_sample_size(weights), acceptance};
  if (!alive.empty()) {
    out.min_score = alive.front();
    out.median_score = alive[(alive.size() - 1) / 2];
    out.max_score = alive.back();
  }
  return out;
}

Matrix gather_rows(const Matrix& m, std::span<const Eigen::Index> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

template <class T>
std::vector<T> gather(const std::vector<T>& v, std::span<const Eigen::Index> idx) {
  std::vector<T> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[static_cast<std::size_t>(idx[i])];
  return out;
}

// Normalized w * 1{s <= bandwidth}; throws when nothing survives.
std::vector<double> indicator_weights(std::span<const double> log_w, std::span<const double> scores,
                                      double bandwidth) {
  std::vector<double> masked(log_w.size(), -kInf);
  for (std::size_t k = 0; k < log_w.size(); ++k) {
    if (scores[k] <= bandwidth) masked[k] = log_w[k];
  }
  try {
    return normalize_log_weights(masked);
  } catch (const DegenerateWeightsError&) {
    throw Error("prior-kernel mismatch: every retained particle has zero weight");
  }
}

}  // namespace

SmcBandwidth smc_bandwidth_update(std::span<const double> scores, std::span<const double> prev_weights,
                                  double alpha) {
  if (scores.size() != prev_weights.size()) throw Error("length mismatch between scores and weights");
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (prev_weights[k] > 0.0 && std::isfinite(scores[k])) order.push_back(k);
  }
  if (order.empty()) throw Error("all particles rejected");
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  const double target = alpha * effective_sample_size(prev_weights) * (1.0 - 1e-12);
  double sum = 0.0;
  double sum_sq = 0.0;
  double bandwidth = scores[order.back()];
  for (std::size_t i = 0; i < order.size(); ++i) {
    const double w = prev_weights[order[i]];
    sum += w;
    sum_sq += w * w;
    const bool group_end = i + 1 == order.size() || scores[order[i + 1]] != scores[order[i]];
    if (group_end && sum * sum / sum_sq >= target) {
      bandwidth = scores[order[i]];
      break;
    }
  }

  SmcBandwidth out{bandwidth, std::vector<double>(scores.size(), 0.0)};
  double total = 0.0;
  for (const std::size_t k : order) {
    if (scores[k] <= bandwidth) total += prev_weights[k];
  }
  for (const std::size_t k : order) {
    if (scores[k] <= bandwidth) out.weights[k] = prev_weights[k] / total;
  }
  return out;
}

AbcResult smc_abc_run(const TaskSpec& task, const Matrix& reference, const MetricSpec& metric, const AbcConfig& cfg,
                      const RngStream& rng, const AbcObserver& observer) {
  validate(task, reference, cfg);
  const ReferenceScorer scorer(reference, metric);
  const Eigen::Index m = sims_per_param(cfg, reference);
  const Eigen::Index k_total = cfg.particles;
  const Eigen::Index d = task.param_dim;

  const RngStream init = rng.split(0);
  RngStream draw = init.split(0);
  Matrix particles = sample(task.prior, k_total, draw);
  std::vector<double> log_prior = log_prob_rows(task.prior, particles);
  std::vector<double> scores = score_rows(task, scorer, particles, log_prior, m, init.split(1), cfg.threads);
  const auto finite = static_cast<double>(std::count_if(scores.begin(), scores.end(), [](double s) { return std::isfinite(s); }));
  if (finite == 0.0) throw Error("all particles rejected");
  std::vector<double> weights(scores.size());
  std::transform(scores.begin(), scores.end(), weights.begin(),
                 [finite](double s) { return std::isfinite(s) ? 1.0 / finite : 0.0; });
  double bandwidth = kInf;

  AbcResult result;
  result.history.push_back(summarize(0, bandwidth, weights, scores, 1.0));
  if (observer) observer(result.history.back());

  for (int t = 1; t <= cfg.iterations; ++t) {
    const RngStream step = rng.split(static_cast<std::uint64_t>(t));
    SmcBandwidth update = smc_bandwidth_update(scores, weights, cfg.smc_alpha);
    bandwidth = update.bandwidth;
    weights = std::move(update.weights);

    if (effective_sample_size(weights) < cfg.resample_fraction * static_cast<double>(k_total)) {
      RngStream resample_rng = step.split(0);
      const auto idx = systematic_resample(weights, static_cast<std::size_t>(k_total), resample_rng);
      particles = gather_rows(particles, idx);
      scores = gather(scores, idx);
      log_prior = gather(log_prior, idx);
      std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(k_total));
    }

    // Metropolis-Hastings move targeting p(xi) 1{s <= bandwidth}; weights are invariant.
    const Vector mean = weighted_mean(particles, weights);
    Matrix step_cov = 2.0 * weighted_covariance(particles, weights, mean);
    step_cov.diagonal().array() += kCovarianceJitter;
    const Matrix chol = cholesky_spd(step_cov);
    const RngStream move_rng = step.split(1);
    std::vector<char> accepted(static_cast<std::size_t>(k_total), 0);
    Matrix proposed = particles;
    std::vector<double> proposed_scores = scores;
    std::vector<double> proposed_log_prior = log_prior;
    parallel_for(static_cast<std::size_t>(k_total), cfg.threads, [&](std::size_t k) {
      if (weights[k] <= 0.0) return;
      RngStream child = move_rng.split(k);
      Vector z(d);
      for (Eigen::Index j = 0; j < d; ++j) z(j) = child.normal();
      const Vector xi = particles.row(static_cast<Eigen::Index>(k)).transpose() +
                        chol.triangularView<Eigen::Lower>() * z;
      const double lp = log_prob(task.prior, xi);
      const double log_u = std::log(child.uniform());
      if (lp == -kInf || log_u >= lp - log_prior[k]) return;
      RngStream sim_rng = child.split(1);
      const double s = scorer(task.simulate(xi, m, sim_rng));
      if (!(s <= bandwidth)) return;
      proposed.row(static_cast<Eigen::Index>(k)) = xi.transpose();
      proposed_scores[k] = s;
      proposed_log_prior[k] = lp;
      accepted[k] = 1;
    });
    particles = std::move(proposed);
    scores = std::move(proposed_scores);
    log_prior = std::move(proposed_log_prior);

    std::size_t alive = 0;
    std::size_t moved = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      alive += weights[k] > 0.0 ? 1 : 0;
      moved += accepted[k] ? 1 : 0;
    }
    const double rate = alive ? static_cast<double>(moved) / static_cast<double>(alive) : 0.0;
    result.history.push_back(summarize(t, bandwidth, weights, scores, rate));
    if (observer) observer(result.history.back());
  }

  result.population = {std::move(particles), std::move(weights), std::move(scores), bandwidth};
  return result;
}

double pmc_quantile_bandwidth(std::span<const double> scores, double alpha) {
  return lower_quantile(std::vector<double>(scores.begin(), scores.end()), alpha);
}

DensityModel fit_perturbation_kernel(const Matrix& particles, std::span<const double> weights, int components,
                                     RngStream& rng, const EmOptions& em) {
  const Eigen::Index n = particles.rows();
  if (n < 2) throw Error("perturbation kernel needs at least two particles");
  if (components < 1 || n < static_cast<Eigen::Index>(components) * particles.cols()) {
    const Vector mean = weighted_mean(particles, weights);
    Matrix cov = 2.0 * weighted_covariance(particles, weights, mean);
    cov.diagonal().array() += em.jitter;
    return GaussianFull(mean, cov);
  }
  return fit_gmm_weighted_em(particles, weights, components, rng, em);
}

AbcResult pmc_abc_run(const TaskSpec& task, const Matrix& reference, const MetricSpec& metric, const AbcConfig& cfg,
                      const RngStream& rng, const AbcObserver& observer) {
  validate(task, reference, cfg);
  const ReferenceScorer scorer(reference, metric);
  const Eigen::Index m = sims_per_param(cfg, reference);
  const auto k_total = static_cast<std::size_t>(cfg.particles);
  const auto k_keep = static_cast<std::size_t>(std::ceil(cfg.alpha * static_cast<double>(k_total) - 1e-9));
  if (k_keep < 2 || k_keep >= k_total) throw ConfigError("abc: alpha * particles must lie in [2, particles)");

  const RngStream init = rng.split(0);
  RngStream draw = init.split(0);
  Matrix particles = sample(task.prior, static_cast<Eigen::Index>(k_total), draw);
  std::vector<double> log_prior = log_prob_rows(task.prior, particles);
  std::vector<double> scores = score_rows(task, scorer, particles, log_prior, m, init.split(1), cfg.threads);
  // Unnormalized log importance weights p / q; prior draws start at 1.
  std::vector<double> log_w(k_total, 0.0);
  for (std::size_t k = 0; k < k_total; ++k) {
    if (log_prior[k] == -kInf) log_w[k] = -kInf;
  }
  double bandwidth = pmc_quantile_bandwidth(scores, cfg.alpha);

  AbcResult result;
  result.history.push_back(summarize(0, bandwidth, indicator_weights(log_w, scores, bandwidth), scores, 1.0));
  if (observer) observer(result.history.back());

  for (int t = 1; t <= cfg.iterations; ++t) {
    const RngStream step = rng.split(static_cast<std::uint64_t>(t));
    std::vector<Eigen::Index> order(k_total);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return scores[static_cast<std::size_t>(a)] < scores[static_cast<std::size_t>(b)];
    });
    order.resize(k_keep);

    const Matrix kept = gather_rows(particles, order);
    const std::vector<double> kept_log_w = gather(log_w, order);
    std::vector<double> kept_weights;
    try {
      kept_weights = normalize_log_weights(kept_log_w);
    } catch (const DegenerateWeightsError&) {
      throw Error("prior-kernel mismatch: every kept particle has zero weight");
    }
    RngStream fit_rng = step.split(0);
    const DensityModel kernel = fit_perturbation_kernel(kept, kept_weights, cfg.kernel_components, fit_rng, cfg.em);

    const auto n_new = static_cast<Eigen::Index>(k_total - k_keep);
    RngStream propose_rng = step.split(1);
    const Matrix fresh = sample(kernel, n_new, propose_rng);
    const std::vector<double> fresh_log_prior = log_prob_rows(task.prior, fresh);
    const std::vector<double> fresh_log_q = log_prob_rows(kernel, fresh);
    const std::vector<double> fresh_scores =
        score_rows(task, scorer, fresh, fresh_log_prior, m, step.split(2), cfg.threads);

    particles.topRows(static_cast<Eigen::Index>(k_keep)) = kept;
    particles.bottomRows(n_new) = fresh;
    std::copy(kept_log_w.begin(), kept_log_w.end(), log_w.begin());
    const std::vector<double> kept_scores = gather(scores, order);
    std::copy(kept_scores.begin(), kept_scores.end(), scores.begin());
    for (Eigen::Index i = 0; i < n_new; ++i) {
      const auto k = k_keep + static_cast<std::size_t>(i);
      const auto ii = static_cast<std::size_t>(i);
      scores[k] = fresh_scores[ii];
      log_w[k] = fresh_log_prior[ii] == -kInf ? -kInf : fresh_log_prior[ii] - fresh_log_q[ii];
    }

    bandwidth = pmc_quantile_bandwidth(scores, cfg.alpha);
    const std::vector<double> w = indicator_weights(log_w, scores, bandwidth);
    std::size_t inside = 0;
    std::size_t inside_new = 0;
    for (std::size_t k = 0; k < k_total; ++k) {
      if (scores[k] > bandwidth) continue;
      ++inside;
      inside_new += k >= k_keep ? 1 : 0;
    }
    result.history.push_back(summarize(t, bandwidth, w, scores,
                                       inside ? static_cast<double>(inside_new) / static_cast<double>(inside) : 0.0));
    if (observer) observer(result.history.back());
  }

  result.population = {particles, indicator_weights(log_w, scores, bandwidth), scores, bandwidth};
  return result;
}

}  // namespace pli
