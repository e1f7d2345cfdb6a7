#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "pli/abc.hpp"
#include "pli/core/error.hpp"
#include "pli/core/numeric.hpp"

using namespace pli;

namespace {

// 95% quantile of the MMD^2 permutation null for the pooled sets.
double permutation_threshold(const Matrix& a, const Matrix& b, RngStream& rng, int rounds = 50) {
  Matrix pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  std::vector<double> stats;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(pooled.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  for (int r = 0; r < rounds; ++r) {
    std::shuffle(idx.begin(), idx.end(), rng);
    Matrix x(a.rows(), a.cols()), y(b.rows(), b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) x.row(i) = pooled.row(idx[static_cast<std::size_t>(i)]);
    for (Eigen::Index i = 0; i < b.rows(); ++i) y.row(i) = pooled.row(idx[static_cast<std::size_t>(a.rows() + i)]);
    stats.push_back(mmd2_unbiased(x, y));
  }
  return lower_quantile(stats, 0.95);
}

TaskSpec small_gaussian_task() {
  TaskOptions opts;
  opts.gaussian_dim = 2;
  return make_task("gaussian_location", opts);
}

}  // namespace

TEST_CASE("smc_bandwidth_update step-function fixtures") {
  const std::vector<double> scores{3.0, 1.0, 4.0, 2.0};
  const std::vector<double> uniform(4, 0.25);
  const SmcBandwidth half = smc_bandwidth_update(scores, uniform, 0.5);
  CHECK(half.bandwidth == 2.0);
  CHECK(half.weights == std::vector<double>{0.0, 0.5, 0.0, 0.5});

  CHECK(smc_bandwidth_update(scores, uniform, 1.0).bandwidth == 4.0);
  CHECK(smc_bandwidth_update(scores, uniform, 1e-9).bandwidth == 1.0);

  // Non-uniform previous weights: ESS_prev = 1 / (0.4^2 + 3 * 0.2^2) = 2.5, target 1.25.
  const std::vector<double> skewed{0.2, 0.4, 0.2, 0.2};
  const SmcBandwidth s = smc_bandwidth_update(scores, skewed, 0.5);
  // beta = 2 keeps weights (0.4, 0.2) -> ESS 1.8 >= 1.25; beta = 1 gives ESS 1.
  CHECK(s.bandwidth == 2.0);
  CHECK(s.weights[1] == doctest::Approx(2.0 / 3.0));

  // Ties share a threshold.
  const SmcBandwidth ties = smc_bandwidth_update(std::vector<double>{1.0, 1.0, 5.0, 5.0}, uniform, 0.5);
  CHECK(ties.bandwidth == 1.0);

  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(smc_bandwidth_update(std::vector<double>{inf, inf}, std::vector<double>{0.5, 0.5}, 0.5),
                       "all particles rejected", Error);
}

TEST_CASE("pmc_quantile_bandwidth") {
  std::vector<double> scores(10);
  std::iota(scores.begin(), scores.end(), 1.0);
  CHECK(pmc_quantile_bandwidth(scores, 0.1) == 1.0);
  CHECK(pmc_quantile_bandwidth(scores, 1.0) == 10.0);
  CHECK(pmc_quantile_bandwidth(std::vector<double>(7, 2.5), 0.3) == 2.5);
}

TEST_CASE("fit_perturbation_kernel") {
  RngStream rng(1);
  Matrix two(2, 2);
  two << 0, 0, 2, 0;
  RngStream k_rng(2);
  const DensityModel fallback = fit_perturbation_kernel(two, std::vector<double>{0.5, 0.5}, 5, k_rng);
  const auto& g = std::get<GaussianFull>(fallback);
  CHECK(g.covariance()(0, 0) == doctest::Approx(2.0 * 1.0 + kCovarianceJitter));
  CHECK(g.covariance()(1, 1) == doctest::Approx(kCovarianceJitter));

  Matrix kept(500, 2);
  for (Eigen::Index i = 0; i < kept.size(); ++i) kept.data()[i] = rng.normal();
  RngStream k_rng2(3);
  const DensityModel kernel = fit_perturbation_kernel(kept, std::vector<double>(500, 2e-3), 3, k_rng2);
  RngStream s_rng(4);
  const Matrix draws = sample(kernel, 500, s_rng);
  RngStream p_rng(5);
  CHECK(mmd2_unbiased(draws, kept) < permutation_threshold(draws, kept, p_rng));
}

TEST_CASE("uninformative simulator leaves the prior in place") {
  TaskSpec task = small_gaussian_task();
  task.simulate = [](const Vector&, Eigen::Index m, RngStream& rng) {
    Matrix out(m, 2);
    for (Eigen::Index j = 0; j < m; ++j) {
      RngStream child = rng.split(static_cast<std::uint64_t>(j));
      out(j, 0) = child.normal();
      out(j, 1) = child.normal();
    }
    return out;
  };
  RngStream ref_rng(6);
  const Matrix reference = task.simulate(Vector::Zero(2), 5, ref_rng);
  AbcConfig cfg;
  cfg.particles = 400;
  cfg.iterations = 5;
  const AbcResult smc = smc_abc_run(task, reference, MetricSpec{}, cfg, RngStream(7));
  CHECK(smc.history.size() == 6);
  const auto& pop = smc.population;
  const double ess = effective_sample_size(pop.weights);
  const Vector mean = weighted_mean(pop.particles, pop.weights);
  const Matrix cov = weighted_covariance(pop.particles, pop.weights, mean);
  for (Eigen::Index d = 0; d < 2; ++d) {
    CHECK(std::abs(mean(d)) < 4.0 * std::sqrt(0.1 / ess));
    CHECK(cov(d, d) == doctest::Approx(0.1).epsilon(0.3));
  }
}

TEST_CASE("abc runners on a small problem") {
  const TaskSpec task = small_gaussian_task();
  RngStream ref_rng(10);
  const Matrix reference = task.simulate(task.ground_truth, 10, ref_rng);
  AbcConfig cfg;
  cfg.particles = 200;
  cfg.iterations = 6;

  const AbcResult pmc = pmc_abc_run(task, reference, MetricSpec{}, cfg, RngStream(11));
  REQUIRE(pmc.history.size() == 7);
  for (std::size_t t = 1; t < pmc.history.size(); ++t) {
    CHECK(pmc.history[t].bandwidth <= pmc.history[t - 1].bandwidth);
  }
  const double total = std::accumulate(pmc.population.weights.begin(), pmc.population.weights.end(), 0.0);
  CHECK(total == doctest::Approx(1.0));
  for (std::size_t k = 0; k < pmc.population.scores.size(); ++k) {
    if (pmc.population.weights[k] > 0.0) CHECK(pmc.population.scores[k] <= pmc.population.bandwidth);
  }

  const AbcResult smc = smc_abc_run(task, reference, MetricSpec{}, cfg, RngStream(12));
  for (std::size_t t = 1; t < smc.history.size(); ++t) {
    CHECK(smc.history[t].bandwidth <= smc.history[t - 1].bandwidth);
  }

  const AbcResult again = pmc_abc_run(task, reference, MetricSpec{}, cfg, RngStream(11));
  CHECK(again.population.particles == pmc.population.particles);

  AbcConfig bad = cfg;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(pmc_abc_run(task, reference, MetricSpec{}, bad, RngStream(1)), ConfigError);
}
