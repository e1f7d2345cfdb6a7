#include <cmath>
#include <numbers>

#include "doctest.h"
#include "pli/core/error.hpp"
#include "pli/evaluation.hpp"

using namespace pli;

namespace {

// Posterior mean of one Gaussian-location coordinate by trapezoid quadrature.
double quadrature_mean(const Matrix& reference, Eigen::Index d) {
  const int n = 20001;
  const double lo = -3.0, hi = 3.0, h = (hi - lo) / (n - 1);
  double mass = 0.0, first = 0.0;
  double peak = -1e300;
  std::vector<double> logp(n);
  for (int i = 0; i < n; ++i) {
    const double t = lo + i * h;
    double lp = -t * t / (2.0 * 0.1);
    for (Eigen::Index k = 0; k < reference.rows(); ++k) {
      lp -= (reference(k, d) - t) * (reference(k, d) - t) / (2.0 * 0.1);
    }
    logp[static_cast<std::size_t>(i)] = lp;
    peak = std::max(peak, lp);
  }
  for (int i = 0; i < n; ++i) {
    const double w = (i == 0 || i == n - 1 ? 0.5 : 1.0) * std::exp(logp[static_cast<std::size_t>(i)] - peak);
    mass += w;
    first += w * (lo + i * h);
  }
  return first / mass;
}

double gmm_density(const Matrix& reference, double x, double y) {
  double lp = 0.0;
  for (Eigen::Index k = 0; k < reference.rows(); ++k) {
    const double r2 = (reference(k, 0) - x) * (reference(k, 0) - x) + (reference(k, 1) - y) * (reference(k, 1) - y);
    lp += std::log(0.5 * std::exp(-0.5 * r2) / (2.0 * std::numbers::pi) +
                   0.5 * std::exp(-0.5 * r2 / 0.01) / (2.0 * std::numbers::pi * 0.01));
  }
  return lp;
}

}  // namespace

TEST_CASE("gaussian_location_reference") {
  const GaussianFull one = gaussian_location_reference(Matrix::Zero(1, 10));
  CHECK(one.mean().isZero());
  CHECK(one.covariance().isApprox(0.05 * Matrix::Identity(10, 10)));
  const GaussianFull none = gaussian_location_reference(Matrix(0, 10));
  CHECK(none.covariance().isApprox(0.1 * Matrix::Identity(10, 10)));

  const TaskSpec task = make_task("gaussian_location");
  RngStream rng(1);
  const Matrix ref = task.simulate(task.ground_truth, 5, rng);
  const GaussianFull post = gaussian_location_reference(ref);
  for (Eigen::Index d = 0; d < 2; ++d) CHECK(std::abs(post.mean()(d) - quadrature_mean(ref, d)) < 1e-3);
}

TEST_CASE("gmm task grid posterior") {
  const GridPosterior centered = gmm_task_refined_posterior(Matrix::Zero(1, 2), 200);
  double total = 0.0;
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < centered.mass.size(); ++i) {
    total += centered.mass[i];
    if (centered.mass[i] > centered.mass[argmax]) argmax = i;
  }
  CHECK(total == doctest::Approx(1.0));
  CHECK((centered.center(argmax).array().abs() <= centered.cell.array()).all());

  const TaskSpec task = make_task("gmm");
  RngStream rng(2);
  const Matrix ref = task.simulate(task.ground_truth, 20, rng);
  const GridPosterior refined = gmm_task_refined_posterior(ref, 200);

  // Brute-force midpoint quadrature over a fixed window around the truth.
  const int n = 600;
  const double lo_x = 0.0, lo_y = -1.5, width = 2.0;
  double mass = 0.0, mx = 0.0, my = 0.0, peak = -1e300;
  std::vector<double> lp(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double v = gmm_density(ref, lo_x + (i + 0.5) * width / n, lo_y + (j + 0.5) * width / n);
      lp[static_cast<std::size_t>(i * n + j)] = v;
      peak = std::max(peak, v);
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double w = std::exp(lp[static_cast<std::size_t>(i * n + j)] - peak);
      mass += w;
      mx += w * (lo_x + (i + 0.5) * width / n);
      my += w * (lo_y + (j + 0.5) * width / n);
    }
  CHECK(refined.mean()(0) == doctest::Approx(mx / mass).epsilon(1e-3));
  CHECK(refined.mean()(1) == doctest::Approx(my / mass).epsilon(1e-3));

  RngStream s_rng(3);
  const Matrix samples = gmm_task_reference_samples(ref, 20000, s_rng, 200);
  CHECK(samples.cols() == 2);
  const Eigen::Vector2d sample_mean = samples.colwise().mean().transpose();
  const Eigen::Matrix2d cov = refined.covariance();
  CHECK(std::abs(sample_mean(0) - mx / mass) < 5.0 * std::sqrt(cov(0, 0) / 20000.0) + refined.cell(0));
  CHECK(std::abs(sample_mean(1) - my / mass) < 5.0 * std::sqrt(cov(1, 1) / 20000.0) + refined.cell(1));
}

TEST_CASE("posterior_sample_metrics") {
  RngStream rng(4);
  Matrix a(300, 2);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  // The unbiased estimator on one set twice is -(2 / n) (k(0) - mean off-diagonal kernel),
  // which vanishes for a very wide single bandwidth.
  const PosteriorMetrics same = posterior_sample_metrics(a, a, MmdConfig{{1e6}}, SinkhornConfig{}, 100);
  CHECK(std::abs(same.mmd2) < 1e-6);
  const MmdConfig unit{{1.0}};
  double off = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.rows(); ++j)
      if (i != j) off += std::exp(-(a.row(i) - a.row(j)).squaredNorm() / 2.0);
  const double n = static_cast<double>(a.rows());
  CHECK(posterior_sample_metrics(a, a, unit, SinkhornConfig{}, 10).mmd2 ==
        doctest::Approx(-(2.0 / n) * (1.0 - off / (n * (n - 1.0)))).epsilon(1e-10));
  CHECK(same.w2_points == 100);
  Matrix b = a.array() + 1.0;
  const PosteriorMetrics shifted = posterior_sample_metrics(a, b, MmdConfig{}, SinkhornConfig{}, 100);
  CHECK(shifted.mmd2 > same.mmd2);
  CHECK(shifted.w2 > same.w2);
}

TEST_CASE("draw_in_support") {
  const TaskSpec task = make_task("gmm");
  RngStream rng(5);
  const DensityModel inside = GaussianFull(Vector::Zero(2), Matrix::Identity(2, 2));
  const Matrix draws = draw_in_support(inside, task.prior, 500, rng);
  CHECK(draws.rows() == 500);
  CHECK(draws.cwiseAbs().maxCoeff() <= 10.0);
  const DensityModel outside = GaussianFull(Vector::Constant(2, 50.0), Matrix::Identity(2, 2));
  CHECK_THROWS_WITH_AS(draw_in_support(outside, task.prior, 100, rng),
                       doctest::Contains("model mass outside prior"), Error);
}

TEST_CASE("posterior predictive check ordering") {
  TaskOptions opts;
  opts.gaussian_dim = 2;
  const TaskSpec task = make_task("gaussian_location", opts);
  RngStream ref_rng(6);
  const Matrix ref = task.simulate(task.ground_truth, 20, ref_rng);
  PpcOptions options;
  options.sims = 200;
  Matrix at_truth(200, 2);
  at_truth.rowwise() = task.ground_truth.transpose();
  RngStream r1(7), r2(8);
  const PpcResult truth = posterior_predictive_check(at_truth, task, ref, r1, options);
  const PpcResult prior = posterior_predictive_check(task.prior, task, ref, r2, options);
  CHECK(prior.mmd2 >= truth.mmd2);
  REQUIRE(truth.w2.has_value());
  CHECK(*prior.w2 >= *truth.w2);

  options.mode = PpcMode::kPooled;
  options.compute_w2 = false;
  RngStream r3(9);
  const PpcResult pooled = posterior_predictive_check(at_truth, task, ref, r3, options);
  CHECK_FALSE(pooled.w2.has_value());
  CHECK(std::abs(pooled.mmd2) < truth.mmd2 + 0.05);
}

TEST_CASE("furuta_sync_error") {
  const TaskSpec task = make_task("furuta");
  RngStream rng(10);
  const Matrix states = furuta_initial_states(3, 0.05, rng);
  const Matrix trajs = furuta_simulate_synced(task.ground_truth, states);
  Matrix at_truth(6, 5);
  at_truth.rowwise() = task.ground_truth.transpose();
  CHECK(furuta_sync_error(at_truth, states, trajs) == 0.0);
  Matrix heavier = at_truth;
  heavier.col(0).array() += 1.0;
  CHECK(furuta_sync_error(heavier, states, trajs) > 0.0);
  CHECK(furuta_sync_error(heavier, states, trajs, {}, 3) == furuta_sync_error(heavier, states, trajs, {}, 1));
}
