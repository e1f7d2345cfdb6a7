#pragma once

#include <memory>
#include <vector>

#include "pli/core/linalg.hpp"

namespace pli {

struct MmdConfig {
  /// Gaussian kernel bandwidths; the kernel is sum_l exp(-c / (2 l)).
  std::vector<double> bandwidths{1, 10, 20, 40, 80, 100, 130, 200, 400, 800, 1000};
};

struct SinkhornConfig {
  /// Entropic regularization as a fraction of the mean pairwise cost.
  double epsilon_scale = 0.01;
  int max_iters = 1000;
  /// Stop once both L1 marginal violations fall below this.
  double marginal_tol = 1e-6;
};

struct SinkhornResult {
  /// Transport cost <P, C> of the entropic coupling (entropy term excluded).
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  double marginal_error = 0.0;
  double epsilon = 0.0;
};

/// C[i][j] = ||x_i - y_j||^2.
Matrix pairwise_sq_dist(const Matrix& x, const Matrix& y);

/// Unbiased U-statistic estimate of MMD^2 with the summed Gaussian kernel.
/// May be negative. Needs at least two rows per set.
double mmd2_unbiased(const Matrix& x, const Matrix& y, const MmdConfig& cfg = {});

/// Entropic squared 2-Wasserstein transport cost between uniform empirical
/// measures, solved with stabilized Sinkhorn iterations.
double sinkhorn_w2(const Matrix& x, const Matrix& y, const SinkhornConfig& cfg = {});

/// Same as sinkhorn_w2 with convergence diagnostics. If max_iters is reached
/// the last iterate is returned with converged = false.
SinkhornResult sinkhorn_solve(const Matrix& x, const Matrix& y, const SinkhornConfig& cfg = {});

enum class MetricKind { kMmd, kWasserstein };

struct MetricSpec {
  MetricKind kind = MetricKind::kMmd;
  MmdConfig mmd;
  SinkhornConfig sinkhorn;
};

/// Scores simulated batches against a fixed reference set. For MMD the
/// reference-reference kernel term is computed once.
class ReferenceScorer {
 public:
  ReferenceScorer(Matrix reference, MetricSpec metric);

  [[nodiscard]] double operator()(const Matrix& simulated) const;
  [[nodiscard]] const Matrix& reference() const { return reference_; }
  [[nodiscard]] const MetricSpec& metric() const { return metric_; }

 private:
  Matrix reference_;
  MetricSpec metric_;
  double reference_self_term_ = 0.0;
};

}  // namespace pli
