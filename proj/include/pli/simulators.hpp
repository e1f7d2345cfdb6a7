#pragma once

#include <functional>
#include <string>

#include "pli/core/linalg.hpp"
#include "pli/core/rng.hpp"
#include "pli/distributions.hpp"

namespace pli {

/// Batch simulator: (xi, M, rng) -> M x obs_dim. Observation j draws from
/// rng.split(j), so a batch is reproducible from its parent stream alone.
using Simulator = std::function<Matrix(const Vector&, Eigen::Index, RngStream&)>;

struct TaskSpec {
  std::string name;
  Eigen::Index param_dim;
  Eigen::Index obs_dim;
  DensityModel prior;
  Vector ground_truth;
  Simulator simulate;
};

struct FurutaOptions {
  double damping_r = 0.0;
  double damping_p = 0.0;
  /// Std of the zero-mean Gaussian perturbation of (theta_r, theta_p, dtheta_r, dtheta_p).
  double perturbation_std = 0.05;
  double dt = 1e-3;
  /// Integration steps per recorded sample (100 Hz with the default dt).
  int record_every = 10;
  int samples = 100;
  /// Record (theta_r, theta_p) in place of their sin/cos pairs; four channels per step.
  bool raw_angles = false;
};

struct SirOptions {
  double population = 1e6;
  double dt = 0.1;
  double horizon = 160.0;
  int grid_points = 20;
  int emitted_bins = 10;
  int trials = 1000;
};

struct TaskOptions {
  int gaussian_dim = 10;
  SirOptions sir;
  FurutaOptions furuta;
};

// Gaussian location: x ~ N(xi, 0.1 I).
Matrix gaussian_location_simulate(const Vector& xi, Eigen::Index m, RngStream& rng);

// Equal mixture of N(xi, I) and N(xi, 0.01 I).
Matrix gmm_task_simulate(const Vector& xi, Eigen::Index m, RngStream& rng);

/// Four i.i.d. 2-D Gaussian draws per observation, concatenated to 8 dims.
Matrix slcp_simulate(const Vector& xi, Eigen::Index m, RngStream& rng);
/// (mean, covariance) of one SLCP draw.
std::pair<Eigen::Vector2d, Eigen::Matrix2d> slcp_moments(const Vector& xi);

/// SIR compartments (S, I, R) at the `grid_points` equidistant record times
/// t_k = (k + 1) * horizon / grid_points.
Matrix sir_states(double beta, double gamma, const SirOptions& options = {});
/// Binomial(trials, I / population) counts at the first `emitted_bins` record times.
Matrix sir_simulate(const Vector& xi, Eigen::Index m, RngStream& rng, const SirOptions& options = {});

struct FurutaParams {
  double g = 9.81;
  double l_r = 0.085;
  double m_r = 0.095;
  double l_p = 0.129;
  double m_p = 0.024;
  double d_r = 0.0;
  double d_p = 0.0;

  static FurutaParams from_vector(const Vector& xi, const FurutaOptions& options = {});
};

using FurutaState = Eigen::Vector4d;  // theta_r, theta_p, dtheta_r, dtheta_p

Eigen::Matrix2d furuta_mass_matrix(const FurutaParams& p, double theta_p);
/// d/dt of the state under zero external torque.
FurutaState furuta_derivative(const FurutaParams& p, const FurutaState& s);
double furuta_energy(const FurutaParams& p, const FurutaState& s);
FurutaState furuta_rk4_step(const FurutaParams& p, const FurutaState& s, double dt);

/// M x 4 initial states drawn around the origin; row j uses rng.split(j).
Matrix furuta_initial_states(Eigen::Index m, double perturbation_std, RngStream& rng);
/// One rollout recorded as a flat row of samples * channels values.
Vector furuta_rollout(const FurutaParams& p, const FurutaState& initial, const FurutaOptions& options = {});
Matrix furuta_simulate_synced(const Vector& xi, const Matrix& initial_states, const FurutaOptions& options = {});
Matrix furuta_simulate(const Vector& xi, Eigen::Index m, RngStream& rng, const FurutaOptions& options = {});

/// Fixed location vector used as the Gaussian-location ground truth (first `dim` entries).
Vector gaussian_location_ground_truth(int dim);

/// Builds one of: gaussian_location, gmm, slcp, sir, furuta.
TaskSpec make_task(const std::string& name, const TaskOptions& options = {});

}  // namespace pli
