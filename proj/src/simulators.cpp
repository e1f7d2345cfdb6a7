#include "pli/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "pli/core/error.hpp"

namespace pli {
namespace {

void check_param_dim(const Vector& xi, Eigen::Index expected, const char* task) {
  if (xi.size() != expected) {
    throw Error(std::string(task) + ": expected " + std::to_string(expected) + " parameters, got " +
                std::to_string(xi.size()));
  }
}

}  // namespace

Matrix gaussian_location_simulate(const Vector& xi, Eigen::Index m, RngStream& rng) {
  const double sd = std::sqrt(0.1);
  Matrix out(m, xi.size());
  for (Eigen::Index j = 0; j < m; ++j) {
    RngStream child = rng.split(static_cast<std::uint64_t>(j));
    for (Eigen::Index d = 0; d < xi.size(); ++d) out(j, d) = xi(d) + sd * child.normal();
  }
  return out;
}

Matrix gmm_task_simulate(const Vector& xi, Eigen::Index m, RngStream& rng) {
  check_param_dim(xi, 2, "gmm");
  Matrix out(m, 2);
  for (Eigen::Index j = 0; j < m; ++j) {
    RngStream child = rng.split(static_cast<std::uint64_t>(j));
    const double sd = child.uniform() < 0.5 ? 1.0 : 0.1;
    for (Eigen::Index d = 0; d < 2; ++d) out(j, d) = xi(d) + sd * child.normal();
  }
  return out;
}

std::pair<Eigen::Vector2d, Eigen::Matrix2d> slcp_moments(const Vector& xi) {
  check_param_dim(xi, 5, "slcp");
  const double s1 = xi(2) * xi(2);
  const double s2 = xi(3) * xi(3);
  const double rho = std::tanh(xi(4));
  Eigen::Matrix2d cov;
  cov << s1 * s1, rho * s1 * s2, rho * s1 * s2, s2 * s2;
  if (std::abs(xi(2)) < 1e-6 || std::abs(xi(3)) < 1e-6) cov += 1e-8 * Eigen::Matrix2d::Identity();
  return {Eigen::Vector2d(xi(0), xi(1)), cov};
}

Matrix slcp_simulate(const Vector& xi, Eigen::Index m, RngStream& rng) {
  const auto [mean, cov] = slcp_moments(xi);
  // 2x2 Cholesky, tolerant of |rho| -> 1.
  const double l11 = std::sqrt(cov(0, 0));
  const double l21 = cov(1, 0) / l11;
  const double l22 = std::sqrt(std::max(0.0, cov(1, 1) - l21 * l21));
  Matrix out(m, 8);
  for (Eigen::Index j = 0; j < m; ++j) {
    RngStream child = rng.split(static_cast<std::uint64_t>(j));
    for (int k = 0; k < 4; ++k) {
      const double z1 = child.normal();
      const double z2 = child.normal();
      out(j, 2 * k) = mean(0) + l11 * z1;
      out(j, 2 * k + 1) = mean(1) + l21 * z1 + l22 * z2;
    }
  }
  return out;
}

Matrix sir_states(double beta, double gamma, const SirOptions& options) {
  if (options.grid_points < 1 || !(options.dt > 0.0) || !(options.horizon > 0.0)) {
    throw ConfigError("sir: grid_points, dt and horizon must be positive");
  }
  const double n_pop = options.population;
  using State = Eigen::Vector3d;
  auto rhs = [&](const State& y) {
    const double infection = beta * y(0) * y(1) / n_pop;
    const double recovery = gamma * y(1);
    return State(-infection, infection - recovery, recovery);
  };
  State y(n_pop - 1.0, 1.0, 0.0);
  Matrix out(options.grid_points, 3);
  const double spacing = options.horizon / options.grid_points;
  double t = 0.0;
  for (int k = 0; k < options.grid_points; ++k) {
    const double target = spacing * (k + 1);
    const auto steps = static_cast<long>(std::llround((target - t) / options.dt));
    for (long s = 0; s < steps; ++s) {
      const State k1 = rhs(y);
      const State k2 = rhs(y + 0.5 * options.dt * k1);
      const State k3 = rhs(y + 0.5 * options.dt * k2);
      const State k4 = rhs(y + options.dt * k3);
      y += options.dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    t = target;
    out.row(k) = y.transpose();
  }
  return out;
}

Matrix sir_simulate(const Vector& xi, Eigen::Index m, RngStream& rng, const SirOptions& options) {
  check_param_dim(xi, 2, "sir");
  if (!(xi(0) >= 0.0) || !(xi(1) >= 0.0)) throw Error("sir: rates must be non-negative");
  if (options.emitted_bins < 1 || options.emitted_bins > options.grid_points) {
    throw ConfigError("sir: emitted_bins must lie in [1, grid_points]");
  }
  const Matrix states = sir_states(xi(0), xi(1), options);
  std::vector<double> prob(static_cast<std::size_t>(options.emitted_bins));
  for (int k = 0; k < options.emitted_bins; ++k) {
    prob[static_cast<std::size_t>(k)] = std::clamp(states(k, 1) / options.population, 0.0, 1.0);
  }
  Matrix out(m, options.emitted_bins);
  for (Eigen::Index j = 0; j < m; ++j) {
    RngStream child = rng.split(static_cast<std::uint64_t>(j));
    for (int k = 0; k < options.emitted_bins; ++k) {
      std::binomial_distribution<int> binom(options.trials, prob[static_cast<std::size_t>(k)]);
      out(j, k) = binom(child);
    }
  }
  return out;
}

FurutaParams FurutaParams::from_vector(const Vector& xi, const FurutaOptions& options) {
  check_param_dim(xi, 5, "furuta");
  FurutaParams p{xi(0), xi(1), xi(2), xi(3), xi(4), options.damping_r, options.damping_p};
  if (!(p.l_r > 0.0 && p.m_r > 0.0 && p.l_p > 0.0 && p.m_p > 0.0)) {
    throw Error("furuta: masses and lengths must be positive");
  }
  return p;
}

Eigen::Matrix2d furuta_mass_matrix(const FurutaParams& p, double theta_p) {
  const double sp = std::sin(theta_p);
  const double off = 0.5 * p.m_p * p.l_p * p.l_r * std::cos(theta_p);
  Eigen::Matrix2d mass;
  mass << p.m_r * p.l_r * p.l_r / 12.0 + p.m_p * p.l_r * p.l_r + 0.25 * p.m_p * p.l_p * p.l_p * sp * sp, off,
      off, p.m_p * p.l_p * p.l_p / 3.0;
  return mass;
}

FurutaState furuta_derivative(const FurutaParams& p, const FurutaState& s) {
  const double sp = std::sin(s(1));
  const double cp = std::cos(s(1));
  const double dr = s(2);
  const double dp = s(3);
  const double mpl = p.m_p * p.l_p;
  // Same entries as furuta_mass_matrix, sharing one sin/cos evaluation.
  const double a = p.m_r * p.l_r * p.l_r / 12.0 + p.m_p * p.l_r * p.l_r + 0.25 * mpl * p.l_p * sp * sp;
  const double b = 0.5 * mpl * p.l_r * cp;
  const double c = mpl * p.l_p / 3.0;
  const double det = a * c - b * b;
  // For a symmetric positive 2x2 matrix, trace^2 / det = cond + 2 + 1 / cond.
  constexpr double kMaxCondition = 1e12;
  const double trace = a + c;
  if (!(det > 0.0) || trace * trace > (kMaxCondition + 2.0 + 1.0 / kMaxCondition) * det) {
    throw Error("singular mass matrix");
  }

  const double s2p = 2.0 * sp * cp;
  const double c1 = 0.25 * mpl * p.l_p * s2p * dr * dp - 0.5 * mpl * p.l_r * sp * dp * dp;
  const double c2 = -0.125 * mpl * p.l_p * s2p * dr * dr + 0.5 * mpl * p.g * sp;
  const double r1 = -c1 - p.d_r * dr;
  const double r2 = -c2 - p.d_p * dp;
  return {dr, dp, (c * r1 - b * r2) / det, (a * r2 - b * r1) / det};
}

double furuta_energy(const FurutaParams& p, const FurutaState& s) {
  const Eigen::Vector2d qd = s.tail<2>();
  return 0.5 * qd.dot(furuta_mass_matrix(p, s(1)) * qd) + 0.5 * p.m_p * p.l_p * p.g * (1.0 - std::cos(s(1)));
}

FurutaState furuta_rk4_step(const FurutaParams& p, const FurutaState& s, double dt) {
  const FurutaState k1 = furuta_derivative(p, s);
  const FurutaState k2 = furuta_derivative(p, s + 0.5 * dt * k1);
  const FurutaState k3 = furuta_derivative(p, s + 0.5 * dt * k2);
  const FurutaState k4 = furuta_derivative(p, s + dt * k3);
  return s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Matrix furuta_initial_states(Eigen::Index m, double perturbation_std, RngStream& rng) {
  Matrix out(m, 4);
  for (Eigen::Index j = 0; j < m; ++j) {
    RngStream child = rng.split(static_cast<std::uint64_t>(j));
    for (int d = 0; d < 4; ++d) out(j, d) = perturbation_std * child.normal();
  }
  return out;
}

Vector furuta_rollout(const FurutaParams& p, const FurutaState& initial, const FurutaOptions& options) {
  if (options.samples < 1 || options.record_every < 1 || !(options.dt > 0.0)) {
    throw ConfigError("furuta: samples, record_every and dt must be positive");
  }
  const int channels = options.raw_angles ? 4 : 6;
  Vector out(static_cast<Eigen::Index>(options.samples) * channels);
  FurutaState s = initial;
  for (int k = 0; k < options.samples; ++k) {
    for (int i = 0; i < options.record_every; ++i) s = furuta_rk4_step(p, s, options.dt);
    const Eigen::Index o = static_cast<Eigen::Index>(k) * channels;
    if (options.raw_angles) {
      out.segment<4>(o) = s;
    } else {
      out(o) = std::sin(s(0));
      out(o + 1) = std::cos(s(0));
      out(o + 2) = std::sin(s(1));
      out(o + 3) = std::cos(s(1));
      out(o + 4) = s(2);
      out(o + 5) = s(3);
    }
  }
  return out;
}

Matrix furuta_simulate_synced(const Vector& xi, const Matrix& initial_states, const FurutaOptions& options) {
  if (initial_states.cols() != 4) throw Error("furuta: initial states must have 4 columns");
  const FurutaParams p = FurutaParams::from_vector(xi, options);
  const Eigen::Index width = static_cast<Eigen::Index>(options.samples) * (options.raw_angles ? 4 : 6);
  Matrix out(initial_states.rows(), width);
  for (Eigen::Index j = 0; j < initial_states.rows(); ++j) {
    out.row(j) = furuta_rollout(p, initial_states.row(j).transpose(), options).transpose();
  }
  return out;
}

Matrix furuta_simulate(const Vector& xi, Eigen::Index m, RngStream& rng, const FurutaOptions& options) {
  return furuta_simulate_synced(xi, furuta_initial_states(m, options.perturbation_std, rng), options);
}

Vector gaussian_location_ground_truth(int dim) {
  static const double kValues[] = {0.273, -0.460, -0.918, -0.969, 0.626, 0.825, 0.213, 0.459, 0.087, 0.871};
  if (dim < 1 || dim > 10) throw ConfigError("gaussian_location: dimension must lie in [1, 10]");
  return Eigen::Map<const Vector>(kValues, dim);
}

TaskSpec make_task(const std::string& name, const TaskOptions& options) {
  if (name == "gaussian_location") {
    const int d = options.gaussian_dim;
    return {name, d, d, GaussianFull(Vector::Zero(d), 0.1 * Matrix::Identity(d, d)),
            gaussian_location_ground_truth(d), gaussian_location_simulate};
  }
  if (name == "gmm") {
    return {name, 2, 2, BoxUniform(Vector::Constant(2, -10.0), Vector::Constant(2, 10.0)),
            Eigen::Vector2d(1.0, -0.5), gmm_task_simulate};
  }
  if (name == "slcp") {
    return {name, 5, 8, BoxUniform(Vector::Constant(5, -3.0), Vector::Constant(5, 3.0)),
            (Vector(5) << 0.7, 1.5, -1.0, -0.9, 0.6).finished(), slcp_simulate};
  }
  if (name == "sir") {
    const SirOptions sir = options.sir;
    return {name, 2, sir.emitted_bins,
            LogNormalDiag(Eigen::Vector2d(std::log(0.4), std::log(0.125)), Eigen::Vector2d(0.5, 0.2)),
            Eigen::Vector2d(0.4, 0.125),
            [sir](const Vector& xi, Eigen::Index m, RngStream& rng) { return sir_simulate(xi, m, rng, sir); }};
  }
  if (name == "furuta") {
    const FurutaOptions furuta = options.furuta;
    return {name, 5, static_cast<Eigen::Index>(furuta.samples) * (furuta.raw_angles ? 4 : 6),
            BoxUniform((Vector(5) << 9.0, 0.08, 0.08, 0.12, 0.02).finished(),
                       (Vector(5) << 11.0, 0.09, 0.1, 0.135, 0.03).finished()),
            (Vector(5) << 9.81, 0.085, 0.095, 0.129, 0.024).finished(),
            [furuta](const Vector& xi, Eigen::Index m, RngStream& rng) { return furuta_simulate(xi, m, rng, furuta); }};
  }
  throw ConfigError("unknown task '" + name + "'");
}

}  // namespace pli
