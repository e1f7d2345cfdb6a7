#include "pli/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "pli/core/error.hpp"
#include "pli/core/numeric.hpp"

namespace pli {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_weights(std::span<const double> weights, Eigen::Index rows) {
  if (static_cast<Eigen::Index>(weights.size()) != rows) throw Error("invalid weights: size mismatch");
  double total = 0.0;
  for (const double w : weights) {
    if (std::isnan(w) || w < 0.0) throw Error("invalid weights");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error("invalid weights: not normalized");
}

Vector sample_gaussian(const GaussianFull& g, RngStream& rng) {
  Vector z(g.dim());
  for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = rng.normal();
  return g.mean() + g.cholesky().triangularView<Eigen::Lower>() * z;
}

struct EmRun {
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  std::vector<double> mix;
  double final_ll = kNegInf;
  std::vector<double> trace;
  int reinitializations = 0;
  int dropped = 0;
};

}  // namespace

BoxUniform::BoxUniform(Vector lower_bounds, Vector upper_bounds)
    : lower(std::move(lower_bounds)), upper(std::move(upper_bounds)) {
  if (lower.size() != upper.size() || lower.size() == 0) throw Error("BoxUniform: bound size mismatch");
  if (!(lower.array() < upper.array()).all()) throw Error("BoxUniform: lower must be < upper");
}

bool BoxUniform::contains(const Eigen::Ref<const Vector>& x) const {
  return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

GaussianFull::GaussianFull(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size()) {
    throw Error("GaussianFull: covariance shape mismatch");
  }
  covariance_ = 0.5 * (covariance_ + covariance_.transpose()).eval();
  cholesky_ = cholesky_spd(covariance_);
  const double log_det = 2.0 * cholesky_.diagonal().array().log().sum();
  log_normalizer_ = -0.5 * (static_cast<double>(mean_.size()) * kLog2Pi + log_det);
}

double GaussianFull::log_prob(const Eigen::Ref<const Vector>& x) const {
  const Vector z = cholesky_.triangularView<Eigen::Lower>().solve(x - mean_);
  return log_normalizer_ - 0.5 * z.squaredNorm();
}

LogNormalDiag::LogNormalDiag(Vector mu, Vector sigma) : log_mean(std::move(mu)), log_std(std::move(sigma)) {
  if (log_mean.size() != log_std.size() || log_mean.size() == 0) throw Error("LogNormalDiag: size mismatch");
  if (!(log_std.array() > 0.0).all()) throw Error("LogNormalDiag: log_std must be positive");
}

GaussianMixture::GaussianMixture(Vector mixture_weights, std::vector<GaussianFull> parts)
    : weights(std::move(mixture_weights)), components(std::move(parts)) {
  if (components.empty() || weights.size() != static_cast<Eigen::Index>(components.size())) {
    throw Error("GaussianMixture: weight/component mismatch");
  }
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-9) {
    throw Error("GaussianMixture: weights must lie on the simplex");
  }
  for (const auto& c : components) {
    if (c.dim() != components.front().dim()) throw Error("GaussianMixture: component dimension mismatch");
  }
}

Eigen::Index dim(const DensityModel& model) {
  return std::visit(Overloaded{
                        [](const BoxUniform& m) { return m.lower.size(); },
                        [](const GaussianFull& m) { return m.dim(); },
                        [](const LogNormalDiag& m) { return m.log_mean.size(); },
                        [](const GaussianMixture& m) { return m.components.front().dim(); },
                    },
                    model);
}

Matrix sample(const DensityModel& model, Eigen::Index count, RngStream& rng) {
  if (count < 1) throw Error("sample: count must be >= 1");
  const Eigen::Index d = dim(model);
  Matrix out(count, d);
  std::visit(Overloaded{
                 [&](const BoxUniform& m) {
                   for (Eigen::Index i = 0; i < count; ++i) {
                     for (Eigen::Index j = 0; j < d; ++j) {
                       out(i, j) = m.lower(j) + (m.upper(j) - m.lower(j)) * rng.uniform();
                     }
                   }
                 },
                 [&](const GaussianFull& m) {
                   for (Eigen::Index i = 0; i < count; ++i) out.row(i) = sample_gaussian(m, rng).transpose();
                 },
                 [&](const LogNormalDiag& m) {
                   for (Eigen::Index i = 0; i < count; ++i) {
                     for (Eigen::Index j = 0; j < d; ++j) {
                       out(i, j) = std::exp(m.log_mean(j) + m.log_std(j) * rng.normal());
                     }
                   }
                 },
                 [&](const GaussianMixture& m) {
                   for (Eigen::Index i = 0; i < count; ++i) {
                     const double u = rng.uniform();
                     double cumulative = 0.0;
                     std::size_t pick = m.components.size() - 1;
                     for (std::size_t c = 0; c < m.components.size(); ++c) {
                       cumulative += m.weights(static_cast<Eigen::Index>(c));
                       if (u < cumulative && m.weights(static_cast<Eigen::Index>(c)) > 0.0) {
                         pick = c;
                         break;
                       }
                     }
                     // Guard against a trailing zero-weight component absorbing round-off.
                     while (m.weights(static_cast<Eigen::Index>(pick)) <= 0.0 && pick > 0) --pick;
                     out.row(i) = sample_gaussian(m.components[pick], rng).transpose();
                   }
                 },
             },
             model);
  return out;
}

double log_prob(const DensityModel& model, const Eigen::Ref<const Vector>& x) {
  if (x.size() != dim(model)) throw Error("log_prob: dimension mismatch");
  return std::visit(
      Overloaded{
          [&](const BoxUniform& m) {
            if (!m.contains(x)) return kNegInf;
            return -(m.upper - m.lower).array().log().sum();
          },
          [&](const GaussianFull& m) { return m.log_prob(x); },
          [&](const LogNormalDiag& m) {
            if ((x.array() <= 0.0).any()) return kNegInf;
            double lp = 0.0;
            for (Eigen::Index j = 0; j < x.size(); ++j) {
              const double lx = std::log(x(j));
              const double z = (lx - m.log_mean(j)) / m.log_std(j);
              lp += -lx - std::log(m.log_std(j)) - 0.5 * kLog2Pi - 0.5 * z * z;
            }
            return lp;
          },
          [&](const GaussianMixture& m) {
            std::vector<double> terms;
            terms.reserve(m.components.size());
            for (std::size_t c = 0; c < m.components.size(); ++c) {
              const double w = m.weights(static_cast<Eigen::Index>(c));
              if (w > 0.0) terms.push_back(std::log(w) + m.components[c].log_prob(x));
            }
            return log_sum_exp(terms);
          },
      },
      model);
}

std::vector<double> log_prob_rows(const DensityModel& model, const Matrix& points) {
  std::vector<double> out(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = log_prob(model, points.row(i).transpose());
  }
  return out;
}

double weighted_log_likelihood(const DensityModel& model, const Matrix& points, std::span<const double> weights) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double w = weights[static_cast<std::size_t>(i)];
    if (w > 0.0) total += w * log_prob(model, points.row(i).transpose());
  }
  return total;
}

GaussianFull fit_gaussian_weighted(const Matrix& points, std::span<const double> weights, double jitter) {
  if (points.rows() < 1) throw Error("fit_gaussian_weighted: need at least one point");
  check_weights(weights, points.rows());
  const Vector mean = weighted_mean(points, weights);
  Matrix cov = weighted_covariance(points, weights, mean);
  cov.diagonal().array() += jitter;
  return {mean, cov};
}

GaussianMixture fit_gmm_weighted_em(const Matrix& points, std::span<const double> weights, int k, RngStream& rng,
                                    const EmOptions& options, EmDiagnostics* diagnostics) {
  if (k < 1) throw Error("fit_gmm_weighted_em: k must be >= 1");
  check_weights(weights, points.rows());
  const auto n = static_cast<std::size_t>(points.rows());
  const Eigen::Index d = points.cols();
  const auto support = static_cast<int>(std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; }));
  if (support < k) throw Error("fit_gmm_weighted_em: fewer weighted points than components");

  const Vector global_mean = weighted_mean(points, weights);
  Matrix global_cov = weighted_covariance(points, weights, global_mean);
  global_cov.diagonal().array() += options.jitter;

  auto run_once = [&](RngStream& stream) {
    EmRun run;
    // k-means++ seeding on a weight-resampled copy.
    const std::size_t pool_size = std::min<std::size_t>(n, 2000);
    const auto pool = systematic_resample(weights, pool_size, stream);
    std::vector<double> nearest(pool_size, std::numeric_limits<double>::infinity());
    Eigen::Index first = pool[stream.below(pool_size)];
    run.means.push_back(points.row(first).transpose());
    for (int c = 1; c < k; ++c) {
      double total = 0.0;
      for (std::size_t p = 0; p < pool_size; ++p) {
        nearest[p] = std::min(nearest[p], (points.row(pool[p]).transpose() - run.means.back()).squaredNorm());
        total += nearest[p];
      }
      Eigen::Index chosen = pool[stream.below(pool_size)];
      if (total > 0.0) {
        double u = stream.uniform() * total;
        for (std::size_t p = 0; p < pool_size; ++p) {
          u -= nearest[p];
          if (u <= 0.0) {
            chosen = pool[p];
            break;
          }
        }
      }
      run.means.push_back(points.row(chosen).transpose());
    }
    run.covs.assign(static_cast<std::size_t>(k), global_cov);
    run.mix.assign(static_cast<std::size_t>(k), 1.0 / k);
    std::vector<int> retries(static_cast<std::size_t>(k), 0);

    Matrix log_resp(static_cast<Eigen::Index>(n), k);
    double previous = kNegInf;
    for (int iter = 0;; ++iter) {
      const auto kc = static_cast<Eigen::Index>(run.means.size());
      std::vector<GaussianFull> comps;
      comps.reserve(static_cast<std::size_t>(kc));
      for (Eigen::Index c = 0; c < kc; ++c) comps.emplace_back(run.means[c], run.covs[c]);
      // E-step in the log domain.
      double ll = 0.0;
      std::vector<double> row(static_cast<std::size_t>(kc));
      for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        for (Eigen::Index c = 0; c < kc; ++c) {
          row[static_cast<std::size_t>(c)] = std::log(run.mix[static_cast<std::size_t>(c)]) +
                                             comps[static_cast<std::size_t>(c)].log_prob(points.row(ii).transpose());
        }
        const double lse = log_sum_exp(row);
        for (Eigen::Index c = 0; c < kc; ++c) log_resp(ii, c) = row[static_cast<std::size_t>(c)] - lse;
        if (weights[i] > 0.0) ll += weights[i] * lse;
      }
      run.trace.push_back(ll);
      run.final_ll = ll;
      if (iter > 0 && ll - previous <= options.tol * std::abs(previous)) break;
      if (iter >= options.max_iters) break;
      previous = ll;

      // M-step.
      std::vector<Vector> means;
      std::vector<Matrix> covs;
      std::vector<double> mix;
      std::vector<int> kept_retries;
      bool reset = false;
      for (Eigen::Index c = 0; c < kc; ++c) {
        double mass = 0.0;
        Vector mu = Vector::Zero(d);
        for (std::size_t i = 0; i < n; ++i) {
          if (weights[i] == 0.0) continue;
          const double r = weights[i] * std::exp(log_resp(static_cast<Eigen::Index>(i), c));
          mass += r;
          mu += r * points.row(static_cast<Eigen::Index>(i)).transpose();
        }
        const auto cc = static_cast<std::size_t>(c);
        if (mass < 1e-8) {
          if (retries[cc] >= 3) {
            ++run.dropped;
            reset = true;
            continue;
          }
          ++retries[cc];
          ++run.reinitializations;
          reset = true;
          const auto pick = systematic_resample(weights, 1, stream);
          means.push_back(points.row(pick[0]).transpose());
          covs.push_back(global_cov);
          mix.push_back(1.0 / k);
          kept_retries.push_back(retries[cc]);
          continue;
        }
        mu /= mass;
        Matrix cov = Matrix::Zero(d, d);
        for (std::size_t i = 0; i < n; ++i) {
          if (weights[i] == 0.0) continue;
          const double r = weights[i] * std::exp(log_resp(static_cast<Eigen::Index>(i), c));
          const Vector centered = points.row(static_cast<Eigen::Index>(i)).transpose() - mu;
          cov.noalias() += (r / mass) * centered * centered.transpose();
        }
        cov = 0.5 * (cov + cov.transpose()).eval();
        cov.diagonal().array() += options.jitter;
        means.push_back(std::move(mu));
        covs.push_back(std::move(cov));
        mix.push_back(mass);
        kept_retries.push_back(retries[cc]);
      }
      if (means.empty()) throw Error("fit_gmm_weighted_em: all components collapsed");
      double mix_total = 0.0;
      for (const double m : mix) mix_total += m;
      for (double& m : mix) m /= mix_total;
      run.means = std::move(means);
      run.covs = std::move(covs);
      run.mix = std::move(mix);
      retries = std::move(kept_retries);
      // A reinitialized or dropped component restarts the monotone sequence.
      if (reset) previous = kNegInf;
    }
    return run;
  };

  EmRun best;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    RngStream stream = rng.split(static_cast<std::uint64_t>(r));
    EmRun run = run_once(stream);
    if (best.means.empty() || run.final_ll > best.final_ll) best = std::move(run);
  }
  if (diagnostics != nullptr) {
    diagnostics->log_likelihood_trace = best.trace;
    diagnostics->reinitializations = best.reinitializations;
    diagnostics->dropped_components = best.dropped;
  }
  std::vector<GaussianFull> comps;
  comps.reserve(best.means.size());
  for (std::size_t c = 0; c < best.means.size(); ++c) comps.emplace_back(best.means[c], best.covs[c]);
  Vector mix(static_cast<Eigen::Index>(best.mix.size()));
  for (std::size_t c = 0; c < best.mix.size(); ++c) mix(static_cast<Eigen::Index>(c)) = best.mix[c];
  return {mix, std::move(comps)};
}

std::vector<Eigen::Index> systematic_resample(std::span<const double> weights, std::size_t count, RngStream& rng) {
  std::vector<Eigen::Index> idx(count);
  const double step = 1.0 / static_cast<double>(count);
  double u = rng.uniform() * step;
  double cumulative = weights.empty() ? 0.0 : weights[0];
  std::size_t j = 0;
  for (std::size_t i = 0; i < count; ++i) {
    while (u > cumulative && j + 1 < weights.size()) cumulative += weights[++j];
    idx[i] = static_cast<Eigen::Index>(j);
    u += step;
  }
  return idx;
}

}  // namespace pli
