// Acceptance checks. Prints one "criterion N: PASS|FAIL" line per criterion and
// exits nonzero when any fails. Optional arguments restrict the run to the listed
// criterion numbers.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "pli/abc.hpp"
#include "pli/config.hpp"
#include "pli/core/error.hpp"
#include "pli/core/numeric.hpp"
#include "pli/evaluation.hpp"
#include "pli/experiment.hpp"
#include "pli/io.hpp"
#include "pli/pli.hpp"

using namespace pli;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

int worker_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Matrix random_matrix(Eigen::Index n, Eigen::Index d, RngStream& rng, double scale = 1.0, double shift = 0.0) {
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal() + shift;
  return m;
}

PliConfig desk_pli(int threads) {
  PliConfig cfg;
  cfg.iterations = 10;
  cfg.samples_per_iter = 1000;
  cfg.threads = threads;
  return cfg;
}

MetricSpec mmd_metric() { return MetricSpec{}; }

struct PliRun {
  Matrix reference;
  PliResult result;
};

PliRun run_pli(const TaskSpec& task, const TaskOptions& options, long n_obs, std::uint64_t seed,
               const PliConfig& cfg) {
  Matrix reference = generate_reference(task, n_obs, seed, options).observations;
  PliResult result = pli_run(task, reference, mmd_metric(), cfg, RngStream(seed).split(20));
  return {std::move(reference), std::move(result)};
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  // Categorical model over 4 outcomes: Binomial(3, xi).
  const std::array<double, 5> xis{0.1, 0.3, 0.5, 0.7, 0.9};
  const std::array<int, 4> counts{3, 7, 6, 4};
  const int n = std::accumulate(counts.begin(), counts.end(), 0);
  auto probs = [](double xi) {
    return std::array<double, 4>{std::pow(1 - xi, 3), 3 * xi * std::pow(1 - xi, 2), 3 * xi * xi * (1 - xi),
                                 std::pow(xi, 3)};
  };

  std::vector<double> pseudo, exact;
  for (const double xi : xis) {
    const auto p = probs(xi);
    double kl = 0.0;
    double log_lik = std::lgamma(n + 1.0);
    for (int k = 0; k < 4; ++k) {
      const double phat = counts[static_cast<std::size_t>(k)] / static_cast<double>(n);
      if (phat > 0) kl += phat * std::log(phat / p[static_cast<std::size_t>(k)]);
      log_lik += counts[static_cast<std::size_t>(k)] * std::log(p[static_cast<std::size_t>(k)]) -
                 std::lgamma(counts[static_cast<std::size_t>(k)] + 1.0);
    }
    pseudo.push_back(pseudo_log_likelihood(kl, 1.0 / (2.0 * n)));
    exact.push_back(log_lik);
  }
  const std::vector<double> a = normalize_log_weights(pseudo);
  const std::vector<double> b = normalize_log_weights(exact);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]) / b[i]);
  return {worst < 1e-9, fmt("max relative deviation %.3g", worst)};
}

// ---------------------------------------------------------------------------

double naive_mmd2(const Matrix& x, const Matrix& y, const MmdConfig& cfg) {
  auto k = [&](const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
    double c = 0.0;
    for (Eigen::Index d = 0; d < a.cols(); ++d) c += (a(i, d) - b(j, d)) * (a(i, d) - b(j, d));
    double s = 0.0;
    for (const double l : cfg.bandwidths) s += std::exp(-c / (2.0 * l));
    return s;
  };
  const double n = static_cast<double>(x.rows());
  const double m = static_cast<double>(y.rows());
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j)
      if (i != j) xx += k(x, i, x, j);
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index j = 0; j < y.rows(); ++j)
      if (i != j) yy += k(y, i, y, j);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < y.rows(); ++j) xy += k(x, i, y, j);
  return xx / (n * (n - 1)) + yy / (m * (m - 1)) - 2.0 * xy / (n * m);
}

double exact_assignment(const Matrix& x, const Matrix& y) {
  std::array<int, 5> p{0, 1, 2, 3, 4};
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < 5; ++i) total += (x.row(i) - y.row(p[static_cast<std::size_t>(i)])).squaredNorm();
    best = std::min(best, total / 5.0);
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

Outcome criterion2() {
  RngStream rng(2024);
  const MmdConfig mmd;
  double mmd_worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(19));
    const auto m = static_cast<Eigen::Index>(2 + rng.below(19));
    const auto d = static_cast<Eigen::Index>(1 + rng.below(5));
    const Matrix x = random_matrix(n, d, rng, 3.0);
    const Matrix y = random_matrix(m, d, rng, 2.0, 1.0);
    mmd_worst = std::max(mmd_worst, std::abs(mmd2_unbiased(x, y, mmd) - naive_mmd2(x, y, mmd)));
  }
  SinkhornConfig tight;
  tight.epsilon_scale = 1e-3;
  double w_worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = static_cast<Eigen::Index>(1 + rng.below(5));
    const Matrix a = random_matrix(5, d, rng);
    const Matrix b = random_matrix(5, d, rng, 1.0, 0.5);
    w_worst = std::max(w_worst, std::abs(sinkhorn_w2(a, b, tight) - exact_assignment(a, b)));
  }
  return {mmd_worst <= 1e-12 && w_worst <= 0.05,
          fmt("mmd worst |diff| %.3g (tol 1e-12), sinkhorn worst |diff| %.4f (tol 0.05)", mmd_worst, w_worst)};
}

// ---------------------------------------------------------------------------

// Gaussian-location runs at N=100 for each epsilon and seed, shared by several criteria.
class GaussianRuns {
 public:
  explicit GaussianRuns(int threads) : threads_(threads), task_(make_task("gaussian_location", options_)) {}

  const PliRun& get(double epsilon, long n_obs, std::uint64_t seed) {
    const auto key = std::make_tuple(epsilon, n_obs, seed);
    auto it = runs_.find(key);
    if (it == runs_.end()) {
      PliConfig cfg = desk_pli(threads_);
      cfg.epsilon = epsilon;
      it = runs_.emplace(key, run_pli(task_, options_, n_obs, seed, cfg)).first;
    }
    return it->second;
  }

  const TaskSpec& task() const { return task_; }

 private:
  int threads_;
  TaskOptions options_;
  TaskSpec task_;
  std::map<std::tuple<double, long, std::uint64_t>, PliRun> runs_;
};

Outcome criterion3(GaussianRuns& runs) {
  double worst = -std::numeric_limits<double>::infinity();
  int violations = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const InferenceState& s : runs.get(0.5, 100, seed).result.states) {
      double kl = 0.0;
      const double k = static_cast<double>(s.weights.size());
      for (const double w : s.weights)
        if (w > 0) kl += w * std::log(k * w);
      worst = std::max(worst, kl);
      if (kl > 0.5 + 1e-2) ++violations;
    }
  }
  return {violations == 0, fmt("max per-iteration KL %.4f over 10 seeds x 10 iterations (bound 0.51)", worst)};
}

Outcome criterion4(GaussianRuns& runs) {
  std::string detail;
  bool pass = true;
  for (const double eps : {0.1, 0.5, 1.0}) {
    int good = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto& states = runs.get(eps, 100, seed).result.states;
      bool decays = true;
      for (std::size_t t = 2; t < states.size(); ++t) decays = decays && states[t].beta <= 1.05 * states[t - 1].beta;
      good += decays ? 1 : 0;
    }
    pass = pass && good >= 9;
    detail += fmt("eps=%.1f: %d/10 seeds; ", eps, good);
  }
  return {pass, detail + "need >= 9/10 each"};
}

struct GaussianRecovery {
  double mmd2 = 0.0;
  double baseline = 0.0;
  double worst_z = 0.0;
};

class GaussianEvaluations {
 public:
  explicit GaussianEvaluations(GaussianRuns& runs) : runs_(runs) {}

  const GaussianRecovery& get(long n_obs, std::uint64_t seed) {
    const auto key = std::make_pair(n_obs, seed);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const PliRun& run = runs_.get(0.5, n_obs, seed);
    const GaussianFull truth = gaussian_location_reference(run.reference);
    RngStream rng = RngStream(seed).split(30).split(static_cast<std::uint64_t>(n_obs));
    RngStream r_model = rng.split(0), r_truth = rng.split(1), r_prior = rng.split(2);
    const Matrix model = draw_in_support(run.result.model, runs_.task().prior, 10000, r_model);
    const Matrix analytic = sample(DensityModel(truth), 10000, r_truth);
    const Matrix prior = sample(runs_.task().prior, 10000, r_prior);
    GaussianRecovery r;
    r.mmd2 = mmd2_unbiased(model, analytic);
    r.baseline = mmd2_unbiased(prior, analytic);
    const auto& fitted = std::get<GaussianFull>(run.result.model);
    for (Eigen::Index j = 0; j < truth.dim(); ++j) {
      const double z = (fitted.mean()(j) - truth.mean()(j)) / std::sqrt(truth.covariance()(j, j));
      r.worst_z = std::max(r.worst_z, std::abs(z));
    }
    return cache_.emplace(key, r).first->second;
  }

 private:
  GaussianRuns& runs_;
  std::map<std::pair<long, std::uint64_t>, GaussianRecovery> cache_;
};

Outcome criterion5(GaussianEvaluations& evals) {
  int good = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GaussianRecovery& r = evals.get(100, seed);
    const bool ok = r.mmd2 <= 0.1 * r.baseline && r.worst_z <= 3.0;
    good += ok ? 1 : 0;
    per_seed += fmt(" [%llu: ratio %.3g, max|z| %.2f]", static_cast<unsigned long long>(seed), r.mmd2 / r.baseline,
                    r.worst_z);
  }
  return {good >= 8, fmt("%d/10 seeds pass (need 8);", good) + per_seed};
}

// ---------------------------------------------------------------------------

struct GmmRun {
  PliRun run;
  Matrix model_samples;
  Matrix oracle_samples;
  Matrix prior_samples;
  double mmd2 = 0.0;
};

class GmmRuns {
 public:
  explicit GmmRuns(int threads) : threads_(threads), task_(make_task("gmm", options_)) {}

  const GmmRun& get(long n_obs, std::uint64_t seed) {
    const auto key = std::make_pair(n_obs, seed);
    auto it = runs_.find(key);
    if (it != runs_.end()) return it->second;
    PliConfig cfg = desk_pli(threads_);
    cfg.estimator.kind = EstimatorKind::kGmm;
    cfg.estimator.components = 5;
    GmmRun g{run_pli(task_, options_, n_obs, seed, cfg), {}, {}, {}, 0.0};
    RngStream rng = RngStream(seed).split(31).split(static_cast<std::uint64_t>(n_obs));
    RngStream r_model = rng.split(0), r_oracle = rng.split(1), r_prior = rng.split(2);
    g.model_samples = draw_in_support(g.run.result.model, task_.prior, 10000, r_model);
    g.oracle_samples = gmm_task_reference_samples(g.run.reference, 10000, r_oracle);
    g.prior_samples = sample(task_.prior, 10000, r_prior);
    g.mmd2 = mmd2_unbiased(g.model_samples, g.oracle_samples);
    return runs_.emplace(key, std::move(g)).first->second;
  }

 private:
  int threads_;
  TaskOptions options_;
  TaskSpec task_;
  std::map<std::pair<long, std::uint64_t>, GmmRun> runs_;
};

Outcome criterion6(GaussianEvaluations& gauss, GmmRuns& gmm) {
  std::vector<double> g10, g100, m10, m100;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    g10.push_back(gauss.get(10, seed).mmd2);
    g100.push_back(gauss.get(100, seed).mmd2);
    m10.push_back(gmm.get(10, seed).mmd2);
    m100.push_back(gmm.get(100, seed).mmd2);
  }
  const bool pass = median(g100) < median(g10) && median(m100) < median(m10);
  return {pass, fmt("gaussian_location median MMD2 N=10 %.4g, N=100 %.4g; gmm median MMD2 N=10 %.4g, N=100 %.4g",
                    median(g10), median(g100), median(m10), median(m100))};
}

// ---------------------------------------------------------------------------

Outcome criterion7(int threads) {
  TaskOptions options;
  options.gaussian_dim = 2;
  const TaskSpec task = make_task("gaussian_location", options);
  const Matrix reference = generate_reference(task, 100, 0, options).observations;
  const GaussianFull truth = gaussian_location_reference(reference);

  AbcConfig cfg;
  cfg.particles = 500;
  cfg.iterations = 50;
  cfg.threads = threads;

  auto worst_z = [&](const ParticlePopulation& pop) {
    Vector mean = Vector::Zero(2);
    for (Eigen::Index i = 0; i < pop.particles.rows(); ++i)
      mean += pop.weights[static_cast<std::size_t>(i)] * pop.particles.row(i).transpose();
    double worst = 0.0;
    for (Eigen::Index j = 0; j < 2; ++j)
      worst = std::max(worst, std::abs(mean(j) - truth.mean()(j)) / std::sqrt(truth.covariance()(j, j)));
    return worst;
  };

  const AbcResult smc = smc_abc_run(task, reference, mmd_metric(), cfg, RngStream(0).split(40));
  const AbcResult pmc = pmc_abc_run(task, reference, mmd_metric(), cfg, RngStream(0).split(41));
  const double z_smc = worst_z(smc.population);
  const double z_pmc = worst_z(pmc.population);

  bool pmc_monotone = true;
  for (std::size_t t = 1; t < pmc.history.size(); ++t)
    pmc_monotone = pmc_monotone && pmc.history[t].bandwidth <= pmc.history[t - 1].bandwidth;

  // Enumerated step-function solutions.
  bool fixtures = true;
  const std::vector<double> scores{3.0, 1.0, 4.0, 2.0};
  const std::vector<double> uniform(4, 0.25);
  const SmcBandwidth half = smc_bandwidth_update(scores, uniform, 0.5);
  fixtures = fixtures && half.bandwidth == 2.0 && half.weights == std::vector<double>{0.0, 0.5, 0.0, 0.5};
  fixtures = fixtures && smc_bandwidth_update(scores, uniform, 1.0).bandwidth == 4.0;
  fixtures = fixtures && smc_bandwidth_update(scores, uniform, 1e-9).bandwidth == 1.0;
  const SmcBandwidth skewed = smc_bandwidth_update(scores, std::vector<double>{0.2, 0.4, 0.2, 0.2}, 0.5);
  fixtures = fixtures && skewed.bandwidth == 2.0 && std::abs(skewed.weights[1] - 2.0 / 3.0) < 1e-15 &&
             std::abs(skewed.weights[3] - 1.0 / 3.0) < 1e-15;
  fixtures = fixtures && smc_bandwidth_update(std::vector<double>{1.0, 1.0, 5.0, 5.0}, uniform, 0.5).bandwidth == 1.0;

  const bool pass = z_smc <= 3.0 && z_pmc <= 3.0 && pmc_monotone && fixtures;
  return {pass, fmt("SMC max|z| %.2f, PMC max|z| %.2f, PMC bandwidth non-increasing %s, fixtures %s", z_smc, z_pmc,
                    pmc_monotone ? "yes" : "no", fixtures ? "exact" : "mismatch")};
}

// ---------------------------------------------------------------------------

Outcome criterion8(GmmRuns& gmm) {
  const GmmRun& g = gmm.get(100, 0);
  const Eigen::Vector2d grid_mean = gmm_task_refined_posterior(g.run.reference).mean();
  const Eigen::Vector2d model_mean = g.model_samples.colwise().mean().transpose();
  const double mean_err = (model_mean - grid_mean).cwiseAbs().maxCoeff();
  const double w_model = posterior_sample_metrics(g.model_samples, g.oracle_samples).w2;
  const double w_prior = posterior_sample_metrics(g.prior_samples, g.oracle_samples).w2;
  const bool pass = mean_err <= 0.2 && w_model * 5.0 <= w_prior;
  return {pass, fmt("mean error %.4f (tol 0.2), W2 model %.4g vs prior %.4g (ratio %.1f, need >= 5)", mean_err,
                    w_model, w_prior, w_prior / w_model)};
}

// ---------------------------------------------------------------------------

double energy_after(const FurutaParams& p, FurutaState s, double dt, double horizon) {
  const auto steps = static_cast<int>(std::lround(horizon / dt));
  for (int k = 0; k < steps; ++k) s = furuta_rk4_step(p, s, dt);
  return furuta_energy(p, s);
}

Outcome criterion9() {
  const FurutaParams p;
  const FurutaState s0(0.1, 0.3, 0.2, -0.4);
  const double e0 = furuta_energy(p, s0);
  const double coarse = energy_after(p, s0, 1e-3, 1.0);
  const double fine = energy_after(p, s0, 1e-4, 1.0);
  const double drift = std::abs(coarse - e0) / std::abs(e0);
  const double versus_fine = std::abs(coarse - fine) / std::abs(e0);

  FurutaState rest = FurutaState::Zero();
  for (int k = 0; k < 1000; ++k) rest = furuta_rk4_step(p, rest, 1e-3);
  const bool fixed = rest == FurutaState::Zero();

  const TaskSpec task = make_task("furuta");
  RngStream rng(90);
  const Matrix states = furuta_initial_states(5, 0.05, rng);
  const Matrix trajs = furuta_simulate_synced(task.ground_truth, states);
  Matrix at_truth(10, task.param_dim);
  at_truth.rowwise() = task.ground_truth.transpose();
  const double sync = furuta_sync_error(at_truth, states, trajs);

  const bool pass = drift < 1e-6 && versus_fine < 1e-6 && fixed && sync == 0.0;
  return {pass, fmt("energy drift %.3g, vs dt=1e-4 %.3g, equilibrium fixed %s, sync error at truth %.3g", drift,
                    versus_fine, fixed ? "yes" : "no", sync)};
}

Outcome criterion10(int threads) {
  const TaskOptions options;
  const TaskSpec task = make_task("furuta", options);
  int good = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::array<double, 2> errors{};
    const std::array<long, 2> sizes{2, 100};
    for (std::size_t i = 0; i < 2; ++i) {
      const ReferenceData ref = generate_reference(task, sizes[i], seed, options);
      const PliResult res =
          pli_run(task, ref.observations, mmd_metric(), desk_pli(threads), RngStream(seed).split(20));
      RngStream rng = RngStream(seed).split(32).split(static_cast<std::uint64_t>(sizes[i]));
      errors[i] = furuta_sync_error(res.model, task.prior, *ref.initial_states, ref.observations, 1000, rng,
                                    options.furuta, threads);
    }
    good += errors[1] < errors[0] ? 1 : 0;
    per_seed +=
        fmt(" [%llu: N=2 %.4g, N=100 %.4g]", static_cast<unsigned long long>(seed), errors[0], errors[1]);
  }
  return {good >= 4, fmt("%d/5 seeds improve (need 4);", good) + per_seed};
}

// ---------------------------------------------------------------------------

Outcome criterion11() {
  const SirOptions opts;
  const Matrix states = sir_states(0.4, 0.125, opts);
  double conservation = 0.0;
  for (Eigen::Index k = 0; k < states.rows(); ++k)
    conservation = std::max(conservation, std::abs(states.row(k).sum() - opts.population) / opts.population);

  const Matrix decay = sir_states(0.0, 0.125, opts);
  bool monotone = decay(0, 1) < 1.0;
  for (Eigen::Index k = 1; k < decay.rows(); ++k) monotone = monotone && decay(k, 1) < decay(k - 1, 1);

  const TaskSpec task = make_task("sir");
  RngStream rng(110);
  const Matrix params = sample(task.prior, 50, rng);
  bool integral = true;
  for (Eigen::Index i = 0; i < params.rows(); ++i) {
    RngStream r = rng.split(static_cast<std::uint64_t>(i));
    const Matrix obs = task.simulate(params.row(i).transpose(), 20, r);
    integral = integral && (obs.array() == obs.array().round()).all() && obs.minCoeff() >= 0.0 &&
               obs.maxCoeff() <= 1000.0;
  }
  const bool pass = conservation <= 1e-8 && monotone && integral;
  return {pass, fmt("max relative conservation error %.3g, beta=0 decay monotone %s, observations integral in "
                    "[0, 1000] %s",
                    conservation, monotone ? "yes" : "no", integral ? "yes" : "no")};
}

// ---------------------------------------------------------------------------

std::string row_without_wall(const EvalReport& r) {
  EvalReport copy = r;
  copy.wall_seconds = 0.0;
  return metrics_row(copy);
}

Outcome criterion12() {
  const fs::path root = fs::temp_directory_path() / fs::path("pli_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  bool pass = true;
  std::string detail;
  for (const std::string method : {"mmd-pli", "mmd-abc-smc"}) {
    Settings s;
    s.method = method;
    s.n_obs = 20;
    s.seed = 3;
    s.pli.iterations = 3;
    s.pli.samples_per_iter = 200;
    s.abc.particles = 100;
    s.abc.iterations = 3;
    s.eval.posterior_samples = 1000;
    s.eval.ppc_sims = 100;
    const EvalReport a = run_experiment(s, root / "a");
    const EvalReport b = run_experiment(s, root / "b");
    const fs::path ref_a = reference_dir(root / "a", s.task, s.n_obs, s.seed);
    const fs::path ref_b = reference_dir(root / "b", s.task, s.n_obs, s.seed);
    bool same_ref = true;
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(ref_a)) {
      const fs::path other = ref_b / entry.path().filename();
      same_ref = same_ref && fs::exists(other) && read_text(entry.path()) == read_text(other);
      ++files;
    }
    const bool same_row = row_without_wall(a) == row_without_wall(b);
    pass = pass && same_ref && files > 0 && same_row;
    detail += fmt("%s: %zu reference files %s, metrics rows %s; ", method.c_str(), files,
                  same_ref ? "identical" : "differ", same_row ? "identical" : "differ");
  }
  fs::remove_all(root);
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
  const int threads = worker_threads();

  GaussianRuns gaussian_runs(threads);
  GaussianEvaluations gaussian_evals(gaussian_runs);
  GmmRuns gmm_runs(threads);

  const std::vector<std::function<Outcome()>> criteria{
      criterion1,
      criterion2,
      [&] { return criterion3(gaussian_runs); },
      [&] { return criterion4(gaussian_runs); },
      [&] { return criterion5(gaussian_evals); },
      [&] { return criterion6(gaussian_evals, gmm_runs); },
      [&] { return criterion7(threads); },
      [&] { return criterion8(gmm_runs); },
      criterion9,
      [&] { return criterion10(threads); },
      criterion11,
      criterion12,
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i]();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d: %s (%.1f s) %s\n", number, out.pass ? "PASS" : "FAIL", secs, out.detail.c_str());
    std::fflush(stdout);
    failures += out.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
