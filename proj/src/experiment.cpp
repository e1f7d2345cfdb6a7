#include "pli/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <tuple>
#include <ostream>
#include <sstream>

#include "pli/abc.hpp"
#include "pli/core/error.hpp"
#include "pli/core/numeric.hpp"
#include "pli/pli.hpp"

#ifndef PLI_CODE_VERSION
#define PLI_CODE_VERSION "unknown"
#endif

namespace pli {
namespace {

enum StreamLabel : std::uint64_t { kReferenceStream = 1, kInferenceStream = 2, kEvaluationStream = 3 };

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

RngStream run_stream(const Settings& s, StreamLabel label) {
  return RngStream(s.seed)
      .split(label)
      .split(fnv1a(s.task))
      .split(fnv1a(s.method))
      .split(static_cast<std::uint64_t>(s.n_obs));
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

std::optional<double> parse_opt(const std::string& v) {
  if (v == "NA") return std::nullopt;
  return std::stod(v);
}

std::string iteration_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "iter_%04d.txt", t);
  return buf;
}

KeyValues score_quantiles(std::vector<double> scores) {
  scores.erase(std::remove_if(scores.begin(), scores.end(), [](double v) { return !std::isfinite(v); }),
               scores.end());
  KeyValues kv;
  kv["scores.finite"] = std::to_string(scores.size());
  if (scores.empty()) return kv;
  for (const auto& [name, q] : std::vector<std::pair<std::string, double>>{
           {"min", 0.0}, {"q25", 0.25}, {"median", 0.5}, {"q75", 0.75}, {"max", 1.0}}) {
    kv["scores." + name] = format_double(lower_quantile(scores, q));
  }
  return kv;
}

void write_pli_state(const fs::path& dir, const InferenceState& st) {
  KeyValues kv = score_quantiles(st.scores);
  kv["iteration"] = std::to_string(st.iteration);
  kv["eta"] = format_double(st.eta);
  kv["beta"] = format_double(st.beta);
  kv["base_bandwidth"] = format_double(st.base_bandwidth);
  kv["dual"] = format_double(st.dual);
  kv["ess"] = format_double(st.ess);
  kv["empirical_kl"] = format_double(st.empirical_kl);
  kv["constraint_inactive"] = st.constraint_inactive ? "true" : "false";
  kv["bandwidth_retried"] = st.bandwidth_retried ? "true" : "false";
  model_to_key_values(st.model, "model", kv);
  write_text_atomic(dir / iteration_name(st.iteration), key_values_to_text(kv));
}

// i.i.d. multinomial draws of population rows.
Matrix resample_population(const ParticlePopulation& pop, Eigen::Index count, RngStream& rng) {
  std::vector<double> cumulative(pop.weights.size());
  std::partial_sum(pop.weights.begin(), pop.weights.end(), cumulative.begin());
  Matrix out(count, pop.particles.cols());
  for (Eigen::Index j = 0; j < count; ++j) {
    const double u = rng.uniform() * cumulative.back();
    auto idx = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                        cumulative.begin());
    idx = std::min(idx, cumulative.size() - 1);
    while (pop.weights[idx] <= 0.0 && idx > 0) --idx;
    out.row(j) = pop.particles.row(static_cast<Eigen::Index>(idx));
  }
  return out;
}

std::string abc_history_csv(const std::vector<AbcIterationSummary>& history) {
  std::string out = "iteration,bandwidth,ess,acceptance,min_score,median_score,max_score\n";
  for (const auto& h : history) {
    out += std::to_string(h.iteration) + "," + format_double(h.bandwidth) + "," + format_double(h.ess) + "," +
           format_double(h.acceptance) + "," + format_double(h.min_score) + "," + format_double(h.median_score) +
           "," + format_double(h.max_score) + "\n";
  }
  return out;
}

void write_manifest(const fs::path& dir, const Settings& s, const std::string& status, double wall,
                    int iterations, const std::string& error) {
  KeyValues kv;
  for (const auto& [k, v] : settings_to_key_values(s)) kv["config." + k] = v;
  kv["status"] = status;
  kv["code_version"] = PLI_CODE_VERSION;
  kv["master_seed"] = std::to_string(s.seed);
  kv["iterations_completed"] = std::to_string(iterations);
  kv["state_index"] = s.method.ends_with("-pli") ? "states/iter_*.txt" : "abc_history.csv";
  kv["wall_seconds"] = format_double(wall);
  if (!error.empty()) kv["error"] = error;
  write_text_atomic(dir / "manifest.txt", key_values_to_text(kv));
}

MetricSpec metric_for(const Settings& s) {
  return {s.method.starts_with("w-") ? MetricKind::kWasserstein : MetricKind::kMmd, s.mmd, s.sinkhorn};
}

std::optional<fs::path> completed_run(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.txt";
  if (!fs::exists(manifest)) return std::nullopt;
  const KeyValues kv = parse_key_values(read_text(manifest), manifest.string());
  const auto it = kv.find("status");
  if (it == kv.end() || it->second != "completed") return std::nullopt;
  return dir;
}

}  // namespace

ReferenceData generate_reference(const TaskSpec& task, long n_obs, std::uint64_t seed, const TaskOptions& options) {
  if (n_obs < 1) throw ConfigError("n_obs must be at least 1");
  RngStream rng = RngStream(seed).split(kReferenceStream).split(fnv1a(task.name)).split(static_cast<std::uint64_t>(n_obs));
  ReferenceData ref;
  if (task.name == "furuta") {
    RngStream state_rng = rng.split(0);
    ref.initial_states = furuta_initial_states(n_obs, options.furuta.perturbation_std, state_rng);
    ref.observations = furuta_simulate_synced(task.ground_truth, *ref.initial_states, options.furuta);
  } else {
    RngStream sim_rng = rng.split(1);
    ref.observations = task.simulate(task.ground_truth, n_obs, sim_rng);
  }
  return ref;
}

fs::path reference_dir(const fs::path& out, const std::string& task, long n_obs, std::uint64_t seed) {
  return out / "references" / task / ("N" + std::to_string(n_obs)) / ("seed" + std::to_string(seed));
}

fs::path run_dir(const fs::path& out, const Settings& s) {
  return out / s.task / s.method / ("N" + std::to_string(s.n_obs)) / ("seed" + std::to_string(s.seed));
}

ReferenceData write_reference(const Settings& s, const fs::path& out) {
  const TaskSpec task = make_task(s.task, s.task_options);
  ReferenceData ref = generate_reference(task, s.n_obs, s.seed, s.task_options);
  const fs::path dir = reference_dir(out, s.task, s.n_obs, s.seed);
  write_array(dir / "observations.txt", ref.observations);
  if (ref.initial_states) write_array(dir / "initial_states.txt", *ref.initial_states);
  return ref;
}

ReferenceData ensure_reference(const Settings& s, const fs::path& out) {
  const fs::path dir = reference_dir(out, s.task, s.n_obs, s.seed);
  const bool furuta = s.task == "furuta";
  if (!fs::exists(dir / "observations.txt") || (furuta && !fs::exists(dir / "initial_states.txt"))) {
    return write_reference(s, out);
  }
  ReferenceData ref{read_array(dir / "observations.txt"), std::nullopt};
  if (furuta) ref.initial_states = read_array(dir / "initial_states.txt");
  return ref;
}

EvalReport run_experiment(const Settings& s, const fs::path& out, std::ostream* log) {
  validate_settings(s);
  const TaskSpec task = make_task(s.task, s.task_options);
  const ReferenceData ref = ensure_reference(s, out);
  if (ref.observations.cols() != task.obs_dim) {
    throw ConfigError("stored reference does not match the task's observation dimension");
  }

  const fs::path dir = run_dir(out, s);
  fs::create_directories(dir);
  write_text_atomic(dir / "config.cfg", key_values_to_text(settings_to_key_values(s)));
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  write_manifest(dir, s, "running", 0.0, 0, "");

  EvalReport report;
  report.task = s.task;
  report.method = s.method;
  report.n_obs = s.n_obs;
  report.sims_per_param = s.sims_per_param > 0 ? s.sims_per_param : s.n_obs;
  report.seed = s.seed;
  int completed = 0;

  try {
    const MetricSpec metric = metric_for(s);
    const RngStream infer_rng = run_stream(s, kInferenceStream);
    const RngStream eval_rng = run_stream(s, kEvaluationStream);
    Matrix posterior;

    if (s.method.ends_with("-pli")) {
      fs::create_directories(dir / "states");
      const PliResult result = pli_run(task, ref.observations, metric, s.pli, infer_rng, [&](const InferenceState& st) {
        write_pli_state(dir / "states", st);
        completed = st.iteration + 1;
        if (log) *log << "iteration " << st.iteration << " beta=" << st.beta << " ess=" << st.ess << "\n";
      });
      KeyValues final_model;
      model_to_key_values(result.model, "model", final_model);
      write_text_atomic(dir / "model.txt", key_values_to_text(final_model));
      RngStream draw = eval_rng.split(0);
      posterior = draw_in_support(result.model, task.prior, s.eval.posterior_samples, draw);
    } else {
      const auto observer = [&](const AbcIterationSummary& h) {
        completed = h.iteration;
        if (log && h.iteration % 10 == 0) *log << "iteration " << h.iteration << " bandwidth=" << h.bandwidth << "\n";
      };
      const AbcResult result = s.method.ends_with("-smc")
                                   ? smc_abc_run(task, ref.observations, metric, s.abc, infer_rng, observer)
                                   : pmc_abc_run(task, ref.observations, metric, s.abc, infer_rng, observer);
      write_text_atomic(dir / "abc_history.csv", abc_history_csv(result.history));
      const auto& pop = result.population;
      Matrix table(pop.particles.rows(), pop.particles.cols() + 2);
      table.leftCols(pop.particles.cols()) = pop.particles;
      for (Eigen::Index i = 0; i < pop.particles.rows(); ++i) {
        table(i, pop.particles.cols()) = pop.weights[static_cast<std::size_t>(i)];
        table(i, pop.particles.cols() + 1) = pop.scores[static_cast<std::size_t>(i)];
      }
      write_array(dir / "population.txt", table);
      RngStream draw = eval_rng.split(0);
      posterior = resample_population(pop, s.eval.posterior_samples, draw);
    }
    report.iteration_count = completed;
    write_array(dir / "posterior_samples.txt", posterior);

    if (s.task == "gaussian_location" || s.task == "gmm") {
      RngStream ref_rng = eval_rng.split(1);
      const Matrix reference_posterior =
          s.task == "gmm" ? gmm_task_reference_samples(ref.observations, s.eval.posterior_samples, ref_rng)
                          : sample(gaussian_location_reference(ref.observations), s.eval.posterior_samples, ref_rng);
      const PosteriorMetrics pm =
          posterior_sample_metrics(posterior, reference_posterior, s.mmd, s.sinkhorn, s.eval.w2_max_points);
      report.mmd2_posterior = pm.mmd2;
      report.w2_posterior = pm.w2;
    }

    const Eigen::Index ppc_count = std::min(s.eval.ppc_sims, posterior.rows());
    PpcOptions ppc;
    ppc.sims = ppc_count;
    ppc.mode = s.eval.ppc_mode;
    ppc.sims_per_param = s.sims_per_param;
    ppc.mmd = s.mmd;
    ppc.sinkhorn = s.sinkhorn;
    ppc.threads = s.threads;
    RngStream ppc_rng = eval_rng.split(2);
    const PpcResult pr = posterior_predictive_check(Matrix(posterior.topRows(ppc_count)), task, ref.observations,
                                                    ppc_rng, ppc);
    report.ppc_mmd2 = pr.mmd2;
    report.ppc_w2 = pr.w2;

    if (s.task == "furuta") {
      const Eigen::Index n = std::min(s.eval.sync_sims, posterior.rows());
      report.furuta_sync_error = furuta_sync_error(Matrix(posterior.topRows(n)), *ref.initial_states,
                                                   ref.observations, s.task_options.furuta, s.threads);
    }
  } catch (const std::exception& e) {
    write_manifest(dir, s, "failed", elapsed(), completed, e.what());
    throw;
  }

  report.wall_seconds = elapsed();
  append_metrics(out / "metrics.csv", report);
  write_manifest(dir, s, "completed", report.wall_seconds, completed, "");
  return report;
}

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols{"task",           "method",       "N",        "M",
                                             "seed",           "iteration_count", "mmd2_posterior",
                                             "w2_posterior",   "ppc_mmd2",     "ppc_w2",   "furuta_sync_error",
                                             "wall_seconds"};
  return cols;
}

std::string metrics_row(const EvalReport& r) {
  return r.task + "," + r.method + "," + std::to_string(r.n_obs) + "," + std::to_string(r.sims_per_param) + "," +
         std::to_string(r.seed) + "," + std::to_string(r.iteration_count) + "," + opt(r.mmd2_posterior) + "," +
         opt(r.w2_posterior) + "," + opt(r.ppc_mmd2) + "," + opt(r.ppc_w2) + "," + opt(r.furuta_sync_error) + "," +
         format_double(r.wall_seconds);
}

void append_metrics(const fs::path& table, const EvalReport& r) {
  if (table.has_parent_path()) fs::create_directories(table.parent_path());
  const bool fresh = !fs::exists(table) || fs::file_size(table) == 0;
  std::ofstream out(table, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot append to '" + table.string() + "'");
  if (fresh) {
    const auto& cols = metrics_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << "\n";
  }
  out << metrics_row(r) << "\n";
}

std::vector<EvalReport> read_metrics(const fs::path& table) {
  std::vector<EvalReport> rows;
  if (!fs::exists(table)) return rows;
  std::istringstream in(read_text(table));
  std::string line;
  std::getline(in, line);
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (f.size() != metrics_columns().size()) {
      throw Error(table.string() + ":" + std::to_string(number) + ": expected " +
                  std::to_string(metrics_columns().size()) + " columns");
    }
    EvalReport r;
    r.task = f[0];
    r.method = f[1];
    r.n_obs = std::stol(f[2]);
    r.sims_per_param = std::stol(f[3]);
    r.seed = std::stoull(f[4]);
    r.iteration_count = std::stoi(f[5]);
    r.mmd2_posterior = parse_opt(f[6]);
    r.w2_posterior = parse_opt(f[7]);
    r.ppc_mmd2 = parse_opt(f[8]);
    r.ppc_w2 = parse_opt(f[9]);
    r.furuta_sync_error = parse_opt(f[10]);
    r.wall_seconds = std::stod(f[11]);
    rows.push_back(std::move(r));
  }
  return rows;
}

const std::vector<std::string>& aggregate_metric_names() {
  static const std::vector<std::string> names{"mmd2_posterior", "w2_posterior",      "ppc_mmd2",
                                              "ppc_w2",         "furuta_sync_error", "wall_seconds"};
  return names;
}

std::vector<AggregateRow> aggregate_metrics(const std::vector<EvalReport>& rows) {
  using Cell = std::tuple<std::string, std::string, long>;
  std::map<Cell, std::map<std::uint64_t, const EvalReport*>> cells;
  for (const auto& r : rows) cells[{r.task, r.method, r.n_obs}][r.seed] = &r;

  std::vector<AggregateRow> out;
  for (const auto& [cell, by_seed] : cells) {
    AggregateRow row{std::get<0>(cell), std::get<1>(cell), std::get<2>(cell), by_seed.size(), {}};
    for (std::size_t m = 0; m < aggregate_metric_names().size(); ++m) {
      std::vector<double> values;
      for (const auto& [seed, r] : by_seed) {
        const std::optional<double> vals[] = {r->mmd2_posterior, r->w2_posterior, r->ppc_mmd2,
                                              r->ppc_w2,         r->furuta_sync_error, r->wall_seconds};
        if (vals[m]) values.push_back(*vals[m]);
      }
      MetricSummary summary;
      if (!values.empty()) {
        const auto n = static_cast<double>(values.size());
        const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
        summary.mean = mean;
        if (values.size() > 1) {
          double ss = 0.0;
          for (const double v : values) ss += (v - mean) * (v - mean);
          summary.ci95 = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
        }
      }
      row.metrics.push_back(summary);
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string aggregate_to_csv(const std::vector<AggregateRow>& rows) {
  std::string out = "task,method,N,seeds";
  for (const auto& name : aggregate_metric_names()) out += "," + name + "_mean," + name + "_ci95";
  out += "\n";
  for (const auto& r : rows) {
    out += r.task + "," + r.method + "," + std::to_string(r.n_obs) + "," + std::to_string(r.seeds);
    for (const auto& m : r.metrics) out += "," + opt(m.mean) + "," + opt(m.ci95);
    out += "\n";
  }
  return out;
}

SweepOutcome run_sweep(const Settings& base, const fs::path& out, bool execute, std::ostream* log) {
  SweepOutcome outcome;
  std::vector<std::tuple<std::string, std::string, long, std::uint64_t>> wanted;
  for (const auto& task : base.sweep.tasks) {
    for (const auto& method : base.sweep.methods) {
      for (const long n : base.sweep.n_obs) {
        for (const long seed : base.sweep.seeds) {
          if (seed < 0) throw ConfigError("sweep.seeds must be non-negative");
          Settings s = base;
          s.task = task;
          s.method = method;
          s.n_obs = n;
          s.seed = static_cast<std::uint64_t>(seed);
          validate_settings(s);
          wanted.emplace_back(task, method, n, s.seed);
          if (!execute || completed_run(run_dir(out, s))) continue;
          if (log) *log << "running " << task << " " << method << " N=" << n << " seed=" << seed << "\n";
          try {
            run_experiment(s, out, nullptr);
          } catch (const ConfigError&) {
            throw;
          } catch (const std::exception& e) {
            outcome.failed.push_back(task + "/" + method + "/N" + std::to_string(n) + "/seed" +
                                     std::to_string(seed) + ": " + e.what());
          }
        }
      }
    }
  }

  std::vector<EvalReport> selected;
  const std::vector<EvalReport> all = read_metrics(out / "metrics.csv");
  for (const auto& [task, method, n, seed] : wanted) {
    const auto it = std::find_if(all.rbegin(), all.rend(), [&](const EvalReport& r) {
      return r.task == task && r.method == method && r.n_obs == n && r.seed == seed;
    });
    if (it == all.rend()) {
      outcome.missing.push_back(task + "/" + method + "/N" + std::to_string(n) + "/seed" + std::to_string(seed));
    } else {
      selected.push_back(*it);
    }
  }
  outcome.table = aggregate_metrics(selected);
  return outcome;
}

}  // namespace pli
