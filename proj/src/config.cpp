#include "pli/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "pli/core/error.hpp"

namespace pli {
namespace {

using Setter = std::function<void(Settings&, const std::string&)>;
using Getter = std::function<std::string(const Settings&)>;

struct Field {
  std::string key;
  Setter set;
  Getter get;
};

double to_real(const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) throw ConfigError("expected a number, got '" + v + "'");
  return x;
}

long to_int(const std::string& v) {
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size()) throw ConfigError("expected an integer, got '" + v + "'");
  return x;
}

std::uint64_t to_uint(const std::string& v) {
  char* end = nullptr;
  if (v.empty() || v.front() == '-') throw ConfigError("expected a non-negative integer, got '" + v + "'");
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size()) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

std::vector<std::string> to_words(const std::string& v) {
  std::vector<std::string> out;
  std::string token;
  for (const char c : v + ",") {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!token.empty()) out.push_back(token);
      token.clear();
    } else {
      token += c;
    }
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::ostringstream out;
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? ", " : "") << values[i];
  return out.str();
}

template <class Get>
Field real_field(std::string key, Get ref) {
  return {std::move(key), [ref](Settings& s, const std::string& v) { ref(s) = to_real(v); },
          [ref](const Settings& s) { return format_double(ref(s)); }};
}

template <class Get>
Field int_field(std::string key, Get ref) {
  return {std::move(key),
          [ref](Settings& s, const std::string& v) {
            ref(s) = static_cast<std::remove_reference_t<decltype(ref(s))>>(to_int(v));
          },
          [ref](const Settings& s) { return std::to_string(ref(s)); }};
}

template <class Get>
Field bool_field(std::string key, Get ref) {
  return {std::move(key), [ref](Settings& s, const std::string& v) { ref(s) = to_bool(v); },
          [ref](const Settings& s) { return std::string(ref(s) ? "true" : "false"); }};
}

template <class Get>
Field string_field(std::string key, Get ref) {
  return {std::move(key), [ref](Settings& s, const std::string& v) { ref(s) = v; },
          [ref](const Settings& s) { return ref(s); }};
}

template <class Get>
Field words_field(std::string key, Get ref) {
  return {std::move(key), [ref](Settings& s, const std::string& v) { ref(s) = to_words(v); },
          [ref](const Settings& s) { return join(ref(s)); }};
}

template <class Get>
Field ints_field(std::string key, Get ref) {
  return {std::move(key),
          [ref](Settings& s, const std::string& v) {
            std::vector<long> out;
            for (const auto& w : to_words(v)) out.push_back(to_int(w));
            ref(s) = out;
          },
          [ref](const Settings& s) { return join(ref(s)); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(string_field("run.task", [](auto& s) -> auto& { return s.task; }));
    f.push_back(string_field("run.method", [](auto& s) -> auto& { return s.method; }));
    f.push_back(int_field("run.n_obs", [](auto& s) -> auto& { return s.n_obs; }));
    f.push_back(int_field("run.sims_per_param", [](auto& s) -> auto& { return s.sims_per_param; }));
    f.push_back({"run.seed", [](Settings& s, const std::string& v) { s.seed = to_uint(v); },
                 [](const Settings& s) { return std::to_string(s.seed); }});
    f.push_back(int_field("run.threads", [](auto& s) -> auto& { return s.threads; }));

    f.push_back(int_field("task.gaussian_dim", [](auto& s) -> auto& { return s.task_options.gaussian_dim; }));
    f.push_back(real_field("task.sir_population", [](auto& s) -> auto& { return s.task_options.sir.population; }));
    f.push_back(real_field("task.sir_dt", [](auto& s) -> auto& { return s.task_options.sir.dt; }));
    f.push_back(int_field("task.sir_grid_points", [](auto& s) -> auto& { return s.task_options.sir.grid_points; }));
    f.push_back(int_field("task.sir_bins", [](auto& s) -> auto& { return s.task_options.sir.emitted_bins; }));
    f.push_back(int_field("task.sir_trials", [](auto& s) -> auto& { return s.task_options.sir.trials; }));
    f.push_back(real_field("task.furuta_damping_r", [](auto& s) -> auto& { return s.task_options.furuta.damping_r; }));
    f.push_back(real_field("task.furuta_damping_p", [](auto& s) -> auto& { return s.task_options.furuta.damping_p; }));
    f.push_back(real_field("task.furuta_perturbation",
                           [](auto& s) -> auto& { return s.task_options.furuta.perturbation_std; }));
    f.push_back(real_field("task.furuta_dt", [](auto& s) -> auto& { return s.task_options.furuta.dt; }));
    f.push_back(int_field("task.furuta_record_every",
                          [](auto& s) -> auto& { return s.task_options.furuta.record_every; }));
    f.push_back(int_field("task.furuta_samples", [](auto& s) -> auto& { return s.task_options.furuta.samples; }));
    f.push_back(bool_field("task.furuta_raw_angles", [](auto& s) -> auto& { return s.task_options.furuta.raw_angles; }));

    f.push_back(real_field("pli.epsilon", [](auto& s) -> auto& { return s.pli.epsilon; }));
    f.push_back(real_field("pli.base_bandwidth", [](auto& s) -> auto& { return s.pli.base_bandwidth; }));
    f.push_back(real_field("pli.eta_min", [](auto& s) -> auto& { return s.pli.eta_min; }));
    f.push_back(real_field("pli.eta_max", [](auto& s) -> auto& { return s.pli.eta_max; }));
    f.push_back(int_field("pli.max_dual_evaluations", [](auto& s) -> auto& { return s.pli.max_dual_evaluations; }));
    f.push_back(real_field("pli.log_eta_tolerance", [](auto& s) -> auto& { return s.pli.log_eta_tolerance; }));
    f.push_back(int_field("pli.iterations", [](auto& s) -> auto& { return s.pli.iterations; }));
    f.push_back(int_field("pli.samples", [](auto& s) -> auto& { return s.pli.samples_per_iter; }));
    f.push_back({"pli.estimator",
                 [](Settings& s, const std::string& v) {
                   if (v == "gaussian") {
                     s.pli.estimator.kind = EstimatorKind::kGaussian;
                   } else if (v == "gmm") {
                     s.pli.estimator.kind = EstimatorKind::kGmm;
                   } else {
                     throw ConfigError("pli.estimator must be gaussian or gmm");
                   }
                 },
                 [](const Settings& s) {
                   return std::string(s.pli.estimator.kind == EstimatorKind::kGaussian ? "gaussian" : "gmm");
                 }});
    f.push_back(int_field("pli.components", [](auto& s) -> auto& { return s.pli.estimator.components; }));

    f.push_back(int_field("abc.particles", [](auto& s) -> auto& { return s.abc.particles; }));
    f.push_back(int_field("abc.iterations", [](auto& s) -> auto& { return s.abc.iterations; }));
    f.push_back(real_field("abc.alpha", [](auto& s) -> auto& { return s.abc.alpha; }));
    f.push_back(real_field("abc.smc_alpha", [](auto& s) -> auto& { return s.abc.smc_alpha; }));
    f.push_back(real_field("abc.resample_fraction", [](auto& s) -> auto& { return s.abc.resample_fraction; }));
    f.push_back(int_field("abc.kernel_components", [](auto& s) -> auto& { return s.abc.kernel_components; }));

    f.push_back(int_field("em.max_iters", [](auto& s) -> auto& { return s.pli.estimator.em.max_iters; }));
    f.push_back(real_field("em.tol", [](auto& s) -> auto& { return s.pli.estimator.em.tol; }));
    f.push_back(int_field("em.restarts", [](auto& s) -> auto& { return s.pli.estimator.em.restarts; }));
    f.push_back(real_field("em.jitter", [](auto& s) -> auto& { return s.pli.estimator.em.jitter; }));

    f.push_back({"mmd.bandwidths",
                 [](Settings& s, const std::string& v) {
                   std::vector<double> out;
                   for (const auto& w : to_words(v)) out.push_back(to_real(w));
                   if (out.empty()) throw ConfigError("mmd.bandwidths must not be empty");
                   s.mmd.bandwidths = out;
                 },
                 [](const Settings& s) { return join_doubles(s.mmd.bandwidths, ','); }});
    f.push_back(real_field("sinkhorn.epsilon_scale", [](auto& s) -> auto& { return s.sinkhorn.epsilon_scale; }));
    f.push_back(int_field("sinkhorn.max_iters", [](auto& s) -> auto& { return s.sinkhorn.max_iters; }));
    f.push_back(real_field("sinkhorn.marginal_tol", [](auto& s) -> auto& { return s.sinkhorn.marginal_tol; }));

    f.push_back(int_field("eval.posterior_samples", [](auto& s) -> auto& { return s.eval.posterior_samples; }));
    f.push_back(int_field("eval.w2_max_points", [](auto& s) -> auto& { return s.eval.w2_max_points; }));
    f.push_back(int_field("eval.ppc_sims", [](auto& s) -> auto& { return s.eval.ppc_sims; }));
    f.push_back({"eval.ppc_mode",
                 [](Settings& s, const std::string& v) {
                   if (v == "mean") {
                     s.eval.ppc_mode = PpcMode::kPerParameterMean;
                   } else if (v == "pooled") {
                     s.eval.ppc_mode = PpcMode::kPooled;
                   } else {
                     throw ConfigError("eval.ppc_mode must be mean or pooled");
                   }
                 },
                 [](const Settings& s) {
                   return std::string(s.eval.ppc_mode == PpcMode::kPooled ? "pooled" : "mean");
                 }});
    f.push_back(int_field("eval.sync_sims", [](auto& s) -> auto& { return s.eval.sync_sims; }));

    f.push_back(words_field("sweep.tasks", [](auto& s) -> auto& { return s.sweep.tasks; }));
    f.push_back(words_field("sweep.methods", [](auto& s) -> auto& { return s.sweep.methods; }));
    f.push_back(ints_field("sweep.n_obs", [](auto& s) -> auto& { return s.sweep.n_obs; }));
    f.push_back(ints_field("sweep.seeds", [](auto& s) -> auto& { return s.sweep.seeds; }));
    return f;
  }();
  return table;
}

}  // namespace

Settings::Settings() {
  pli.iterations = 10;
  pli.samples_per_iter = 1000;
  abc.particles = 500;
  abc.iterations = 50;
}

void apply_setting(Settings& s, const std::string& key, const std::string& value) {
  const auto& table = fields();
  const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
  if (it == table.end()) throw ConfigError("unknown configuration key '" + key + "'");
  try {
    it->set(s, value);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
  // The EM options are shared by the PLI estimator and the PMC kernel.
  s.abc.em = s.pli.estimator.em;
  s.pli.threads = s.threads;
  s.abc.threads = s.threads;
  s.pli.sims_per_param = static_cast<int>(s.sims_per_param);
  s.abc.sims_per_param = static_cast<int>(s.sims_per_param);
}

void apply_settings(Settings& s, const KeyValues& kv) {
  for (const auto& [k, v] : kv) apply_setting(s, k, v);
}

Settings load_settings(const std::string& path) {
  Settings s;
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  apply_settings(s, parse_key_values(text, path));
  return s;
}

KeyValues settings_to_key_values(const Settings& s) {
  KeyValues kv;
  for (const auto& f : fields()) kv[f.key] = f.get(s);
  return kv;
}

std::vector<std::string> setting_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

void validate_settings(const Settings& s) {
  static const std::vector<std::string> tasks{"gaussian_location", "gmm", "slcp", "sir", "furuta"};
  if (std::find(tasks.begin(), tasks.end(), s.task) == tasks.end()) {
    throw ConfigError("unknown task '" + s.task + "'");
  }
  const auto& methods = known_methods();
  if (std::find(methods.begin(), methods.end(), s.method) == methods.end()) {
    throw ConfigError("unknown method '" + s.method + "'");
  }
  if (s.n_obs < 1) throw ConfigError("run.n_obs must be at least 1");
  if (s.threads < 1) throw ConfigError("run.threads must be at least 1");
  if (s.task == "gaussian_location" && (s.task_options.gaussian_dim < 1 || s.task_options.gaussian_dim > 10)) {
    throw ConfigError("task.gaussian_dim must lie in [1, 10]");
  }
  const bool pli = s.method.ends_with("-pli");
  if (pli && s.pli.samples_per_iter < 2) throw ConfigError("pli.samples must be at least 2");
  if (pli && s.pli.estimator.kind == EstimatorKind::kGmm && s.pli.estimator.components < 1) {
    throw ConfigError("pli.components must be positive");
  }
  if (!pli && !(s.abc.alpha > 0.0 && s.abc.alpha < 1.0)) throw ConfigError("abc.alpha must lie in (0, 1)");
  if (s.eval.posterior_samples < 2 || s.eval.ppc_sims < 1) {
    throw ConfigError("eval.posterior_samples must be >= 2 and eval.ppc_sims >= 1");
  }
}

}  // namespace pli
