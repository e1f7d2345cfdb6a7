#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pli/abc.hpp"
#include "pli/config.hpp"
#include "pli/evaluation.hpp"
#include "pli/experiment.hpp"
#include "pli/io.hpp"
#include "pli/pli.hpp"

namespace py = pybind11;
using namespace pli;

namespace {

Settings settings_from(const py::dict& overrides, const std::string& config) {
  Settings s = config.empty() ? Settings{} : load_settings(config);
  for (const auto& [key, value] : overrides) {
    std::string text;
    if (py::isinstance<py::bool_>(value)) {
      text = value.cast<bool>() ? "true" : "false";
    } else if (py::isinstance<py::list>(value) || py::isinstance<py::tuple>(value)) {
      for (const auto& item : value) text += (text.empty() ? "" : ", ") + py::str(item).cast<std::string>();
    } else {
      text = py::str(value).cast<std::string>();
    }
    apply_setting(s, key.cast<std::string>(), text);
  }
  validate_settings(s);
  return s;
}

py::dict state_dict(const InferenceState& st) {
  py::dict d;
  d["iteration"] = st.iteration;
  d["eta"] = st.eta;
  d["beta"] = st.beta;
  d["base_bandwidth"] = st.base_bandwidth;
  d["dual"] = st.dual;
  d["ess"] = st.ess;
  d["empirical_kl"] = st.empirical_kl;
  d["constraint_inactive"] = st.constraint_inactive;
  d["bandwidth_retried"] = st.bandwidth_retried;
  return d;
}

py::object optional_value(const std::optional<double>& v) { return v ? py::cast(*v) : py::none(); }

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["task"] = r.task;
  d["method"] = r.method;
  d["n_obs"] = r.n_obs;
  d["sims_per_param"] = r.sims_per_param;
  d["seed"] = r.seed;
  d["iteration_count"] = r.iteration_count;
  d["mmd2_posterior"] = optional_value(r.mmd2_posterior);
  d["w2_posterior"] = optional_value(r.w2_posterior);
  d["ppc_mmd2"] = optional_value(r.ppc_mmd2);
  d["ppc_w2"] = optional_value(r.ppc_w2);
  d["furuta_sync_error"] = optional_value(r.furuta_sync_error);
  d["wall_seconds"] = r.wall_seconds;
  return d;
}

class Model {
 public:
  explicit Model(DensityModel m) : model_(std::move(m)) {}

  [[nodiscard]] Eigen::Index dimension() const { return dim(model_); }
  [[nodiscard]] Matrix draw(Eigen::Index count, std::uint64_t seed) const {
    RngStream rng(seed);
    return sample(model_, count, rng);
  }
  [[nodiscard]] std::vector<double> log_density(const Matrix& points) const { return log_prob_rows(model_, points); }
  [[nodiscard]] KeyValues to_dict() const {
    KeyValues kv;
    model_to_key_values(model_, "model", kv);
    return kv;
  }
  [[nodiscard]] const DensityModel& get() const { return model_; }

 private:
  DensityModel model_;
};

MmdConfig mmd_config(const std::optional<std::vector<double>>& bandwidths) {
  MmdConfig cfg;
  if (bandwidths) cfg.bandwidths = *bandwidths;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(pypli, m) {
  m.doc() = "Pseudo-likelihood inference for simulation-based models.";

  // Translators run newest first, so the subclass registers last.
  py::register_exception<Error>(m, "PliError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<Model>(m, "DensityModel")
      .def_property_readonly("dim", &Model::dimension)
      .def("sample", &Model::draw, py::arg("count"), py::arg("seed") = 0)
      .def("log_prob", &Model::log_density, py::arg("points"))
      .def("to_dict", &Model::to_dict);

  m.def(
      "mmd2_unbiased",
      [](const Matrix& x, const Matrix& y, const std::optional<std::vector<double>>& bandwidths) {
        return mmd2_unbiased(x, y, mmd_config(bandwidths));
      },
      py::arg("x"), py::arg("y"), py::arg("bandwidths") = py::none());

  m.def(
      "sinkhorn_w2",
      [](const Matrix& x, const Matrix& y, double epsilon_scale, int max_iters, double marginal_tol) {
        const SinkhornResult r = sinkhorn_solve(x, y, {epsilon_scale, max_iters, marginal_tol});
        py::dict d;
        d["cost"] = r.cost;
        d["iterations"] = r.iterations;
        d["converged"] = r.converged;
        d["marginal_error"] = r.marginal_error;
        d["epsilon"] = r.epsilon;
        return d;
      },
      py::arg("x"), py::arg("y"), py::arg("epsilon_scale") = 0.01, py::arg("max_iters") = 1000,
      py::arg("marginal_tol") = 1e-6);

  m.def("pseudo_log_likelihood", &pseudo_log_likelihood, py::arg("score"), py::arg("beta_t"));

  m.def(
      "optimize_eta",
      [](const std::vector<double>& scores, const std::vector<double>& log_prior_ratio, double epsilon,
         double base_bandwidth) {
        PliConfig cfg;
        cfg.epsilon = epsilon;
        const EtaSolution sol = optimize_eta(scores, log_prior_ratio, cfg, base_bandwidth);
        py::dict d;
        d["eta"] = sol.eta;
        d["beta"] = sol.beta;
        d["dual"] = sol.dual;
        d["evaluations"] = sol.evaluations;
        d["constraint_inactive"] = sol.constraint_inactive;
        return d;
      },
      py::arg("scores"), py::arg("log_prior_ratio"), py::arg("epsilon"), py::arg("base_bandwidth"));

  m.def(
      "wml_weights",
      [](const std::vector<double>& scores, const std::vector<double>& log_prior,
         const std::vector<double>& log_proposal, double eta, double beta_t) {
        const WeightResult r = wml_weights(scores, log_prior, log_proposal, eta, beta_t);
        return py::make_tuple(r.weights, r.ess);
      },
      py::arg("scores"), py::arg("log_prior"), py::arg("log_proposal"), py::arg("eta"), py::arg("beta_t"));

  m.def(
      "task_info",
      [](const std::string& name) {
        const TaskSpec t = make_task(name);
        py::dict d;
        d["name"] = t.name;
        d["param_dim"] = t.param_dim;
        d["obs_dim"] = t.obs_dim;
        d["ground_truth"] = t.ground_truth;
        d["prior"] = Model(t.prior);
        return d;
      },
      py::arg("task"));

  m.def(
      "simulate",
      [](const std::string& name, const Vector& xi, Eigen::Index count, std::uint64_t seed) {
        const TaskSpec t = make_task(name);
        if (xi.size() != t.param_dim) throw Error("parameter has the wrong dimension");
        RngStream rng(seed);
        return t.simulate(xi, count, rng);
      },
      py::arg("task"), py::arg("xi"), py::arg("count"), py::arg("seed") = 0);

  m.def(
      "generate_reference",
      [](const std::string& name, long n_obs, std::uint64_t seed) {
        const TaskOptions options;
        return generate_reference(make_task(name, options), n_obs, seed, options).observations;
      },
      py::arg("task"), py::arg("n_obs"), py::arg("seed") = 0);

  m.def(
      "gaussian_location_posterior",
      [](const Matrix& reference) {
        const GaussianFull g = gaussian_location_reference(reference);
        return py::make_tuple(Vector(g.mean()), Matrix(g.covariance()));
      },
      py::arg("reference"));

  m.def(
      "run_pli",
      [](const Matrix& reference, const py::dict& settings, const std::string& config) {
        const Settings s = settings_from(settings, config);
        const TaskSpec task = make_task(s.task, s.task_options);
        const MetricSpec metric{s.method.starts_with("w-") ? MetricKind::kWasserstein : MetricKind::kMmd, s.mmd,
                                s.sinkhorn};
        std::optional<PliResult> result;
        {
          py::gil_scoped_release release;
          result = pli_run(task, reference, metric, s.pli, RngStream(s.seed));
        }
        py::list states;
        for (const auto& st : result->states) states.append(state_dict(st));
        return py::make_tuple(Model(result->model), states);
      },
      py::arg("reference"), py::arg("settings") = py::dict(), py::arg("config") = "",
      "Runs PLI on `reference`; returns (model, per-iteration state dicts).");

  m.def(
      "run_abc",
      [](const Matrix& reference, const py::dict& settings, const std::string& config) {
        const Settings s = settings_from(settings, config);
        if (s.method.ends_with("-pli")) throw ConfigError("run_abc needs an ABC method");
        const TaskSpec task = make_task(s.task, s.task_options);
        const MetricSpec metric{s.method.starts_with("w-") ? MetricKind::kWasserstein : MetricKind::kMmd, s.mmd,
                                s.sinkhorn};
        AbcResult result;
        {
          py::gil_scoped_release release;
          result = s.method.ends_with("-smc") ? smc_abc_run(task, reference, metric, s.abc, RngStream(s.seed))
                                              : pmc_abc_run(task, reference, metric, s.abc, RngStream(s.seed));
        }
        std::vector<double> bandwidths;
        for (const auto& h : result.history) bandwidths.push_back(h.bandwidth);
        return py::make_tuple(result.population.particles, result.population.weights, bandwidths);
      },
      py::arg("reference"), py::arg("settings") = py::dict(), py::arg("config") = "",
      "Runs SMC- or PMC-ABC; returns (particles, weights, bandwidth per iteration).");

  m.def(
      "run_experiment",
      [](const py::dict& settings, const std::string& out, const std::string& config) {
        const Settings s = settings_from(settings, config);
        EvalReport r;
        {
          py::gil_scoped_release release;
          r = run_experiment(s, out);
        }
        return report_dict(r);
      },
      py::arg("settings") = py::dict(), py::arg("out") = "runs", py::arg("config") = "",
      "Full run with artifacts under `out`; returns the metrics row.");
}
