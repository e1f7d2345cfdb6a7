#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pli/core/error.hpp"
#include "pli/experiment.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kRuntimeExit = 3;

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "settings file (key = value)")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output root (default: $PLI_OUT, else ./runs)");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--threads", c.threads, "worker threads within a run");
  cmd->add_option("--set", c.overrides, "extra setting, key=value (repeatable)");
}

pli::Settings resolve(const Common& c, pli::fs::path& out) {
  pli::Settings s = c.config.empty() ? pli::Settings() : pli::load_settings(c.config);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw pli::ConfigError("--set expects key=value, got '" + kv + "'");
    pli::apply_setting(s, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) pli::apply_setting(s, "run.seed", std::to_string(*c.seed));
  if (c.threads) pli::apply_setting(s, "run.threads", std::to_string(*c.threads));
  if (!c.out.empty()) {
    out = c.out;
  } else if (!s.out_dir.empty()) {
    out = s.out_dir;
  } else if (const char* env = std::getenv("PLI_OUT"); env && *env) {
    out = env;
  } else {
    out = "runs";
  }
  return s;
}

void print_report(const std::vector<pli::AggregateRow>& table) {
  std::cout << pli::aggregate_to_csv(table);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-likelihood inference and ABC experiment driver"};
  app.require_subcommand(1);

  Common gen_opts, run_opts, sweep_opts, report_opts;
  auto* gen = app.add_subcommand("gen-ref", "simulate and persist reference observations");
  add_common(gen, gen_opts);
  auto* run = app.add_subcommand("run", "execute one (task, method, N, seed) run");
  add_common(run, run_opts);
  bool quiet = false;
  run->add_flag("--quiet", quiet, "suppress per-iteration progress");
  auto* sweep = app.add_subcommand("sweep", "run missing cells of the sweep grid and aggregate");
  add_common(sweep, sweep_opts);
  bool collect_only = false;
  sweep->add_flag("--collect-only", collect_only, "aggregate existing runs without executing");
  auto* report = app.add_subcommand("report", "aggregate every row of the metrics table");
  add_common(report, report_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kConfigExit;
  }

  try {
    pli::fs::path out;
    if (gen->parsed()) {
      const pli::Settings s = resolve(gen_opts, out);
      pli::validate_settings(s);
      const pli::ReferenceData ref = pli::write_reference(s, out);
      std::cout << pli::reference_dir(out, s.task, s.n_obs, s.seed).string() << " (" << ref.observations.rows()
                << "x" << ref.observations.cols() << ")\n";
    } else if (run->parsed()) {
      const pli::Settings s = resolve(run_opts, out);
      const pli::EvalReport r = pli::run_experiment(s, out, quiet ? nullptr : &std::cerr);
      std::cout << pli::metrics_row(r) << "\n";
    } else if (sweep->parsed()) {
      const pli::Settings s = resolve(sweep_opts, out);
      const pli::SweepOutcome result = pli::run_sweep(s, out, !collect_only, &std::cerr);
      if (result.table.empty() && result.missing.empty()) std::cerr << "warning: empty sweep grid\n";
      for (const auto& m : result.missing) std::cerr << "missing: " << m << "\n";
      for (const auto& f : result.failed) std::cerr << "failed: " << f << "\n";
      pli::write_text_atomic(out / "sweep_table.csv", pli::aggregate_to_csv(result.table));
      print_report(result.table);
      if (!result.failed.empty()) return kRuntimeExit;
    } else if (report->parsed()) {
      resolve(report_opts, out);
      const auto table = pli::aggregate_metrics(pli::read_metrics(out / "metrics.csv"));
      if (table.empty()) std::cerr << "warning: no metrics rows under " << out.string() << "\n";
      pli::write_text_atomic(out / "report.csv", pli::aggregate_to_csv(table));
      print_report(table);
    }
  } catch (const pli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeExit;
  }
  return 0;
}
