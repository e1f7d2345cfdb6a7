#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pli/config.hpp"
#include "pli/evaluation.hpp"

namespace pli {

namespace fs = std::filesystem;

struct ReferenceData {
  Matrix observations;
  /// Furuta only: N x 4 initial states of the reference rollouts.
  std::optional<Matrix> initial_states;
};

/// N observations at the task's ground truth, from a stream keyed by (seed, task, N).
ReferenceData generate_reference(const TaskSpec& task, long n_obs, std::uint64_t seed, const TaskOptions& options);

fs::path reference_dir(const fs::path& out, const std::string& task, long n_obs, std::uint64_t seed);
fs::path run_dir(const fs::path& out, const Settings& s);

/// Writes the reference files for the settings' (task, N, seed) and returns them.
ReferenceData write_reference(const Settings& s, const fs::path& out);
/// Loads the persisted reference, generating it first if absent.
ReferenceData ensure_reference(const Settings& s, const fs::path& out);

/// Executes one run: inference, artifacts, evaluation, manifest, metrics row.
/// On failure the manifest records status "failed" and the error is rethrown.
EvalReport run_experiment(const Settings& s, const fs::path& out, std::ostream* log = nullptr);

const std::vector<std::string>& metrics_columns();
std::string metrics_row(const EvalReport& r);
void append_metrics(const fs::path& table, const EvalReport& r);
std::vector<EvalReport> read_metrics(const fs::path& table);

struct MetricSummary {
  std::optional<double> mean;
  /// 1.96 * sd / sqrt(n); absent with fewer than two values.
  std::optional<double> ci95;
};

struct AggregateRow {
  std::string task;
  std::string method;
  long n_obs = 0;
  std::size_t seeds = 0;
  std::vector<MetricSummary> metrics;  // one per aggregate_metric_names() entry
};

const std::vector<std::string>& aggregate_metric_names();
/// Groups by (task, method, N); a repeated (task, method, N, seed) keeps its last row.
std::vector<AggregateRow> aggregate_metrics(const std::vector<EvalReport>& rows);
std::string aggregate_to_csv(const std::vector<AggregateRow>& rows);

struct SweepOutcome {
  std::vector<AggregateRow> table;
  std::vector<std::string> missing;
  std::vector<std::string> failed;
};

/// Runs every (task, method, N, seed) cell of the sweep spec without a completed
/// manifest (unless `execute` is false), then aggregates the cells' metrics rows.
SweepOutcome run_sweep(const Settings& base, const fs::path& out, bool execute, std::ostream* log = nullptr);

}  // namespace pli
