#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pli/abc.hpp"
#include "pli/evaluation.hpp"
#include "pli/io.hpp"
#include "pli/ipm.hpp"
#include "pli/pli.hpp"
#include "pli/simulators.hpp"

namespace pli {

struct EvalConfig {
  Eigen::Index posterior_samples = 10000;
  Eigen::Index w2_max_points = 1000;
  Eigen::Index ppc_sims = 1000;
  PpcMode ppc_mode = PpcMode::kPerParameterMean;
  Eigen::Index sync_sims = 1000;
};

struct SweepSpec {
  std::vector<std::string> tasks;
  std::vector<std::string> methods;
  std::vector<long> n_obs;
  std::vector<long> seeds;
};

/// Everything a run or sweep needs. Defaults are the desk-scale profile.
struct Settings {
  std::string task = "gaussian_location";
  std::string method = "mmd-pli";
  long n_obs = 100;
  /// Non-positive means M = N.
  long sims_per_param = 0;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir;

  TaskOptions task_options;
  PliConfig pli;
  AbcConfig abc;
  MmdConfig mmd;
  SinkhornConfig sinkhorn;
  EvalConfig eval;
  SweepSpec sweep;

  Settings();
};

/// Applies one typed "key = value" setting; throws ConfigError for unknown keys or bad values.
void apply_setting(Settings& s, const std::string& key, const std::string& value);
void apply_settings(Settings& s, const KeyValues& kv);
Settings load_settings(const std::string& path);
/// Every schema key with its current value.
KeyValues settings_to_key_values(const Settings& s);
std::vector<std::string> setting_keys();

/// Checks task/method names and method-task compatibility.
void validate_settings(const Settings& s);

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> methods{"mmd-pli",     "w-pli",       "mmd-abc-smc",
                                                "w-abc-smc",   "mmd-abc-pmc", "w-abc-pmc"};
  return methods;
}

}  // namespace pli
