#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pathchaos/config.hpp"

namespace pathchaos {

// One checked quantity. pass is value <= bound (+ slack where the invariant allows SE slack),
// or the equality/tolerance the invariant names.
struct Record {
  std::string name;
  std::string invariant;
  double value = 0.0;
  double se = 0.0;
  double bound = 0.0;
  bool pass = false;
};

// Plot-ready numeric table, written as CSV.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct RunReport {
  std::string scenario;
  std::string tag;  // distinguishes sweep points, empty otherwise
  std::string config_hash;
  std::string config_text;
  std::uint64_t seed = 0;
  double wall_clock = 0.0;
  std::vector<Record> records;
  // "curve": t, integrand_mean, integrand_se, cum_bound_lambda, cum_bound_sharp, theory_curve
  // "oracle": t, s, c, s_bar, kl_joint, kl_marginal_1
  std::vector<Table> tables;

  bool all_pass() const;
  const Record& find(const std::string& name) const;
};

enum class ScenarioKind { simulate, forward, reversed, oracle, concentration, dpi, knn, null_kernel };

ScenarioKind scenario_kind(const std::string& scenario);
std::vector<std::string> preset_names();
// Preset parameters are our own choices; throws ConfigError for unknown names.
ExperimentConfig preset(const std::string& name);

// Runs one scenario (no sweep expansion) and returns its report.
RunReport run_scenario(const ExperimentConfig& config);

struct SweepResult {
  std::vector<RunReport> points;
  RunReport aggregate;  // cross-point checks; its "sweep" table holds one row per point and T
};

// Expands the sweep lists (forward or reversed functional). T values are read off one run at
// the largest T; the cloud is shared across N and eta.
SweepResult run_sweep(const ExperimentConfig& config);

// Relative spread (max - min) / mean.
double relative_spread(const std::vector<double>& values);

}  // namespace pathchaos
