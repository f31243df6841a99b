#pragma once

#include <string>
#include <vector>

#include "hierfed/engine.hpp"

namespace hierfed {

struct RunArtifact {
  std::string scenario_name;
  std::string method;
  std::uint64_t seed = 0;
  std::string rounds_csv_path;
  std::string summary_json_path;
  std::string version = "hierfed-0.1.0";
  bool failed = false;
  std::string error;
};

// Executes one (scenario, seed) run and persists rounds.csv + summary.json
// under out_dir/<name>_<method>_seed<seed>/. Never throws for run failures;
// those are recorded in the artifact and its summary.
RunArtifact run_one(const ScenarioConfig& scenario, std::uint64_t seed,
                    const std::string& out_dir, int workers,
                    const Fleet* fleet = nullptr);

// Runs every (scenario, seed) pair. Independent runs may execute on
// parallel workers; a crashing run never corrupts the others' artifacts.
std::vector<RunArtifact> run_suite(const std::vector<ScenarioConfig>& scenarios,
                                   const std::string& out_dir, int workers);

// Loads every *.scn file in a directory (sorted by name).
std::vector<ScenarioConfig> load_scenario_dir(const std::string& dir);

// Comparison table over run summaries, one row per method with columns:
// method, rmse_mean, rmse_ci, energy_red_pct, rounds_to_conv,
// worst_case_rmse, eps_g, eps_c, comm_bytes. Energy reduction is computed
// against the LocalOnly rows in the same artifact set.
void emit_table(const std::vector<std::string>& summary_paths,
                const std::string& out_csv_path);

// Heterogeneity plot data: heterogeneity, method, rmse_mean, rmse_ci.
void emit_plotdata(const std::vector<std::string>& summary_paths,
                   const std::string& out_csv_path);

}  // namespace hierfed
