#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hierfed/privacy.hpp"

namespace hierfed {

struct FacilityRoundRow {
  int facility = 0;
  int cluster = 0;
  double loss = 0.0;
  double rmse_vpd = 0.0;
  double sigma_vpd = 0.0;
  double overshoot_pct = 0.0;
  double energy_kwh_m2_day = 0.0;
  double trust = 1.0;
};

struct RoundReport {
  int round = 0;  // 1-based
  std::vector<FacilityRoundRow> rows;
  double fleet_rmse = 0.0;  // mean over honest, joined facilities
  double eps_g = 0.0;
  double eps_c = 0.0;
  std::uint64_t cum_comm_bytes = 0;
  bool tier1_skipped = false;
};

struct RunResult {
  std::string scenario_name;
  std::string method;
  std::uint64_t seed = 0;

  std::vector<RoundReport> reports;

  double final_fleet_rmse = 0.0;
  double worst_case_rmse = 0.0;
  double mean_energy_kwh_m2_day = 0.0;
  std::optional<int> convergence_round;
  std::uint64_t comm_bytes = 0;
  PrivacyLedger ledger;
  std::vector<double> final_facility_rmse;  // by facility id

  // Cold start (when configured): the joiner's per-round rollout RMSE after
  // joining and the honest-fleet mean it is compared against.
  int join_round = 0;  // 0 = no cold start
  std::vector<double> joiner_rmse_by_round;
  double fleet_mean_rmse = 0.0;

  bool failed = false;
  std::string error;
};

// One row per facility per round. Stable formatting; reruns are
// byte-identical.
void write_rounds_csv(const std::string& path, const RunResult& result);

// Run-level JSON summary (scenario snapshot fields plus the metrics above).
void write_summary_json(const std::string& path, const RunResult& result,
                        const std::string& scenario_snapshot);

// Reads back the fields table/plot emission needs.
struct SummaryView {
  std::string scenario_name;
  std::string method;
  std::uint64_t seed = 0;
  std::string heterogeneity;
  double final_fleet_rmse = 0.0;
  double worst_case_rmse = 0.0;
  double mean_energy = 0.0;
  std::optional<int> convergence_round;
  std::uint64_t comm_bytes = 0;
  double eps_g = 0.0;
  double eps_c = 0.0;
  std::vector<double> final_facility_rmse;
  bool failed = false;
};

SummaryView read_summary_json(const std::string& path);

inline const char* kRoundsCsvHeader =
    "round,facility,cluster,loss,rmse_vpd,sigma_vpd,overshoot_pct,"
    "energy_kwh_m2_day,trust,eps_g,eps_c,comm_bytes\n";

}  // namespace hierfed
