#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace hierfed {

// One closed-loop evaluation rollout: equal-length series sampled at the
// control period.
struct RolloutTrace {
  std::vector<double> timestamps;   // s
  std::vector<double> vpd_actual;   // kPa
  std::vector<double> vpd_target;   // kPa
  std::vector<double> hvac_power;   // electrical W, >= 0
  std::vector<double> dehum_power;  // electrical W, >= 0
  double floor_area = 1.0;          // m^2

  std::size_t size() const { return timestamps.size(); }
};

// Root-mean-square of (vpd_target - vpd_actual). Throws on an empty trace.
double rmse_vpd(const RolloutTrace& trace);

// Sample standard deviation of vpd_actual. Requires >= 2 points.
double vpd_sigma(const RolloutTrace& trace);

struct OvershootResult {
  double percent = 0.0;
  bool had_steps = false;
};

// Max excursion beyond the new target after each setpoint step, as a percent
// of the step magnitude, averaged over steps. Steps are detected from the
// vpd_target series.
OvershootResult overshoot_pct(const RolloutTrace& trace);

// Time integral of (hvac_power + dehum_power) per floor area, expressed as
// kWh per m^2 per day of trace duration.
double energy_kwh_m2_day(const RolloutTrace& trace);

// First round index (as recorded in the stream) whose fleet-mean RMSE drops
// below the threshold and stays below for `sustain` consecutive rounds.
std::optional<int> rounds_to_convergence(const std::vector<double>& fleet_rmse,
                                         double threshold_kpa = 0.10,
                                         int sustain = 3);

double energy_reduction_pct(double method_energy, double baseline_energy);

// First day at which the joining facility's rollout RMSE comes within the
// 85%-of-fleet-average performance ratio (facility_rmse <= fleet_mean / 0.85).
// `facility_rmse_by_day[d]` holds the facility's RMSE on day d (0-based
// days since joining); returns 1-based days.
std::optional<int> cold_start_days(const std::vector<double>& facility_rmse_by_day,
                                   double fleet_mean_rmse,
                                   double performance_ratio = 0.85);

// Two-sided Wilcoxon signed-rank test for paired samples. Exact null
// distribution for n < 20 after zero-difference removal, normal
// approximation otherwise. Returns p = 1 when all differences are zero.
double paired_wilcoxon(const std::vector<double>& a,
                       const std::vector<double>& b);

// Student-t 95% confidence half-width for a small sample of run means.
double ci95_halfwidth(const std::vector<double>& values);

double mean_of(const std::vector<double>& values);

}  // namespace hierfed
