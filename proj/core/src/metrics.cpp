#include "hierfed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hierfed {

namespace {

double standard_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Two-sided p-value from the exact null distribution of the signed-rank
// statistic W+ over all 2^n sign assignments, computed by dynamic
// programming over integer-doubled ranks (average ranks for ties can be
// half-integers, so ranks are doubled to stay integral).
double exact_signed_rank_p(const std::vector<double>& ranks, double w_plus) {
  std::vector<int> doubled;
  doubled.reserve(ranks.size());
  long long total = 0;
  for (double r : ranks) {
    const int d = static_cast<int>(std::llround(2.0 * r));
    doubled.push_back(d);
    total += d;
  }
  // counts[s] = number of sign assignments with doubled W+ == s.
  std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
  counts[0] = 1.0;
  for (int d : doubled) {
    for (long long s = total; s >= d; --s) {
      counts[static_cast<std::size_t>(s)] +=
          counts[static_cast<std::size_t>(s - d)];
    }
  }
  const double n_assignments = std::pow(2.0, static_cast<double>(ranks.size()));
  const long long w2 = static_cast<long long>(std::llround(2.0 * w_plus));
  double le = 0.0, ge = 0.0;
  for (long long s = 0; s <= total; ++s) {
    const double c = counts[static_cast<std::size_t>(s)];
    if (s <= w2) le += c;
    if (s >= w2) ge += c;
  }
  const double p = 2.0 * std::min(le, ge) / n_assignments;
  return std::min(1.0, p);
}

}  // namespace

double mean_of(const std::vector<double>& values) {
  if (values.empty()) throw std::domain_error("mean_of: empty");
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double rmse_vpd(const RolloutTrace& trace) {
  if (trace.size() == 0) throw std::domain_error("rmse_vpd: empty trace");
  double acc = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double e = trace.vpd_target[i] - trace.vpd_actual[i];
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(trace.size()));
}

double vpd_sigma(const RolloutTrace& trace) {
  if (trace.size() < 2) throw std::domain_error("vpd_sigma: need >= 2 points");
  const double m = std::accumulate(trace.vpd_actual.begin(),
                                   trace.vpd_actual.end(), 0.0) /
                   static_cast<double>(trace.size());
  double acc = 0.0;
  for (double v : trace.vpd_actual) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(trace.size() - 1));
}

OvershootResult overshoot_pct(const RolloutTrace& trace) {
  OvershootResult result;
  if (trace.size() < 2) return result;

  std::vector<std::size_t> steps;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace.vpd_target[i] != trace.vpd_target[i - 1]) steps.push_back(i);
  }
  if (steps.empty()) return result;
  result.had_steps = true;

  double acc = 0.0;
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const std::size_t at = steps[s];
    const std::size_t end = (s + 1 < steps.size()) ? steps[s + 1] : trace.size();
    const double new_target = trace.vpd_target[at];
    const double magnitude = std::abs(new_target - trace.vpd_target[at - 1]);
    const double dir = (new_target > trace.vpd_target[at - 1]) ? 1.0 : -1.0;
    double worst = 0.0;
    for (std::size_t i = at; i < end; ++i) {
      // Excursion past the new target in the direction of the step.
      worst = std::max(worst, dir * (trace.vpd_actual[i] - new_target));
    }
    acc += 100.0 * worst / magnitude;
  }
  result.percent = acc / static_cast<double>(steps.size());
  return result;
}

double energy_kwh_m2_day(const RolloutTrace& trace) {
  if (trace.size() == 0) return 0.0;
  if (trace.size() == 1) return 0.0;
  double joules = 0.0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const double dt = trace.timestamps[i] - trace.timestamps[i - 1];
    joules += (trace.hvac_power[i] + trace.dehum_power[i]) * dt;
  }
  const double duration_days =
      (trace.timestamps.back() - trace.timestamps.front()) / 86400.0;
  if (duration_days <= 0.0) return 0.0;
  const double kwh = joules / 3.6e6;
  return kwh / trace.floor_area / duration_days;
}

std::optional<int> rounds_to_convergence(const std::vector<double>& fleet_rmse,
                                         double threshold_kpa, int sustain) {
  const int n = static_cast<int>(fleet_rmse.size());
  for (int r = 0; r + sustain <= n; ++r) {
    bool held = true;
    for (int w = 0; w < sustain; ++w) {
      if (!(fleet_rmse[r + w] < threshold_kpa)) {
        held = false;
        break;
      }
    }
    if (held) return r + 1;  // rounds are 1-based
  }
  return std::nullopt;
}

double energy_reduction_pct(double method_energy, double baseline_energy) {
  if (baseline_energy == 0.0) return 0.0;
  return 100.0 * (baseline_energy - method_energy) / baseline_energy;
}

std::optional<int> cold_start_days(const std::vector<double>& facility_rmse_by_day,
                                   double fleet_mean_rmse,
                                   double performance_ratio) {
  const double threshold = fleet_mean_rmse / performance_ratio;
  for (std::size_t d = 0; d < facility_rmse_by_day.size(); ++d) {
    if (facility_rmse_by_day[d] <= threshold) return static_cast<int>(d) + 1;
  }
  return std::nullopt;
}

double paired_wilcoxon(const std::vector<double>& a,
                       const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("paired_wilcoxon: length mismatch");
  }
  if (a.size() < 6) {
    throw std::invalid_argument("paired_wilcoxon: need >= 6 pairs");
  }

  std::vector<double> diffs;
  diffs.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) return 1.0;

  // Rank |d| ascending with average ranks for ties.
  std::vector<std::size_t> order(diffs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::abs(diffs[x]) < std::abs(diffs[y]);
  });
  std::vector<double> rank(diffs.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() &&
           std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) {
      ++j;
    }
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }

  double w_plus = 0.0;
  for (std::size_t k = 0; k < diffs.size(); ++k) {
    if (diffs[k] > 0.0) w_plus += rank[k];
  }

  const std::size_t n = diffs.size();
  if (n < 20) {
    return exact_signed_rank_p(rank, w_plus);
  }
  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  const double sd = std::sqrt(nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0);
  const double z = (w_plus - mean) / sd;
  return std::min(1.0, 2.0 * standard_normal_cdf(-std::abs(z)));
}

double ci95_halfwidth(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const double m = mean_of(values);
  double acc = 0.0;
  for (double v : values) acc += (v - m) * (v - m);
  const double se = std::sqrt(acc / static_cast<double>(n - 1)) /
                    std::sqrt(static_cast<double>(n));
  // Two-sided 97.5% Student-t quantiles for small n.
  static const double t_table[] = {0.0,   12.706, 4.303, 3.182, 2.776,
                                   2.571, 2.447,  2.365, 2.306, 2.262};
  const double t = (n - 1 < 10) ? t_table[n - 1] : 2.0;
  return t * se;
}

}  // namespace hierfed
