#include "hierfed/facility.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hierfed {

const char* crop_family_name(CropFamily f) {
  switch (f) {
    case CropFamily::kCannabisFlower: return "cannabis-flower";
    case CropFamily::kCannabisVeg: return "cannabis-veg";
    case CropFamily::kLettuce: return "lettuce";
    case CropFamily::kTomato: return "tomato";
    case CropFamily::kHerbs: return "herbs";
    case CropFamily::kStrawberry: return "strawberry";
  }
  return "unknown";
}

CropFamily crop_family_from_name(const std::string& name) {
  for (int i = 0; i < kCropFamilyCount; ++i) {
    const auto f = static_cast<CropFamily>(i);
    if (name == crop_family_name(f)) return f;
  }
  throw std::invalid_argument("unknown crop family: " + name);
}

int crop_cluster_id(CropFamily f) {
  switch (f) {
    case CropFamily::kCannabisFlower:
    case CropFamily::kCannabisVeg:
      return 0;  // cannabis
    case CropFamily::kLettuce:
    case CropFamily::kHerbs:
      return 1;  // leafy greens
    case CropFamily::kTomato:
    case CropFamily::kStrawberry:
      return 2;  // fruiting crops
  }
  return 0;
}

double CropProfile::target_vpd(double growth_day) const {
  if (vpd_target_schedule.empty()) return 1.0;
  double value = vpd_target_schedule.front().vpd_kpa;
  for (const auto& pt : vpd_target_schedule) {
    if (growth_day >= pt.day_start) value = pt.vpd_kpa;
  }
  return value;
}

// --- FOPDT actuator ----------------------------------------------------------

void FopdtActuator::reset(double initial_output) {
  state = initial_output;
  clock = 0.0;
  history_.clear();
}

double FopdtActuator::command_at(double t) const {
  // Before the first recorded command the actuator holds its resting input.
  if (history_.empty() || t < history_.front().first) return rest_command_;
  double cmd = history_.front().second;
  for (const auto& [when, u] : history_) {
    if (when <= t) cmd = u;
  }
  return cmd;
}

double FopdtActuator::step(double u, double dt) {
  if (!(dt > 0.0)) throw std::domain_error("FopdtActuator::step: dt <= 0");
  const double cmd = std::clamp(u, u_min, u_max);
  if (history_.empty()) {
    rest_command_ = (gain != 0.0) ? state / gain : 0.0;
  }
  if (history_.empty() || history_.back().second != cmd) {
    history_.emplace_back(clock, cmd);
  }

  // Integrate the lag over [clock, clock+dt) against the dead-time-shifted
  // piecewise-constant command signal. Exact for each constant segment.
  double t = clock;
  const double t_end = clock + dt;
  while (t < t_end) {
    double seg_end = t_end;
    for (const auto& [when, u_cmd] : history_) {
      const double effective_at = when + dead_time;
      if (effective_at > t && effective_at < seg_end) seg_end = effective_at;
    }
    const double u_eff = command_at(t - dead_time);
    const double target = gain * u_eff;
    if (tau_p > 0.0) {
      state = target + (state - target) * std::exp(-(seg_end - t) / tau_p);
    } else {
      state = target;
    }
    t = seg_end;
  }
  clock = t_end;

  // Drop history that can no longer influence the future.
  while (history_.size() > 1 &&
         history_[1].first + dead_time <= clock) {
    history_.pop_front();
  }
  return state;
}

// --- Presets -----------------------------------------------------------------

CropProfile crop_preset(CropFamily family) {
  CropProfile c;
  c.family = family;
  switch (family) {
    case CropFamily::kCannabisFlower:
      c.vpd_target_schedule = {{0.0, 1.15}, {25.0, 1.35}};
      c.vpd_tolerance = 0.08;
      c.transpiration_coeff = 3.2e-5;
      c.gain_scale = 1.30;
      c.photoperiod_h = 12.0;
      c.ppfd_day = 900.0;
      c.co2_day = 1150.0;
      c.co2_night = 500.0;
      c.leaf_offset = 2.0;
      break;
    case CropFamily::kCannabisVeg:
      c.vpd_target_schedule = {{0.0, 0.95}};
      c.vpd_tolerance = 0.10;
      c.transpiration_coeff = 3.0e-5;
      c.gain_scale = 1.15;
      c.photoperiod_h = 18.0;
      c.ppfd_day = 650.0;
      c.co2_day = 1050.0;
      c.co2_night = 480.0;
      c.leaf_offset = 1.8;
      break;
    case CropFamily::kLettuce:
      c.vpd_target_schedule = {{0.0, 0.80}};
      c.vpd_tolerance = 0.15;
      c.transpiration_coeff = 2.6e-5;
      c.gain_scale = 1.00;
      c.photoperiod_h = 16.0;
      c.ppfd_day = 260.0;
      c.co2_day = 820.0;
      c.co2_night = 430.0;
      c.leaf_offset = 1.2;
      break;
    case CropFamily::kTomato:
      c.vpd_target_schedule = {{0.0, 0.95}, {30.0, 1.10}};
      c.vpd_tolerance = 0.12;
      c.transpiration_coeff = 3.4e-5;
      c.gain_scale = 0.88;
      c.photoperiod_h = 14.0;
      c.ppfd_day = 420.0;
      c.co2_day = 950.0;
      c.co2_night = 440.0;
      c.leaf_offset = 1.6;
      break;
    case CropFamily::kHerbs:
      c.vpd_target_schedule = {{0.0, 0.90}};
      c.vpd_tolerance = 0.14;
      c.transpiration_coeff = 2.4e-5;
      c.gain_scale = 0.78;
      c.photoperiod_h = 16.0;
      c.ppfd_day = 300.0;
      c.co2_day = 840.0;
      c.co2_night = 430.0;
      c.leaf_offset = 1.3;
      break;
    case CropFamily::kStrawberry:
      c.vpd_target_schedule = {{0.0, 0.85}};
      c.vpd_tolerance = 0.12;
      c.transpiration_coeff = 2.2e-5;
      c.gain_scale = 0.70;
      c.photoperiod_h = 12.0;
      c.ppfd_day = 350.0;
      c.co2_day = 780.0;
      c.co2_night = 420.0;
      c.leaf_offset = 1.4;
      break;
  }
  return c;
}

WeatherParams climate_preset(int zone) {
  // t_mean, diurnal, seasonal, rh_out, solar W/m^2 (scaled later), noise.
  switch (zone) {
    case 1: return {24.0, 9.0, 10.0, 0.30, 60.0, 0.9};  // hot-arid
    case 2: return {25.0, 5.0, 5.0, 0.75, 50.0, 0.7};   // hot-humid
    case 3: return {10.0, 6.0, 13.0, 0.70, 40.0, 1.0};  // cold-humid
    case 4: return {14.0, 4.0, 4.0, 0.70, 45.0, 0.6};   // temperate coastal
    case 5: return {8.0, 8.0, 11.0, 0.45, 55.0, 1.1};   // cold-dry
    case 6: return {12.0, 6.0, 12.0, 0.65, 40.0, 0.9};  // continental
    case 7: return {11.0, 4.0, 7.0, 0.78, 30.0, 0.8};   // marine northwest
    case 8: return {7.0, 9.0, 9.0, 0.40, 55.0, 1.2};    // mountain
    default:
      throw std::invalid_argument("climate zone must be 1..8");
  }
}

EquipmentPreset equipment_preset(int index) {
  switch (index) {
    case 0: return {120.0, 10.0, 1.15};
    case 1: return {300.0, 30.0, 1.05};
    case 2: return {600.0, 60.0, 1.00};
    case 3: return {900.0, 90.0, 0.95};
    case 4: return {1200.0, 120.0, 0.90};
    default:
      throw std::invalid_argument("equipment preset must be 0..4");
  }
}

FacilityProfile make_facility(int id, CropFamily crop, int climate_zone,
                              int equipment_index, int zone_count,
                              int samples_per_cycle, double jitter,
                              RngStream& rng) {
  FacilityProfile f;
  f.id = id;
  f.crop = crop_preset(crop);
  f.climate_zone = climate_zone;
  f.zone_count = zone_count;
  f.samples_per_cycle = samples_per_cycle;

  const auto jit = [&](double v) {
    return (jitter > 0.0) ? v * (1.0 + rng.uniform(-jitter, jitter)) : v;
  };

  ThermalParams th;
  th.floor_area = jit(500.0);
  th.c_th = jit(48000.0) * th.floor_area;
  th.c_hum = 3.5 * th.floor_area;
  th.ua = jit(4.0) * th.floor_area;
  th.vent_ach = 0.8;
  f.thermal = th;

  WeatherParams w = climate_preset(climate_zone);
  w.solar_peak *= th.floor_area;  // preset carries W/m^2
  f.weather = w;

  const EquipmentPreset eq = equipment_preset(equipment_index);

  // Size the HVAC to cover lighting + solar + worst-case envelope load with
  // margin, so every climate can hold setpoint.
  const double q_light = f.crop.ppfd_day / 2.5 * th.floor_area;  // W
  const double dT_worst =
      std::abs(w.t_mean - 24.0) + w.t_diurnal_amp + w.t_seasonal_amp + 3.0;
  const double q_env = th.ua * dT_worst;
  f.hvac.gain = eq.size_factor * 1.3 * (q_light + w.solar_peak + q_env);
  f.hvac.tau_p = eq.tau_p;
  f.hvac.dead_time = eq.dead_time;
  f.hvac.u_min = -1.0;  // cooling
  f.hvac.u_max = 1.0;   // heating

  const double m_transp_max =
      f.crop.transpiration_coeff * 1.8 * th.floor_area;
  const double m_vent = th.vent_ach * th.c_hum / 3600.0;
  f.dehum.gain = eq.size_factor * 1.6 * (m_transp_max + 0.008 * m_vent);
  f.dehum.tau_p = eq.tau_p * 0.6;
  f.dehum.dead_time = eq.dead_time * 0.5;
  f.dehum.u_min = 0.0;
  f.dehum.u_max = 1.0;

  return f;
}

FacilityProfile reference_facility() {
  RngStream rng(0);
  return make_facility(/*id=*/-1, CropFamily::kLettuce, /*climate=*/4,
                       /*equipment=*/2, /*zones=*/1, /*samples=*/500,
                       /*jitter=*/0.0, rng);
}

const char* heterogeneity_name(HeterogeneityLevel level) {
  switch (level) {
    case HeterogeneityLevel::kIid: return "IID";
    case HeterogeneityLevel::kLow: return "Low";
    case HeterogeneityLevel::kMed: return "Med";
    case HeterogeneityLevel::kHigh: return "High";
    case HeterogeneityLevel::kFull: return "Full";
  }
  return "unknown";
}

HeterogeneityLevel heterogeneity_from_name(const std::string& name) {
  for (auto lvl : {HeterogeneityLevel::kIid, HeterogeneityLevel::kLow,
                   HeterogeneityLevel::kMed, HeterogeneityLevel::kHigh,
                   HeterogeneityLevel::kFull}) {
    if (name == heterogeneity_name(lvl)) return lvl;
  }
  throw std::invalid_argument("unknown heterogeneity level: " + name);
}

std::vector<FacilityProfile> heterogeneity_population(
    HeterogeneityLevel level, int k, int zone_count, int samples_per_cycle,
    RngStream& rng) {
  if (k < 1) throw std::invalid_argument("population size must be >= 1");
  int crops = 1, climates = 1, equipment = 1;
  switch (level) {
    case HeterogeneityLevel::kIid: break;
    case HeterogeneityLevel::kLow: crops = 2; climates = 2; equipment = 2; break;
    case HeterogeneityLevel::kMed: crops = 3; climates = 4; equipment = 3; break;
    case HeterogeneityLevel::kHigh: crops = 5; climates = 6; equipment = 4; break;
    case HeterogeneityLevel::kFull: crops = 6; climates = 8; equipment = 5; break;
  }
  std::vector<FacilityProfile> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    out.push_back(make_facility(
        i, static_cast<CropFamily>(i % crops), 1 + (i % climates),
        i % equipment, zone_count, samples_per_cycle, 0.1, rng));
  }
  return out;
}

}  // namespace hierfed
