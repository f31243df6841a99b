#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "hierfed/rng.hpp"

namespace hierfed {

enum class CropFamily {
  kCannabisFlower,
  kCannabisVeg,
  kLettuce,
  kTomato,
  kHerbs,
  kStrawberry,
};

constexpr int kCropFamilyCount = 6;
const char* crop_family_name(CropFamily f);
CropFamily crop_family_from_name(const std::string& name);

// Agronomic cluster the crop belongs to: cannabis / leafy greens / fruiting.
int crop_cluster_id(CropFamily f);
constexpr int kCropClusterCount = 3;

struct VpdSchedulePoint {
  double day_start = 0.0;  // growth day at which this target becomes active
  double vpd_kpa = 1.0;
};

struct CropProfile {
  CropFamily family = CropFamily::kLettuce;
  std::vector<VpdSchedulePoint> vpd_target_schedule;
  double vpd_tolerance = 0.15;        // kPa
  double transpiration_coeff = 2.8e-5;  // kg/s per kPa per m^2
  double gain_scale = 1.0;            // crop multiplier in the label oracle

  // Exogenous environment schedule (lighting / CO2 enrichment).
  double photoperiod_h = 16.0;
  double ppfd_day = 400.0;   // umol/m^2/s while lights on
  double co2_day = 900.0;    // ppm while lights on
  double co2_night = 450.0;  // ppm while lights off
  double leaf_offset = 1.5;  // t_leaf = t_air - leaf_offset, degC

  double target_vpd(double growth_day) const;
};

struct ThermalParams {
  double c_th = 2.4e7;       // thermal capacitance, J/K
  double c_hum = 1800.0;     // humidity capacitance (dry air mass), kg
  double ua = 2000.0;        // envelope conductance U*A, W/K
  double floor_area = 500.0; // m^2
  double vent_ach = 0.8;     // ventilation air changes per hour
};

// First-order-plus-dead-time actuator. Commands are clamped to
// [u_min, u_max], delayed by dead_time, then lagged with time constant
// tau_p. The lag update is exact for piecewise-constant inputs, so the
// step response does not depend on the integration step.
struct FopdtActuator {
  double gain = 1.0;       // physical output per unit command
  double tau_p = 300.0;    // s
  double dead_time = 30.0; // s
  double u_min = 0.0;
  double u_max = 1.0;

  double state = 0.0;  // current physical output
  double clock = 0.0;  // internal time, s

  // Advances the actuator by dt while commanding u; returns the output at
  // the end of the interval.
  double step(double u, double dt);
  void reset(double initial_output = 0.0);

 private:
  std::deque<std::pair<double, double>> history_;  // (time issued, command)
  double rest_command_ = 0.0;  // effective command before any was issued
  double command_at(double t) const;
};

struct WeatherParams {
  double t_mean = 15.0;        // degC
  double t_diurnal_amp = 6.0;  // degC
  double t_seasonal_amp = 8.0; // degC
  double rh_out_mean = 0.6;    // fraction
  double solar_peak = 0.0;     // W delivered to the zone at solar noon
  double noise_sigma = 0.8;    // degC
};

struct FacilityProfile {
  int id = 0;
  CropProfile crop;
  int climate_zone = 1;  // 1..8
  WeatherParams weather;
  ThermalParams thermal;
  FopdtActuator hvac;   // signed heat, W (u in [-1, 1]: cooling..heating)
  FopdtActuator dehum;  // moisture removal, kg/s (u in [0, 1])
  int zone_count = 1;
  int samples_per_cycle = 10000;  // n_k
};

// --- Presets ---------------------------------------------------------------

CropProfile crop_preset(CropFamily family);

// Climate zones 1..8 spanning hot-arid to cold-humid. solar_peak is given
// per m^2 of floor and scaled to the facility when profiles are built.
WeatherParams climate_preset(int zone);
constexpr int kClimateZoneCount = 8;

// Equipment profiles 0..4 with increasing sluggishness.
struct EquipmentPreset {
  double tau_p;      // s
  double dead_time;  // s
  double size_factor;  // relative actuator sizing
};
EquipmentPreset equipment_preset(int index);
constexpr int kEquipmentPresetCount = 5;

// Assembles a full facility from preset indices; jitter (e.g. 0.1 for
// +/-10%) perturbs the thermal constants through rng.
FacilityProfile make_facility(int id, CropFamily crop, int climate_zone,
                              int equipment_index, int zone_count,
                              int samples_per_cycle, double jitter,
                              RngStream& rng);

// Neutral reference facility used for the server's root dataset.
FacilityProfile reference_facility();

enum class HeterogeneityLevel { kIid, kLow, kMed, kHigh, kFull };

const char* heterogeneity_name(HeterogeneityLevel level);
HeterogeneityLevel heterogeneity_from_name(const std::string& name);

// Builds k facilities drawing crops/climates/equipment round-robin from the
// first (c, z, e) presets for the level: IID 1/1/1, Low 2/2/2, Med 3/4/3,
// High 5/6/4, Full 6/8/5.
std::vector<FacilityProfile> heterogeneity_population(
    HeterogeneityLevel level, int k, int zone_count, int samples_per_cycle,
    RngStream& rng);

}  // namespace hierfed
