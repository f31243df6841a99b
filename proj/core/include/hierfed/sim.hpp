#pragma once

#include <stdexcept>
#include <vector>

#include "hierfed/facility.hpp"
#include "hierfed/metrics.hpp"
#include "hierfed/mlp.hpp"
#include "hierfed/psychro.hpp"
#include "hierfed/rng.hpp"

namespace hierfed {

// Raised when a zone state goes non-finite (simulated sensor fault).
struct SimulationFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ZoneState {
  double t_air = 22.0;     // degC
  double omega = 0.008;    // kg water / kg dry air
  double rh = 0.5;         // derived from (t_air, omega), clamped to [0,1]
  double co2 = 450.0;      // ppm (exogenous schedule)
  double ppfd = 0.0;       // umol/m^2/s (exogenous schedule)
  double t_leaf = 20.5;    // degC
  double e_vpd_int = 0.0;  // accumulated VPD error, kPa*s
};

struct WeatherSample {
  double t_out = 15.0;   // degC
  double w_out = 0.006;  // kg/kg
  double q_solar = 0.0;  // W
};

// Parametric weather: seasonal + diurnal sinusoids plus Gaussian noise on
// temperature; solar follows a half-sine over 06:00-18:00.
WeatherSample weather_sample(const WeatherParams& wp, double t_seconds,
                             RngStream& rng);

// Explicit-Euler update of the coupled thermal/humidity zone dynamics over
// dt seconds. The actuators are advanced with the given command fractions
// and supply the heat / moisture-removal terms. dt must lie in (0, 60].
ZoneState step_zone(const ZoneState& state, const FacilityProfile& profile,
                    const WeatherSample& weather, FopdtActuator& hvac,
                    FopdtActuator& dehum, double hvac_cmd, double dehum_cmd,
                    double dt);

struct PidResult {
  double command = 0.0;    // fraction in [0, 1]
  double e_int_new = 0.0;  // kPa*s
};

// Positional PID with conditional anti-windup: the integrator freezes while
// the command saturates in the same direction as the error.
PidResult pid_step(const GainTriple& gains, double e, double e_int,
                   double e_prev, double dt);

// Fixed diagonal scaling between the model's gain units and physical PID
// gains, plus the positive clamp ranges applied before gains drive the loop.
// Shared fleet-wide so transmitted parameters are comparable.
struct GainScaler {
  double kp_unit = 10.0;   // physical kp per model unit
  double ki_unit = 0.1;    // 1/s per model unit
  double kd_unit = 500.0;  // s per model unit

  double kp_min = 0.1, kp_max = 30.0;
  double ki_min = 1e-4, ki_max = 0.3;
  double kd_min = 1.0, kd_max = 1500.0;

  GainTriple to_physical(const GainTriple& model) const;
  GainTriple to_model(const GainTriple& physical) const;  // no clamping
};

// IMC tuning from the facility's true FOPDT parameters (lambda = dead time),
// scaled by the crop factor and a smooth VPD-error factor. Returns physical
// gains; noiseless and deterministic.
GainTriple label_oracle_physical(const FacilityProfile& profile,
                                 const FeatureVector& x);

// The training target: the physical oracle expressed in model units, with
// 2% multiplicative Gaussian noise when rng is provided.
GainTriple label_oracle(const FacilityProfile& profile, const FeatureVector& x,
                        const GainScaler& scaler, RngStream* rng = nullptr);

struct DatasetResult {
  std::vector<TrainingSample> samples;  // normalized features, model-unit targets
  bool fault = false;
};

// Rolls out the closed-loop simulation of every zone at a 10 s control
// period for `days`, driving the loop with the (noiseless) oracle gains,
// sampling features every 10th control step, and trimming the collection to
// the profile's samples_per_cycle.
DatasetResult generate_dataset(const FacilityProfile& profile, int days,
                               const FeatureScaler& features,
                               const GainScaler& gains, RngStream& rng);

struct RolloutOptions {
  double hours = 24.0;
  double control_period = 10.0;  // s
  double dt = 10.0;              // integration step, divides control_period
  double start_day = 45.0;       // growth/season day the rollout starts at
  double init_t_offset = 3.0;    // initial air-temperature perturbation, degC
  double target_step_kpa = 0.12; // VPD setpoint step injected mid-rollout
  double target_step_hour = 12.0;
};

// Evaluates a gain model on one facility: fixed-seed 24 h closed-loop
// rollout applying model-predicted gains each control step.
RolloutTrace evaluate_rollout(const FacilityProfile& profile,
                              const ParamVector& model,
                              const FeatureScaler& features,
                              const GainScaler& gains, std::uint64_t seed,
                              const RolloutOptions& opt = {});

// Oracle-driven rollout (model replaced by the noiseless label oracle);
// used for calibration and as a floor reference.
RolloutTrace evaluate_oracle_rollout(const FacilityProfile& profile,
                                     const FeatureScaler& features,
                                     const GainScaler& gains,
                                     std::uint64_t seed,
                                     const RolloutOptions& opt = {});

// Writes a dataset as CSV: 7 features + 3 labels + facility id + timestamp.
void dump_dataset_csv(const std::string& path,
                      const std::vector<TrainingSample>& samples,
                      int facility_id);

}  // namespace hierfed
