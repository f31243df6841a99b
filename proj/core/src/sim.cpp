#include "hierfed/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>

namespace hierfed {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLampEfficacy = 2.5;          // umol per J; lamp heat = ppfd/eff
constexpr double kHvacCop = 3.0;               // electrical = |Q| / COP
constexpr double kDehumSpecificEnergy = 1.0e6; // J per kg of water removed
constexpr double kLightsOnHour = 6.0;

// IMC aggressiveness and the VPD sensitivity used to turn the actuator gain
// into a process gain (kPa of VPD per unit command).
constexpr double kImcAggressiveness = 0.5;
constexpr double kVpdPerKelvin = 0.09;

// Sensor-range-limited saturation pressure for simulator internals; the
// public psychro function keeps its strict domain.
double sat_vp_sensor(double t) {
  const double tc = std::clamp(t, -19.9, 59.9);
  return 0.6108 * std::exp(17.27 * tc / (tc + 237.3));
}

double vpd_sensor(double t, double rh) { return sat_vp_sensor(t) * (1.0 - rh); }

struct Schedule {
  double ppfd = 0.0;
  double co2 = 450.0;
};

Schedule crop_schedule(const CropProfile& crop, double t_seconds) {
  const double hour = std::fmod(t_seconds, 86400.0) / 3600.0;
  const bool lights_on =
      hour >= kLightsOnHour && hour < kLightsOnHour + crop.photoperiod_h;
  return {lights_on ? crop.ppfd_day : 0.0,
          lights_on ? crop.co2_day : crop.co2_night};
}

bool state_finite(const ZoneState& s) {
  return std::isfinite(s.t_air) && std::isfinite(s.omega) &&
         std::isfinite(s.rh) && std::isfinite(s.e_vpd_int);
}

}  // namespace

WeatherSample weather_sample(const WeatherParams& wp, double t_seconds,
                             RngStream& rng) {
  const double day = t_seconds / 86400.0;
  const double hour = std::fmod(t_seconds, 86400.0) / 3600.0;
  WeatherSample ws;
  ws.t_out = wp.t_mean + wp.t_seasonal_amp * std::sin(2.0 * kPi * day / 365.0) +
             wp.t_diurnal_amp * std::sin(2.0 * kPi * hour / 24.0);
  if (wp.noise_sigma > 0.0) ws.t_out += rng.normal(0.0, wp.noise_sigma);
  const double daylight_frac = (hour - 6.0) / 12.0;
  ws.q_solar = (daylight_frac > 0.0 && daylight_frac < 1.0)
                   ? std::max(0.0, wp.solar_peak * std::sin(kPi * daylight_frac))
                   : 0.0;
  const double tc = std::clamp(ws.t_out, -19.9, 59.9);
  ws.w_out = 0.622 * wp.rh_out_mean * sat_vp_sensor(tc) /
             (kAtmPressureKpa - wp.rh_out_mean * sat_vp_sensor(tc));
  return ws;
}

ZoneState step_zone(const ZoneState& state, const FacilityProfile& profile,
                    const WeatherSample& weather, FopdtActuator& hvac,
                    FopdtActuator& dehum, double hvac_cmd, double dehum_cmd,
                    double dt) {
  if (!(dt > 0.0 && dt <= 60.0)) {
    throw std::domain_error("step_zone: dt must be in (0, 60]");
  }
  if (!state_finite(state)) {
    throw SimulationFault("step_zone: non-finite zone state");
  }
  const ThermalParams& th = profile.thermal;

  const double q_hvac = hvac.step(hvac_cmd, dt);   // W, signed
  const double m_dehum = dehum.step(dehum_cmd, dt); // kg/s removed
  const double q_light = state.ppfd / kLampEfficacy * th.floor_area;

  const double vpd_now = vpd_sensor(state.t_air, state.rh);
  const double m_transp =
      profile.crop.transpiration_coeff * vpd_now * th.floor_area;
  const double m_vent = th.vent_ach * th.c_hum / 3600.0;

  ZoneState next = state;
  next.t_air = state.t_air +
               dt *
                   (q_hvac + q_light + weather.q_solar -
                    th.ua * (state.t_air - weather.t_out)) /
                   th.c_th;
  next.omega = state.omega +
               dt *
                   (m_transp - m_dehum + m_vent * (weather.w_out - state.omega)) /
                   th.c_hum;
  next.omega = std::max(0.0, next.omega);

  // Condense out anything beyond saturation, then recompute RH.
  const double pv_sat = sat_vp_sensor(next.t_air);
  const double omega_sat = 0.622 * pv_sat / (kAtmPressureKpa - pv_sat);
  if (next.omega > omega_sat) next.omega = omega_sat;
  const double pv = next.omega * kAtmPressureKpa / (0.622 + next.omega);
  next.rh = std::clamp(pv / pv_sat, 0.0, 1.0);
  next.t_leaf = next.t_air - profile.crop.leaf_offset;

  if (!state_finite(next)) {
    throw SimulationFault("step_zone: state diverged");
  }
  return next;
}

PidResult pid_step(const GainTriple& gains, double e, double e_int,
                   double e_prev, double dt) {
  if (!(dt > 0.0)) throw std::domain_error("pid_step: dt <= 0");
  const double e_int_candidate = e_int + e * dt;
  const double u_raw = gains.kp * e + gains.ki * e_int_candidate +
                       gains.kd * (e - e_prev) / dt;
  PidResult r;
  r.command = std::clamp(u_raw, 0.0, 1.0);
  const bool saturated_with_error =
      (u_raw > 1.0 && e > 0.0) || (u_raw < 0.0 && e < 0.0);
  r.e_int_new = saturated_with_error ? e_int : e_int_candidate;
  return r;
}

GainTriple GainScaler::to_physical(const GainTriple& model) const {
  return {std::clamp(model.kp * kp_unit, kp_min, kp_max),
          std::clamp(model.ki * ki_unit, ki_min, ki_max),
          std::clamp(model.kd * kd_unit, kd_min, kd_max)};
}

GainTriple GainScaler::to_model(const GainTriple& physical) const {
  return {physical.kp / kp_unit, physical.ki / ki_unit, physical.kd / kd_unit};
}

GainTriple label_oracle_physical(const FacilityProfile& profile,
                                 const FeatureVector& x) {
  const FopdtActuator& act = profile.hvac;
  // Process gain seen by the VPD loop: command span 2 (cooling..heating)
  // times the steady-state thermal sensitivity, times dVPD/dT.
  const double g_vpd =
      2.0 * act.gain / profile.thermal.ua * kVpdPerKelvin;
  const double lambda = act.dead_time;  // IMC filter = one dead time
  const double horizon = std::max(act.dead_time + lambda, 1.0);
  const double kp = kImcAggressiveness * act.tau_p / (g_vpd * horizon);
  const double ki = kp / act.tau_p;
  const double kd = kp * act.dead_time / 2.0;

  const double factor =
      profile.crop.gain_scale * (1.0 + 0.3 * std::tanh(x.e_vpd));
  return {kp * factor, ki * factor, kd * factor};
}

GainTriple label_oracle(const FacilityProfile& profile, const FeatureVector& x,
                        const GainScaler& scaler, RngStream* rng) {
  GainTriple y = scaler.to_model(label_oracle_physical(profile, x));
  if (rng != nullptr) {
    y.kp *= 1.0 + 0.02 * rng->normal();
    y.ki *= 1.0 + 0.02 * rng->normal();
    y.kd *= 1.0 + 0.02 * rng->normal();
  }
  return y;
}

namespace {

// One zone advanced in closed loop at the control period; `gain_provider`
// maps the raw feature vector to physical PID gains and `target_provider`
// supplies the active VPD setpoint.
template <typename GainProvider, typename TargetProvider, typename StepSink>
bool run_zone_loop(const FacilityProfile& profile, double start_day,
                   double hours, double control_period, double dt,
                   ZoneState init, RngStream& weather_rng,
                   GainProvider&& gain_provider,
                   TargetProvider&& target_provider, StepSink&& sink) {
  FopdtActuator hvac = profile.hvac;
  FopdtActuator dehum = profile.dehum;
  hvac.reset(0.0);
  dehum.reset(0.0);

  ZoneState state = init;
  double e_prev = 0.0;
  const int steps = static_cast<int>(std::llround(hours * 3600.0 / control_period));
  const int substeps = std::max(1, static_cast<int>(std::llround(control_period / dt)));
  const double sub_dt = control_period / substeps;

  try {
    for (int i = 0; i < steps; ++i) {
      const double t = start_day * 86400.0 + i * control_period;
      const Schedule sched = crop_schedule(profile.crop, t);
      state.co2 = sched.co2;
      state.ppfd = sched.ppfd;

      const WeatherSample weather = weather_sample(profile.weather, t, weather_rng);
      const double growth_day = start_day + i * control_period / 86400.0;
      const double target = target_provider(growth_day, i * control_period);

      const double vpd_now = vpd_sensor(state.t_air, state.rh);
      const double e = target - vpd_now;

      FeatureVector features{state.t_air, state.rh,    state.t_leaf, state.co2,
                             state.ppfd,  e,           state.e_vpd_int};

      const GainTriple gains = gain_provider(features);
      const PidResult pid = pid_step(gains, e, state.e_vpd_int, e_prev, control_period);
      e_prev = e;
      state.e_vpd_int = std::clamp(pid.e_int_new, -500.0, 500.0);

      const double hvac_cmd = 2.0 * pid.command - 1.0;
      const double dehum_cmd = pid.command;
      for (int s = 0; s < substeps; ++s) {
        state = step_zone(state, profile, weather, hvac, dehum, hvac_cmd,
                          dehum_cmd, sub_dt);
      }

      sink(i, t, features, target, vpd_now, hvac.state, dehum.state);
    }
  } catch (const SimulationFault&) {
    return false;
  }
  return true;
}

ZoneState initial_state(double t_air, double rh) {
  ZoneState s;
  s.t_air = t_air;
  s.omega = humidity_ratio(t_air, rh);
  s.rh = rh;
  return s;
}

}  // namespace

DatasetResult generate_dataset(const FacilityProfile& profile, int days,
                               const FeatureScaler& features,
                               const GainScaler& gains, RngStream& rng) {
  if (days < 1) throw std::domain_error("generate_dataset: days >= 1 required");
  DatasetResult result;
  const int sample_stride = 10;  // every 10th control step = one per 100 s

  for (int zone = 0; zone < profile.zone_count; ++zone) {
    RngStream weather_rng(derive_seed(rng.next_u64(), 0x77, zone));
    RngStream label_rng(derive_seed(rng.next_u64(), 0x78, zone));
    const ZoneState init = initial_state(22.0 + rng.uniform(-2.0, 2.0),
                                         0.5 + rng.uniform(0.0, 0.12));

    const bool ok = run_zone_loop(
        profile, /*start_day=*/0.0, /*hours=*/days * 24.0,
        /*control_period=*/10.0, /*dt=*/10.0, init, weather_rng,
        [&](const FeatureVector& x) {
          return label_oracle_physical(profile, x);
        },
        [&](double growth_day, double) {
          return profile.crop.target_vpd(growth_day);
        },
        [&](int step, double, const FeatureVector& x, double, double, double,
            double) {
          if (step % sample_stride != 0) return;
          TrainingSample s;
          const auto norm = features.normalize(x);
          s.x = FeatureVector{norm[0], norm[1], norm[2], norm[3],
                              norm[4], norm[5], norm[6]};
          s.y = label_oracle(profile, x, gains, &label_rng);
          result.samples.push_back(s);
        });
    if (!ok) {
      result.fault = true;
      break;
    }
  }

  // Trim evenly to the configured per-cycle sample count.
  const std::size_t target = static_cast<std::size_t>(profile.samples_per_cycle);
  if (result.samples.size() > target && target > 0) {
    std::vector<TrainingSample> trimmed;
    trimmed.reserve(target);
    for (std::size_t i = 0; i < target; ++i) {
      trimmed.push_back(result.samples[i * result.samples.size() / target]);
    }
    result.samples = std::move(trimmed);
  }
  return result;
}

namespace {

RolloutTrace run_rollout(const FacilityProfile& profile,
                         const FeatureScaler& features, std::uint64_t seed,
                         const RolloutOptions& opt,
                         const std::function<GainTriple(const FeatureVector&)>&
                             physical_gains) {
  RolloutTrace trace;
  trace.floor_area = profile.thermal.floor_area;

  RngStream init_rng(derive_seed(seed, 0x11));
  RngStream weather_rng(derive_seed(seed, 0x12));

  const double sign = init_rng.uniform() < 0.5 ? -1.0 : 1.0;
  const double t0 = 24.0 + sign * opt.init_t_offset + init_rng.uniform(-0.5, 0.5);
  const ZoneState init = initial_state(t0, 0.55);

  const double base_target = profile.crop.target_vpd(opt.start_day);
  const double step_dir = base_target <= 1.0 ? 1.0 : -1.0;

  run_zone_loop(
      profile, opt.start_day, opt.hours, opt.control_period, opt.dt, init,
      weather_rng, physical_gains,
      [&](double growth_day, double elapsed) {
        double tgt = profile.crop.target_vpd(growth_day);
        if (elapsed / 3600.0 >= opt.target_step_hour) {
          tgt += step_dir * opt.target_step_kpa;
        }
        return tgt;
      },
      [&](int, double t, const FeatureVector&, double target, double vpd_now,
          double hvac_out, double dehum_out) {
        trace.timestamps.push_back(t);
        trace.vpd_actual.push_back(vpd_now);
        trace.vpd_target.push_back(target);
        trace.hvac_power.push_back(std::abs(hvac_out) / kHvacCop);
        trace.dehum_power.push_back(std::max(0.0, dehum_out) * kDehumSpecificEnergy);
      });
  return trace;
}

}  // namespace

RolloutTrace evaluate_rollout(const FacilityProfile& profile,
                              const ParamVector& model,
                              const FeatureScaler& features,
                              const GainScaler& gains, std::uint64_t seed,
                              const RolloutOptions& opt) {
  return run_rollout(profile, features, seed, opt,
                     [&](const FeatureVector& x) {
                       const auto norm = features.normalize(x);
                       const GainTriple gm = forward(model, norm);
                       return gains.to_physical(gm);
                     });
}

RolloutTrace evaluate_oracle_rollout(const FacilityProfile& profile,
                                     const FeatureScaler& features,
                                     const GainScaler& gains,
                                     std::uint64_t seed,
                                     const RolloutOptions& opt) {
  return run_rollout(profile, features, seed, opt,
                     [&](const FeatureVector& x) {
                       return label_oracle_physical(profile, x);
                     });
}

void dump_dataset_csv(const std::string& path,
                      const std::vector<TrainingSample>& samples,
                      int facility_id) {
  std::ofstream out(path);
  out << "t_air,rh,t_leaf,co2,ppfd,e_vpd,e_vpd_int,kp,ki,kd,facility,index\n";
  char line[512];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    std::snprintf(line, sizeof(line),
                  "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d,%zu\n",
                  s.x.t_air, s.x.rh, s.x.t_leaf, s.x.co2, s.x.ppfd, s.x.e_vpd,
                  s.x.e_vpd_int, s.y.kp, s.y.ki, s.y.kd, facility_id, i);
    out << line;
  }
}

}  // namespace hierfed
