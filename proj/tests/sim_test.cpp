#include <cmath>
#include <limits>

#include "doctest.h"
#include "hierfed/sim.hpp"

using namespace hierfed;

namespace {

// A bare test facility with quiet weather and small constants so analytic
// time scales are fast.
FacilityProfile test_facility() {
  FacilityProfile f;
  f.id = 0;
  f.crop = crop_preset(CropFamily::kLettuce);
  f.crop.transpiration_coeff = 0.0;  // enabled per test
  f.thermal = {2.0e6, 600.0, 400.0, 100.0, 0.0};
  f.weather = {15.0, 0.0, 0.0, 0.5, 0.0, 0.0};
  f.hvac = FopdtActuator{};
  f.hvac.gain = 0.0;
  f.dehum = FopdtActuator{};
  f.dehum.gain = 0.0;
  f.zone_count = 1;
  return f;
}

ZoneState make_state(double t_air, double rh) {
  ZoneState s;
  s.t_air = t_air;
  s.omega = humidity_ratio(t_air, rh);
  s.rh = rh;
  s.ppfd = 0.0;
  return s;
}

}  // namespace

TEST_CASE("zone equilibrium: zero sources keep T at T_out") {
  FacilityProfile f = test_facility();
  RngStream rng(1);
  const WeatherSample w = weather_sample(f.weather, 0.0, rng);
  ZoneState s = make_state(15.0, 0.5);
  FopdtActuator hvac = f.hvac, dehum = f.dehum;
  for (int i = 0; i < 10000; ++i) {
    s = step_zone(s, f, w, hvac, dehum, 0.0, 0.0, 10.0);
  }
  CHECK(std::abs(s.t_air - 15.0) < 1e-9);
}

TEST_CASE("zone thermal steady state matches T_out + Q/(UA)") {
  FacilityProfile f = test_facility();
  f.hvac.gain = 2000.0;  // W at full command
  f.hvac.tau_p = 30.0;
  f.hvac.dead_time = 0.0;
  f.hvac.u_min = -1.0;
  f.hvac.u_max = 1.0;
  RngStream rng(1);
  const WeatherSample w = weather_sample(f.weather, 0.0, rng);
  ZoneState s = make_state(15.0, 0.5);
  FopdtActuator hvac = f.hvac, dehum = f.dehum;
  // 10 thermal time constants at tau = C_th/UA = 5000 s.
  const double tau = f.thermal.c_th / f.thermal.ua;
  const int steps = static_cast<int>(10.0 * tau / 10.0);
  for (int i = 0; i < steps; ++i) {
    s = step_zone(s, f, w, hvac, dehum, 1.0, 0.0, 10.0);
  }
  const double expected = 15.0 + 2000.0 / 400.0;
  CHECK(std::abs(s.t_air - expected) / expected < 0.01);
}

TEST_CASE("humidity relaxes to the outdoor ratio via ventilation") {
  FacilityProfile f = test_facility();
  f.thermal.vent_ach = 2.0;
  RngStream rng(1);
  const WeatherSample w = weather_sample(f.weather, 0.0, rng);
  ZoneState s = make_state(15.0, 0.9);
  FopdtActuator hvac = f.hvac, dehum = f.dehum;
  for (int i = 0; i < 50000; ++i) {
    s = step_zone(s, f, w, hvac, dehum, 0.0, 0.0, 10.0);
  }
  CHECK(s.omega == doctest::Approx(w.w_out).epsilon(1e-6));
}

TEST_CASE("step_zone rejects bad dt and faults on non-finite state") {
  FacilityProfile f = test_facility();
  RngStream rng(1);
  const WeatherSample w = weather_sample(f.weather, 0.0, rng);
  ZoneState s = make_state(15.0, 0.5);
  FopdtActuator hvac = f.hvac, dehum = f.dehum;
  CHECK_THROWS_AS(step_zone(s, f, w, hvac, dehum, 0.0, 0.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(step_zone(s, f, w, hvac, dehum, 0.0, 0.0, 61.0), std::domain_error);
  s.t_air = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(step_zone(s, f, w, hvac, dehum, 0.0, 0.0, 10.0), SimulationFault);
}

TEST_CASE("psychrometric consistency holds across random states") {
  FacilityProfile f = test_facility();
  f.crop.transpiration_coeff = 3e-5;
  f.hvac.gain = 5000.0;
  f.dehum.gain = 0.01;
  RngStream rng(99);
  FopdtActuator hvac = f.hvac, dehum = f.dehum;
  ZoneState s = make_state(20.0, 0.6);
  for (int i = 0; i < 5000; ++i) {
    const WeatherSample w = weather_sample(f.weather, i * 10.0, rng);
    s = step_zone(s, f, w, hvac, dehum, rng.uniform(-1.0, 1.0),
                  rng.uniform(0.0, 1.0), 10.0);
    CHECK(s.rh >= 0.0);
    CHECK(s.rh <= 1.0);
    CHECK(s.omega >= 0.0);
  }
}

TEST_CASE("fopdt: pure delay before dead time") {
  FopdtActuator a;
  a.gain = 10.0;
  a.tau_p = 60.0;
  a.dead_time = 30.0;
  a.reset(0.0);
  // Query the output while t < dead_time.
  CHECK(a.step(1.0, 10.0) == doctest::Approx(0.0));
  CHECK(a.step(1.0, 10.0) == doctest::Approx(0.0));
  CHECK(a.step(1.0, 9.9) == doctest::Approx(0.0));
  // Past the dead time the lag starts moving.
  CHECK(a.step(1.0, 10.0) > 0.0);
}

TEST_CASE("fopdt: step response hits 63.2% at dead_time + tau_p") {
  FopdtActuator a;
  a.gain = 5.0;
  a.tau_p = 120.0;
  a.dead_time = 40.0;
  a.reset(0.0);
  double out = 0.0;
  const double t_end = a.dead_time + a.tau_p;
  for (double t = 0.0; t < t_end - 0.5; t += 1.0) {
    out = a.step(1.0, 1.0);
  }
  const double expected = 5.0 * (1.0 - std::exp(-1.0));
  CHECK(std::abs(out - expected) / expected < 0.02);
}

TEST_CASE("fopdt: command saturation clamps to u_max") {
  FopdtActuator a;
  a.gain = 2.0;
  a.tau_p = 50.0;
  a.dead_time = 0.0;
  a.u_max = 0.7;
  a.reset(0.0);
  FopdtActuator b = a;
  double out_a = 0.0, out_b = 0.0;
  for (int i = 0; i < 100; ++i) {
    out_a = a.step(5.0, 10.0);
    out_b = b.step(0.7, 10.0);
  }
  CHECK(out_a == doctest::Approx(out_b).epsilon(1e-12));
  CHECK(out_a <= 2.0 * 0.7 + 1e-12);
}

TEST_CASE("fopdt: causality - output ignores commands newer than t - dead_time") {
  FopdtActuator a;
  a.gain = 1.0;
  a.tau_p = 30.0;
  a.dead_time = 50.0;
  a.reset(0.0);
  FopdtActuator b = a;
  // Identical first 5 steps, then divergent commands; outputs must agree
  // until the divergence clears the dead time.
  double out_a = 0.0, out_b = 0.0;
  for (int i = 0; i < 5; ++i) {
    out_a = a.step(0.5, 10.0);
    out_b = b.step(0.5, 10.0);
  }
  for (int i = 0; i < 5; ++i) {  // divergence clears the delay line at t=100
    out_a = a.step(1.0, 10.0);
    out_b = b.step(0.0, 10.0);
    CHECK(out_a == doctest::Approx(out_b).epsilon(1e-12));
  }
  a.step(1.0, 10.0);
  b.step(0.0, 10.0);
  CHECK(a.state != b.state);
}

TEST_CASE("pid: zero error gives zero command") {
  const PidResult r = pid_step({1.0, 0.5, 2.0}, 0.0, 0.0, 0.0, 10.0);
  CHECK(r.command == 0.0);
  CHECK(r.e_int_new == 0.0);
}

TEST_CASE("pid: pure proportional inside saturation") {
  const PidResult r = pid_step({1.0, 0.0, 0.0}, 0.3, 0.0, 0.3, 10.0);
  CHECK(r.command == doctest::Approx(0.3));
}

TEST_CASE("pid: anti-windup freezes the integrator while saturated") {
  GainTriple g{2.0, 0.1, 0.0};
  double e_int = 0.0;
  double u = 0.0;
  for (int i = 0; i < 10; ++i) {
    const PidResult r = pid_step(g, 1.0, e_int, 1.0, 10.0);
    u = r.command;
    e_int = r.e_int_new;
  }
  CHECK(u == 1.0);
  // Saturated in the error's direction from the first step onward.
  CHECK(e_int == doctest::Approx(0.0));
}

TEST_CASE("weather: degenerate parameters give a constant trace") {
  WeatherParams wp{18.0, 0.0, 0.0, 0.6, 0.0, 0.0};
  RngStream rng(4);
  for (double t : {0.0, 3600.0, 86400.0, 1e6}) {
    const WeatherSample w = weather_sample(wp, t, rng);
    CHECK(w.t_out == doctest::Approx(18.0));
  }
}

TEST_CASE("weather: no solar at midnight, reproducible with a seeded stream") {
  WeatherParams wp{18.0, 5.0, 6.0, 0.6, 500.0, 1.0};
  RngStream a(11), b(11);
  const WeatherSample w0 = weather_sample(wp, 0.0, a);  // midnight
  CHECK(w0.q_solar == 0.0);
  RngStream a2(11);
  for (int i = 0; i < 100; ++i) {
    const WeatherSample x = weather_sample(wp, i * 600.0, b);
    const WeatherSample y = weather_sample(wp, i * 600.0, a2);
    (void)x;
    (void)y;
  }
  RngStream c(11), d(11);
  for (int i = 0; i < 100; ++i) {
    CHECK(weather_sample(wp, i * 600.0, c).t_out ==
          weather_sample(wp, i * 600.0, d).t_out);
  }
}

TEST_CASE("label oracle: deterministic core, gain inverse, vpd factor") {
  RngStream rng(5);
  FacilityProfile a = make_facility(0, CropFamily::kTomato, 2, 1, 1, 1000, 0.0, rng);
  FacilityProfile b = a;
  b.id = 1;
  FeatureVector x{24.0, 0.55, 22.5, 900.0, 400.0, 0.1, 5.0};

  const GainTriple ya = label_oracle_physical(a, x);
  const GainTriple yb = label_oracle_physical(b, x);
  CHECK(ya.kp == yb.kp);
  CHECK(ya.ki == yb.ki);
  CHECK(ya.kd == yb.kd);

  FacilityProfile doubled = a;
  doubled.hvac.gain *= 2.0;
  const GainTriple yd = label_oracle_physical(doubled, x);
  CHECK(yd.kp == doctest::Approx(ya.kp / 2.0).epsilon(1e-12));

  FeatureVector x0 = x;
  x0.e_vpd = 0.0;
  const GainTriple y0 = label_oracle_physical(a, x0);
  // tanh(0) = 0: the VPD factor is exactly 1, so ki keeps the IMC relation.
  CHECK(y0.ki == doctest::Approx(y0.kp / a.hvac.tau_p).epsilon(1e-12));
  CHECK(y0.kd == doctest::Approx(y0.kp * a.hvac.dead_time / 2.0).epsilon(1e-12));
}

TEST_CASE("dataset generation: deterministic, sized, and invariant-clean") {
  RngStream prof_rng(6);
  FacilityProfile f =
      make_facility(0, CropFamily::kLettuce, 4, 1, 2, 400, 0.1, prof_rng);
  FeatureScaler features;
  GainScaler gains;

  RngStream r1(77), r2(77);
  const DatasetResult d1 = generate_dataset(f, 2, features, gains, r1);
  const DatasetResult d2 = generate_dataset(f, 2, features, gains, r2);
  CHECK_FALSE(d1.fault);
  CHECK(d1.samples.size() == 400);  // trimmed to n_k
  REQUIRE(d1.samples.size() == d2.samples.size());
  for (std::size_t i = 0; i < d1.samples.size(); ++i) {
    CHECK(d1.samples[i].x.t_air == d2.samples[i].x.t_air);
    CHECK(d1.samples[i].y.kp == d2.samples[i].y.kp);
  }
  for (const auto& s : d1.samples) {
    CHECK(s.x.finite());
    CHECK(s.y.finite());
    CHECK(s.x.rh >= 0.0);
    CHECK(s.x.rh <= 1.0);
  }

  // Raw collection rate: ~864 per day per zone before trimming.
  FacilityProfile untrimmed = f;
  untrimmed.samples_per_cycle = 100000;
  RngStream r3(77);
  const DatasetResult d3 = generate_dataset(untrimmed, 2, features, gains, r3);
  CHECK(d3.samples.size() == 2 * 2 * 864);
}

TEST_CASE("trajectories change < 0.5% when halving the integration step") {
  RngStream prof_rng(8);
  FacilityProfile f =
      make_facility(0, CropFamily::kTomato, 4, 1, 1, 400, 0.0, prof_rng);
  FeatureScaler features;
  GainScaler gains;

  RolloutOptions coarse;
  coarse.hours = 24.0;
  coarse.dt = 10.0;
  RolloutOptions fine = coarse;
  fine.dt = 5.0;

  const RolloutTrace a = evaluate_oracle_rollout(f, features, gains, 123, coarse);
  const RolloutTrace b = evaluate_oracle_rollout(f, features, gains, 123, fine);
  REQUIRE(a.size() == b.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a.vpd_actual[i] - b.vpd_actual[i]) * (a.vpd_actual[i] - b.vpd_actual[i]);
    den += a.vpd_actual[i] * a.vpd_actual[i];
  }
  CHECK(std::sqrt(num / den) < 0.005);
}

TEST_CASE("energy balance: all sources zero keeps T constant to 1e-9 over 1e4 steps") {
  FacilityProfile f = test_facility();
  RngStream rng(1);
  const WeatherSample w = weather_sample(f.weather, 0.0, rng);
  ZoneState s = make_state(15.0, 0.4);
  FopdtActuator hvac = f.hvac, dehum = f.dehum;
  for (int i = 0; i < 10000; ++i) {
    s = step_zone(s, f, w, hvac, dehum, 0.3, 0.3, 10.0);  // gain 0 actuators
  }
  CHECK(std::abs(s.t_air - 15.0) <= 1e-9);
}
