#pragma once

namespace hierfed {

// Standard atmospheric pressure used by all moist-air conversions, kPa.
inline constexpr double kAtmPressureKpa = 101.325;

// Saturation vapor pressure over water (Tetens), kPa.
// Valid for t in (-20, 60) degC; throws std::domain_error outside.
double saturation_vapor_pressure(double t_celsius);

// Vapor pressure deficit es(t) * (1 - rh), kPa. rh must lie in [0, 1].
double vpd(double t_air, double rh);

// Humidity ratio (kg water vapor / kg dry air) of air at t degC and the
// given relative humidity.
double humidity_ratio(double t_celsius, double rh);

// Relative humidity implied by (t, omega); not clamped.
double relative_humidity(double t_celsius, double omega);

}  // namespace hierfed
