#include "hierfed/psychro.hpp"

#include <cmath>
#include <stdexcept>

namespace hierfed {

double saturation_vapor_pressure(double t_celsius) {
  if (!(t_celsius > -20.0 && t_celsius < 60.0)) {
    throw std::domain_error("saturation_vapor_pressure: t out of (-20, 60)");
  }
  return 0.6108 * std::exp(17.27 * t_celsius / (t_celsius + 237.3));
}

double vpd(double t_air, double rh) {
  if (!(rh >= 0.0 && rh <= 1.0)) {
    throw std::domain_error("vpd: rh outside [0, 1]");
  }
  return saturation_vapor_pressure(t_air) * (1.0 - rh);
}

double humidity_ratio(double t_celsius, double rh) {
  const double pv = rh * saturation_vapor_pressure(t_celsius);
  return 0.622 * pv / (kAtmPressureKpa - pv);
}

double relative_humidity(double t_celsius, double omega) {
  const double pv = omega * kAtmPressureKpa / (0.622 + omega);
  return pv / saturation_vapor_pressure(t_celsius);
}

}  // namespace hierfed
