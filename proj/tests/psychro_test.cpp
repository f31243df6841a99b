#include "doctest.h"
#include "hierfed/psychro.hpp"

#include <stdexcept>

using namespace hierfed;

TEST_CASE("saturation vapor pressure anchors") {
  // Tetens at 0 C: exponent vanishes.
  CHECK(saturation_vapor_pressure(0.0) == doctest::Approx(0.6108).epsilon(1e-12));
  // Psychrometric-table value at 25 C.
  CHECK(saturation_vapor_pressure(25.0) == doctest::Approx(3.169).epsilon(0.002 / 3.169));
  CHECK(saturation_vapor_pressure(30.0) > saturation_vapor_pressure(25.0));
}

TEST_CASE("saturation vapor pressure domain") {
  CHECK_THROWS_AS(saturation_vapor_pressure(-25.0), std::domain_error);
  CHECK_THROWS_AS(saturation_vapor_pressure(60.0), std::domain_error);
}

TEST_CASE("vpd anchors and monotonicity") {
  CHECK(vpd(25.0, 1.0) == doctest::Approx(0.0));
  CHECK(vpd(25.0, 0.5) == doctest::Approx(1.584).epsilon(0.002 / 1.584));
  CHECK(vpd(25.0, 0.6) < vpd(25.0, 0.5));
  CHECK_THROWS_AS(vpd(25.0, 1.2), std::domain_error);
  CHECK_THROWS_AS(vpd(25.0, -0.1), std::domain_error);
}

TEST_CASE("humidity ratio round trip") {
  for (double t : {10.0, 18.0, 24.0, 30.0}) {
    for (double rh : {0.2, 0.5, 0.8, 1.0}) {
      const double omega = humidity_ratio(t, rh);
      CHECK(omega >= 0.0);
      CHECK(relative_humidity(t, omega) == doctest::Approx(rh).epsilon(1e-9));
    }
  }
}
