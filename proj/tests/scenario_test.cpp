#include <set>

#include "doctest.h"
#include "hierfed/scenario.hpp"

using namespace hierfed;

TEST_CASE("minimal scenario gets the documented defaults") {
  const ScenarioConfig cfg = parse_scenario(
      "algorithm = FedAvg\n"
      "facilities = 2\n"
      "rounds = 5\n"
      "seeds = 1\n");
  CHECK(cfg.algorithm == AlgorithmKind::kFedAvg);
  CHECK(cfg.facility_count == 2);
  CHECK(cfg.rounds == 5);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1});
  // Defaults.
  CHECK(cfg.round_cfg.lr == 0.01);
  CHECK(cfg.round_cfg.local_epochs == 5);
  CHECK(cfg.round_cfg.batch == 64);
  CHECK(cfg.round_cfg.prox_mu == 0.01);
  CHECK(cfg.round_cfg.dp.clip_c == 1.0);
  CHECK(cfg.round_cfg.dp.z_g == 0.8);
  CHECK(cfg.round_cfg.dp.z_c == 1.0);
  CHECK(cfg.round_cfg.dp.delta == 1e-5);
  CHECK(cfg.round_cfg.tau == 0.15);
  CHECK(cfg.round_cfg.t_warm == 20);
  CHECK(cfg.samples_per_cycle == 10000);
}

TEST_CASE("unknown keys fail with the line number") {
  try {
    parse_scenario("algorithm = FedAvg\nbogus_key = 3\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line_number == 2);
    CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
  }
}

TEST_CASE("invalid rh feature range names the field") {
  try {
    parse_scenario(
        "algorithm = FedAvg\n"
        "[features]\n"
        "rh = 0 1.5\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("rh") != std::string::npos);
    CHECK(e.line_number == 3);
  }
}

TEST_CASE("sections parse into the right knobs") {
  const ScenarioConfig cfg = parse_scenario(
      "name = t\n"
      "algorithm = HierFedCEA\n"
      "facilities = 4\n"
      "rounds = 10\n"
      "seeds = 1 2\n"
      "heterogeneity = Med\n"
      "[round]\n"
      "lr = 0.02\n"
      "trust_weighting = false\n"
      "[dp]\n"
      "z_g = 0\n"
      "z_c = 0\n"
      "[byzantine]\n"
      "adversaries = 1\n"
      "[cold_start]\n"
      "join_round = 3\n"
      "crop = tomato\n");
  CHECK(cfg.heterogeneity == HeterogeneityLevel::kMed);
  CHECK(cfg.round_cfg.lr == 0.02);
  CHECK_FALSE(cfg.round_cfg.trust_weighting);
  CHECK(cfg.round_cfg.dp.z_g == 0.0);
  REQUIRE(cfg.byzantine.has_value());
  CHECK(cfg.byzantine->adversaries == 1);
  REQUIRE(cfg.cold_start.has_value());
  CHECK(cfg.cold_start->join_round == 3);
  CHECK(cfg.cold_start->crop == CropFamily::kTomato);
}

TEST_CASE("invariant violations are rejected") {
  CHECK_THROWS_AS(parse_scenario("rounds = 0\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("algorithm = NotAMethod\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("[round]\ntau = 3.0\n"), ParseError);
}

TEST_CASE("explicit facility sections") {
  const ScenarioConfig cfg = parse_scenario(
      "algorithm = LocalOnly\n"
      "rounds = 2\n"
      "seeds = 1\n"
      "[facility.0]\n"
      "crop = lettuce\n"
      "climate = 2\n"
      "equipment = 1\n"
      "[facility.1]\n"
      "crop = herbs\n"
      "climate = 5\n");
  REQUIRE(cfg.explicit_facilities.size() == 2);
  const auto pop = scenario_population(cfg, 1);
  CHECK(pop.size() == 2);
  CHECK(pop[0].crop.family == CropFamily::kLettuce);
  CHECK(pop[1].climate_zone == 5);
}

TEST_CASE("heterogeneity populations follow the level recipe") {
  RngStream rng(3);
  const auto iid = heterogeneity_population(HeterogeneityLevel::kIid, 10, 1, 100, rng);
  std::set<CropFamily> crops;
  std::set<int> climates;
  for (const auto& f : iid) {
    crops.insert(f.crop.family);
    climates.insert(f.climate_zone);
  }
  CHECK(crops.size() == 1);
  CHECK(climates.size() == 1);

  RngStream rng2(3);
  const auto full = heterogeneity_population(HeterogeneityLevel::kFull, 30, 1, 100, rng2);
  std::set<CropFamily> full_crops;
  std::set<int> full_climates;
  for (const auto& f : full) {
    full_crops.insert(f.crop.family);
    full_climates.insert(f.climate_zone);
  }
  CHECK(full_crops.size() == 6);
  CHECK(full_climates.size() == 8);

  RngStream a(9), b(9);
  const auto p1 = heterogeneity_population(HeterogeneityLevel::kHigh, 12, 1, 100, a);
  const auto p2 = heterogeneity_population(HeterogeneityLevel::kHigh, 12, 1, 100, b);
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].thermal.c_th == p2[i].thermal.c_th);
    CHECK(p1[i].crop.family == p2[i].crop.family);
  }
}
