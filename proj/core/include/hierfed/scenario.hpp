#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hierfed/facility.hpp"
#include "hierfed/federation.hpp"
#include "hierfed/sim.hpp"

namespace hierfed {

struct ParseError : std::runtime_error {
  ParseError(int line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message),
        line_number(line) {}
  int line_number;
};

struct ByzantineSpec {
  int adversaries = 1;  // sign-flipping adversaries, taken from the highest ids
};

struct ColdStartSpec {
  int join_round = 1;  // 1-based round at which the new facility joins
  CropFamily crop = CropFamily::kLettuce;
  int climate = 4;
  int equipment = 2;
};

struct ExplicitFacilitySpec {
  CropFamily crop = CropFamily::kLettuce;
  int climate = 4;
  int equipment = 2;
  int zones = 0;    // 0 = scenario default
  int samples = 0;  // 0 = scenario default
};

struct ScenarioConfig {
  std::string name = "scenario";
  AlgorithmKind algorithm = AlgorithmKind::kHierFedCEA;

  int facility_count = 12;
  HeterogeneityLevel heterogeneity = HeterogeneityLevel::kFull;
  std::vector<ExplicitFacilitySpec> explicit_facilities;  // overrides generator

  int rounds = 120;
  int sim_days = 60;
  int rounds_per_day = 2;  // maps rounds to simulated days for cold start
  int zone_count = 2;
  int samples_per_cycle = 10000;  // n_k

  RoundConfig round_cfg;
  FeatureScaler features;
  GainScaler gains;

  std::vector<std::uint64_t> seeds = {1};
  std::optional<ByzantineSpec> byzantine;
  std::optional<ColdStartSpec> cold_start;

  void validate() const;  // throws std::invalid_argument on bad invariants
};

// Parses the declarative scenario format: `key = value` lines grouped under
// optional [section] headers, `#` comments. Unknown keys or sections and
// invariant violations raise ParseError with the offending line.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario(const std::string& text);

// The facility population a scenario describes (including the cold-start
// joiner as the last profile, when configured). Deterministic in seed.
std::vector<FacilityProfile> scenario_population(const ScenarioConfig& scenario,
                                                 std::uint64_t seed);

// Compact JSON snapshot of the scenario, embedded in run summaries.
std::string scenario_snapshot_json(const ScenarioConfig& scenario);

}  // namespace hierfed
