#include "hierfed/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace hierfed {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

struct Field {
  std::string section;
  std::string key;
  std::string value;
  int line;
};

double parse_number(const Field& f) {
  try {
    std::size_t used = 0;
    const double v = std::stod(f.value, &used);
    if (used != f.value.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw ParseError(f.line, "expected a number for '" + f.key + "', got '" +
                                 f.value + "'");
  }
}

int parse_int(const Field& f) {
  const double v = parse_number(f);
  if (v != std::floor(v)) {
    throw ParseError(f.line, "expected an integer for '" + f.key + "'");
  }
  return static_cast<int>(v);
}

bool parse_bool(const Field& f) {
  if (f.value == "true" || f.value == "1") return true;
  if (f.value == "false" || f.value == "0") return false;
  throw ParseError(f.line, "expected true/false for '" + f.key + "'");
}

std::pair<double, double> parse_range(const Field& f) {
  std::istringstream in(f.value);
  double lo = 0.0, hi = 0.0;
  if (!(in >> lo >> hi)) {
    throw ParseError(f.line, "expected 'lo hi' pair for '" + f.key + "'");
  }
  std::string rest;
  if (in >> rest) throw ParseError(f.line, "trailing junk in '" + f.key + "'");
  return {lo, hi};
}

void apply_feature_range(ScenarioConfig& cfg, const Field& f, int index) {
  const auto [lo, hi] = parse_range(f);
  if (!(lo < hi)) {
    throw ParseError(f.line, "feature range for '" + f.key + "' must have lo < hi");
  }
  if (f.key == "rh" && (lo < 0.0 || hi > 1.0)) {
    throw ParseError(f.line, "rh range must lie within [0, 1]");
  }
  cfg.features.lo[static_cast<std::size_t>(index)] = lo;
  cfg.features.hi[static_cast<std::size_t>(index)] = hi;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("scenario: seeds must be non-empty");
  if (rounds < 1) throw std::invalid_argument("scenario: rounds must be >= 1");
  if (facility_count < 1 && explicit_facilities.empty()) {
    throw std::invalid_argument("scenario: facility count must be >= 1");
  }
  if (sim_days < 1) throw std::invalid_argument("scenario: sim_days must be >= 1");
  if (rounds_per_day < 1) {
    throw std::invalid_argument("scenario: rounds_per_day must be >= 1");
  }
  if (samples_per_cycle < 1) {
    throw std::invalid_argument("scenario: samples_per_cycle must be >= 1");
  }
  if (round_cfg.local_epochs < 1 || round_cfg.batch < 1 ||
      !(round_cfg.lr >= 0.0) || round_cfg.prox_mu < 0.0) {
    throw std::invalid_argument("scenario: invalid round configuration");
  }
  if (!(round_cfg.tau > 0.0 && round_cfg.tau < 2.0)) {
    throw std::invalid_argument("scenario: tau must lie in (0, 2)");
  }
  if (!(round_cfg.dp.clip_c > 0.0) || round_cfg.dp.z_g < 0.0 ||
      round_cfg.dp.z_c < 0.0 || !(round_cfg.dp.delta > 0.0) ||
      !(round_cfg.dp.delta < 1.0)) {
    throw std::invalid_argument("scenario: invalid dp configuration");
  }
  if (byzantine && byzantine->adversaries < 0) {
    throw std::invalid_argument("scenario: adversary count must be >= 0");
  }
  if (cold_start && cold_start->join_round < 1) {
    throw std::invalid_argument("scenario: join_round must be >= 1");
  }
}

ScenarioConfig parse_scenario(const std::string& text) {
  ScenarioConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  int current_facility = -1;

  static const char* kFeatureKeys[] = {"t_air", "rh",    "t_leaf", "co2",
                                       "ppfd",  "e_vpd", "e_vpd_int"};

  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.rfind("facility.", 0) == 0) {
        const std::string idx = section.substr(9);
        try {
          current_facility = std::stoi(idx);
        } catch (const std::exception&) {
          throw ParseError(line_no, "bad facility index '" + idx + "'");
        }
        if (current_facility != static_cast<int>(cfg.explicit_facilities.size())) {
          throw ParseError(line_no, "facility sections must be consecutive from 0");
        }
        cfg.explicit_facilities.emplace_back();
      } else if (section != "round" && section != "dp" && section != "features" &&
                 section != "gains" && section != "byzantine" &&
                 section != "cold_start") {
        throw ParseError(line_no, "unknown section [" + section + "]");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(line_no, "expected 'key = value'");
    }
    Field f{section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    if (f.value.empty()) throw ParseError(line_no, "empty value for '" + f.key + "'");

    try {
      if (f.section.empty()) {
        if (f.key == "name") cfg.name = f.value;
        else if (f.key == "algorithm") cfg.algorithm = algorithm_from_name(f.value);
        else if (f.key == "facilities") cfg.facility_count = parse_int(f);
        else if (f.key == "heterogeneity") cfg.heterogeneity = heterogeneity_from_name(f.value);
        else if (f.key == "rounds") cfg.rounds = parse_int(f);
        else if (f.key == "sim_days") cfg.sim_days = parse_int(f);
        else if (f.key == "rounds_per_day") cfg.rounds_per_day = parse_int(f);
        else if (f.key == "zone_count") cfg.zone_count = parse_int(f);
        else if (f.key == "samples_per_cycle") cfg.samples_per_cycle = parse_int(f);
        else if (f.key == "seeds") {
          cfg.seeds.clear();
          std::istringstream ss(f.value);
          std::string tok;
          while (ss >> tok) {
            cfg.seeds.push_back(static_cast<std::uint64_t>(std::stoull(tok)));
          }
          if (cfg.seeds.empty()) throw ParseError(f.line, "seeds list is empty");
        } else {
          throw ParseError(f.line, "unknown key '" + f.key + "'");
        }
      } else if (f.section == "round") {
        auto& rc = cfg.round_cfg;
        if (f.key == "local_epochs") rc.local_epochs = parse_int(f);
        else if (f.key == "lr") rc.lr = parse_number(f);
        else if (f.key == "batch") rc.batch = parse_int(f);
        else if (f.key == "prox_mu") rc.prox_mu = parse_number(f);
        else if (f.key == "tau") rc.tau = parse_number(f);
        else if (f.key == "t_warm") rc.t_warm = parse_int(f);
        else if (f.key == "reassign_period") rc.reassign_period = parse_int(f);
        else if (f.key == "min_cluster_size") rc.min_cluster_size = parse_int(f);
        else if (f.key == "root_dataset_size") rc.root_dataset_size = parse_int(f);
        else if (f.key == "trust_weighting") rc.trust_weighting = parse_bool(f);
        else if (f.key == "single_cluster") rc.single_cluster = parse_bool(f);
        else if (f.key == "freeze_local_tier") rc.freeze_local_tier = parse_bool(f);
        else if (f.key == "cadence_g") rc.cadence_g = parse_int(f);
        else if (f.key == "cadence_c") rc.cadence_c = parse_int(f);
        else throw ParseError(f.line, "unknown key '" + f.key + "' in [round]");
      } else if (f.section == "dp") {
        auto& dp = cfg.round_cfg.dp;
        if (f.key == "clip") dp.clip_c = parse_number(f);
        else if (f.key == "z_g") dp.z_g = parse_number(f);
        else if (f.key == "z_c") dp.z_c = parse_number(f);
        else if (f.key == "delta") dp.delta = parse_number(f);
        else throw ParseError(f.line, "unknown key '" + f.key + "' in [dp]");
      } else if (f.section == "features") {
        bool matched = false;
        for (int i = 0; i < 7; ++i) {
          if (f.key == kFeatureKeys[i]) {
            apply_feature_range(cfg, f, i);
            matched = true;
            break;
          }
        }
        if (!matched) {
          throw ParseError(f.line, "unknown feature '" + f.key + "' in [features]");
        }
      } else if (f.section == "gains") {
        if (f.key == "kp_unit") cfg.gains.kp_unit = parse_number(f);
        else if (f.key == "ki_unit") cfg.gains.ki_unit = parse_number(f);
        else if (f.key == "kd_unit") cfg.gains.kd_unit = parse_number(f);
        else throw ParseError(f.line, "unknown key '" + f.key + "' in [gains]");
      } else if (f.section == "byzantine") {
        if (!cfg.byzantine) cfg.byzantine = ByzantineSpec{};
        if (f.key == "adversaries") cfg.byzantine->adversaries = parse_int(f);
        else throw ParseError(f.line, "unknown key '" + f.key + "' in [byzantine]");
      } else if (f.section == "cold_start") {
        if (!cfg.cold_start) cfg.cold_start = ColdStartSpec{};
        if (f.key == "join_round") cfg.cold_start->join_round = parse_int(f);
        else if (f.key == "crop") cfg.cold_start->crop = crop_family_from_name(f.value);
        else if (f.key == "climate") cfg.cold_start->climate = parse_int(f);
        else if (f.key == "equipment") cfg.cold_start->equipment = parse_int(f);
        else throw ParseError(f.line, "unknown key '" + f.key + "' in [cold_start]");
      } else if (f.section.rfind("facility.", 0) == 0) {
        auto& fac = cfg.explicit_facilities[static_cast<std::size_t>(current_facility)];
        if (f.key == "crop") fac.crop = crop_family_from_name(f.value);
        else if (f.key == "climate") fac.climate = parse_int(f);
        else if (f.key == "equipment") fac.equipment = parse_int(f);
        else if (f.key == "zones") fac.zones = parse_int(f);
        else if (f.key == "samples") fac.samples = parse_int(f);
        else throw ParseError(f.line, "unknown key '" + f.key + "' in [" + f.section + "]");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(f.line, e.what());
    }
  }

  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ParseError(line_no, e.what());
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::vector<FacilityProfile> scenario_population(const ScenarioConfig& scenario,
                                                 std::uint64_t seed) {
  RngStream rng(derive_seed(seed, 0x1001));
  std::vector<FacilityProfile> out;
  if (!scenario.explicit_facilities.empty()) {
    int id = 0;
    for (const auto& spec : scenario.explicit_facilities) {
      out.push_back(make_facility(
          id++, spec.crop, spec.climate, spec.equipment,
          spec.zones > 0 ? spec.zones : scenario.zone_count,
          spec.samples > 0 ? spec.samples : scenario.samples_per_cycle, 0.1, rng));
    }
  } else {
    out = heterogeneity_population(scenario.heterogeneity, scenario.facility_count,
                                   scenario.zone_count, scenario.samples_per_cycle,
                                   rng);
  }
  if (scenario.cold_start) {
    const auto& cs = *scenario.cold_start;
    out.push_back(make_facility(static_cast<int>(out.size()), cs.crop, cs.climate,
                                cs.equipment, scenario.zone_count,
                                scenario.samples_per_cycle, 0.1, rng));
  }
  return out;
}

std::string scenario_snapshot_json(const ScenarioConfig& s) {
  nlohmann::ordered_json j;
  j["name"] = s.name;
  j["algorithm"] = algorithm_name(s.algorithm);
  j["facilities"] = s.facility_count;
  j["heterogeneity"] = heterogeneity_name(s.heterogeneity);
  j["rounds"] = s.rounds;
  j["sim_days"] = s.sim_days;
  j["rounds_per_day"] = s.rounds_per_day;
  j["zone_count"] = s.zone_count;
  j["samples_per_cycle"] = s.samples_per_cycle;
  j["round"] = {{"local_epochs", s.round_cfg.local_epochs},
                {"lr", s.round_cfg.lr},
                {"batch", s.round_cfg.batch},
                {"prox_mu", s.round_cfg.prox_mu},
                {"tau", s.round_cfg.tau},
                {"t_warm", s.round_cfg.t_warm},
                {"reassign_period", s.round_cfg.reassign_period},
                {"min_cluster_size", s.round_cfg.min_cluster_size},
                {"trust_weighting", s.round_cfg.trust_weighting},
                {"single_cluster", s.round_cfg.single_cluster},
                {"freeze_local_tier", s.round_cfg.freeze_local_tier}};
  j["dp"] = {{"clip", s.round_cfg.dp.clip_c},
             {"z_g", s.round_cfg.dp.z_g},
             {"z_c", s.round_cfg.dp.z_c},
             {"delta", s.round_cfg.dp.delta}};
  if (s.byzantine) j["byzantine"] = {{"adversaries", s.byzantine->adversaries}};
  if (s.cold_start) {
    j["cold_start"] = {{"join_round", s.cold_start->join_round},
                       {"crop", crop_family_name(s.cold_start->crop)},
                       {"climate", s.cold_start->climate},
                       {"equipment", s.cold_start->equipment}};
  }
  return j.dump();
}

}  // namespace hierfed
