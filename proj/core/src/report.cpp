#include "hierfed/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace hierfed {

namespace {

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

double json_double(const nlohmann::json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    return std::stod(s);
  }
  return j.get<double>();
}

nlohmann::json encode_double(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

}  // namespace

void write_rounds_csv(const std::string& path, const RunResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kRoundsCsvHeader;
  for (const auto& report : result.reports) {
    for (const auto& row : report.rows) {
      out << report.round << ',' << row.facility << ',' << row.cluster << ','
          << fmt_double(row.loss) << ',' << fmt_double(row.rmse_vpd) << ','
          << fmt_double(row.sigma_vpd) << ',' << fmt_double(row.overshoot_pct)
          << ',' << fmt_double(row.energy_kwh_m2_day) << ','
          << fmt_double(row.trust) << ',' << fmt_double(report.eps_g) << ','
          << fmt_double(report.eps_c) << ',' << report.cum_comm_bytes << '\n';
    }
  }
}

void write_summary_json(const std::string& path, const RunResult& result,
                        const std::string& scenario_snapshot) {
  nlohmann::ordered_json j;
  j["version"] = "hierfed-0.1.0";
  j["scenario"] = result.scenario_name;
  j["method"] = result.method;
  j["seed"] = result.seed;
  j["failed"] = result.failed;
  if (result.failed) j["error"] = result.error;
  j["rounds"] = result.reports.size();
  j["final_fleet_rmse"] = encode_double(result.final_fleet_rmse);
  j["worst_case_rmse"] = encode_double(result.worst_case_rmse);
  j["mean_energy_kwh_m2_day"] = encode_double(result.mean_energy_kwh_m2_day);
  if (result.convergence_round) {
    j["rounds_to_convergence"] = *result.convergence_round;
  } else {
    j["rounds_to_convergence"] = nullptr;
  }
  j["comm_bytes"] = result.comm_bytes;
  j["eps_g"] = encode_double(result.ledger.eps_g);
  j["eps_c"] = encode_double(result.ledger.eps_c);
  j["releases_g"] = result.ledger.rounds_g;
  j["releases_c"] = result.ledger.rounds_c;
  j["final_facility_rmse"] = nlohmann::json::array();
  for (double v : result.final_facility_rmse) {
    j["final_facility_rmse"].push_back(encode_double(v));
  }
  if (result.join_round > 0) {
    j["cold_start"] = {{"join_round", result.join_round},
                       {"fleet_mean_rmse", encode_double(result.fleet_mean_rmse)},
                       {"joiner_rmse_by_round", result.joiner_rmse_by_round}};
  }
  j["scenario_snapshot"] = scenario_snapshot.empty()
                               ? nlohmann::json(nullptr)
                               : nlohmann::json::parse(scenario_snapshot);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

SummaryView read_summary_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  in >> j;
  SummaryView v;
  v.scenario_name = j.at("scenario").get<std::string>();
  v.method = j.at("method").get<std::string>();
  v.seed = j.at("seed").get<std::uint64_t>();
  v.failed = j.at("failed").get<bool>();
  if (j.contains("scenario_snapshot") && j["scenario_snapshot"].is_object() &&
      j["scenario_snapshot"].contains("heterogeneity")) {
    v.heterogeneity = j["scenario_snapshot"]["heterogeneity"].get<std::string>();
  }
  if (v.failed) return v;
  v.final_fleet_rmse = json_double(j.at("final_fleet_rmse"));
  v.worst_case_rmse = json_double(j.at("worst_case_rmse"));
  v.mean_energy = json_double(j.at("mean_energy_kwh_m2_day"));
  if (!j.at("rounds_to_convergence").is_null()) {
    v.convergence_round = j.at("rounds_to_convergence").get<int>();
  }
  v.comm_bytes = j.at("comm_bytes").get<std::uint64_t>();
  v.eps_g = json_double(j.at("eps_g"));
  v.eps_c = json_double(j.at("eps_c"));
  for (const auto& x : j.at("final_facility_rmse")) {
    v.final_facility_rmse.push_back(json_double(x));
  }
  return v;
}

}  // namespace hierfed
