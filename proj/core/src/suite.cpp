#include "hierfed/suite.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "hierfed/metrics.hpp"

namespace hierfed {

namespace fs = std::filesystem;

RunArtifact run_one(const ScenarioConfig& scenario, std::uint64_t seed,
                    const std::string& out_dir, int workers,
                    const Fleet* fleet) {
  RunArtifact artifact;
  artifact.scenario_name = scenario.name;
  artifact.method = algorithm_display_name(scenario.algorithm);
  artifact.seed = seed;

  const fs::path dir = fs::path(out_dir) /
                       (scenario.name + "_" + artifact.method + "_seed" +
                        std::to_string(seed));
  try {
    fs::create_directories(dir);
    artifact.rounds_csv_path = (dir / "rounds.csv").string();
    artifact.summary_json_path = (dir / "summary.json").string();

    RunResult result = run_training(scenario, seed, fleet, workers);
    artifact.failed = result.failed;
    artifact.error = result.error;
    write_rounds_csv(artifact.rounds_csv_path, result);
    write_summary_json(artifact.summary_json_path, result,
                       scenario_snapshot_json(scenario));
  } catch (const std::exception& e) {
    artifact.failed = true;
    artifact.error = e.what();
  }
  return artifact;
}

std::vector<RunArtifact> run_suite(const std::vector<ScenarioConfig>& scenarios,
                                   const std::string& out_dir, int workers) {
  struct Job {
    const ScenarioConfig* scenario;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& s : scenarios) {
    for (std::uint64_t seed : s.seeds) jobs.push_back({&s, seed});
  }
  std::vector<RunArtifact> artifacts(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), workers, [&](int i) {
    const Job& job = jobs[static_cast<std::size_t>(i)];
    artifacts[static_cast<std::size_t>(i)] =
        run_one(*job.scenario, job.seed, out_dir, /*workers=*/1);
  });
  return artifacts;
}

std::vector<ScenarioConfig> load_scenario_dir(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".scn") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<ScenarioConfig> scenarios;
  scenarios.reserve(files.size());
  for (const auto& f : files) scenarios.push_back(load_scenario(f));
  return scenarios;
}

namespace {

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

struct MethodAgg {
  std::vector<double> rmse;
  std::vector<double> energy;
  std::vector<double> worst;
  std::vector<double> conv_rounds;
  bool any_unconverged = false;
  double eps_g = 0.0;
  double eps_c = 0.0;
  std::uint64_t comm = 0;
};

// Table II row order.
const char* kMethodOrder[] = {"LocalOnly", "Centralized", "TL-proxy",
                              "FedAvg",    "FedProx",     "Scaffold",
                              "PerFedAvg", "FedPer",      "HierFedCEA"};

}  // namespace

void emit_table(const std::vector<std::string>& summary_paths,
                const std::string& out_csv_path) {
  std::map<std::string, MethodAgg> by_method;
  for (const auto& path : summary_paths) {
    const SummaryView s = read_summary_json(path);
    if (s.failed) continue;
    MethodAgg& agg = by_method[s.method];
    agg.rmse.push_back(s.final_fleet_rmse);
    agg.energy.push_back(s.mean_energy);
    agg.worst.push_back(s.worst_case_rmse);
    if (s.convergence_round) {
      agg.conv_rounds.push_back(static_cast<double>(*s.convergence_round));
    } else {
      agg.any_unconverged = true;
    }
    agg.eps_g = s.eps_g;
    agg.eps_c = s.eps_c;
    agg.comm = s.comm_bytes;
  }

  double local_only_energy = 0.0;
  const auto it = by_method.find("LocalOnly");
  if (it != by_method.end() && !it->second.energy.empty()) {
    local_only_energy = mean_of(it->second.energy);
  }

  std::ofstream out(out_csv_path);
  if (!out) throw std::runtime_error("cannot write " + out_csv_path);
  out << "method,rmse_mean,rmse_ci,energy_red_pct,rounds_to_conv,"
         "worst_case_rmse,eps_g,eps_c,comm_bytes\n";
  for (const char* method : kMethodOrder) {
    const auto found = by_method.find(method);
    if (found == by_method.end()) continue;
    const MethodAgg& agg = found->second;
    if (agg.rmse.empty()) continue;
    out << method << ',' << fmt(mean_of(agg.rmse), "%.3f") << ','
        << fmt(ci95_halfwidth(agg.rmse), "%.3f") << ',';
    if (local_only_energy > 0.0) {
      out << fmt(energy_reduction_pct(mean_of(agg.energy), local_only_energy),
                 "%.1f");
    }
    out << ',';
    if (!agg.conv_rounds.empty() && !agg.any_unconverged) {
      out << fmt(mean_of(agg.conv_rounds), "%.0f");
    }
    out << ',' << fmt(mean_of(agg.worst), "%.3f") << ',';
    out << (std::isinf(agg.eps_g) ? "inf" : fmt(agg.eps_g, "%.3g")) << ','
        << (std::isinf(agg.eps_c) ? "inf" : fmt(agg.eps_c, "%.3g")) << ','
        << agg.comm << '\n';
  }
}

void emit_plotdata(const std::vector<std::string>& summary_paths,
                   const std::string& out_csv_path) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> cells;
  for (const auto& path : summary_paths) {
    const SummaryView s = read_summary_json(path);
    if (s.failed || s.heterogeneity.empty()) continue;
    cells[{s.heterogeneity, s.method}].push_back(s.final_fleet_rmse);
  }

  const char* kLevels[] = {"IID", "Low", "Med", "High", "Full"};
  std::ofstream out(out_csv_path);
  if (!out) throw std::runtime_error("cannot write " + out_csv_path);
  out << "heterogeneity,method,rmse_mean,rmse_ci\n";
  for (const char* level : kLevels) {
    for (const char* method : kMethodOrder) {
      const auto found = cells.find({level, method});
      if (found == cells.end()) continue;
      out << level << ',' << method << ','
          << fmt(mean_of(found->second), "%.4f") << ','
          << fmt(ci95_halfwidth(found->second), "%.4f") << '\n';
    }
  }
}

}  // namespace hierfed
