#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "hierfed/engine.hpp"
#include "hierfed/metrics.hpp"
#include "hierfed/privacy.hpp"
#include "hierfed/suite.hpp"

namespace fs = std::filesystem;
using namespace hierfed;

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("HIERFED_OUT_DIR");
  return env != nullptr ? env : "out";
}

int default_workers() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

void apply_paper_scale(ScenarioConfig& scenario) {
  scenario.facility_count = 30;
  scenario.rounds = 100;
  scenario.sim_days = 180;
  scenario.zone_count = 10;
  scenario.samples_per_cycle = 10000;
  scenario.seeds = {1, 2, 3, 4, 5};
}

// Accepts summary.json paths, run directories, or suite output roots.
std::vector<std::string> collect_summaries(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (const auto& arg : args) {
    if (fs::is_directory(arg)) {
      for (const auto& entry : fs::recursive_directory_iterator(arg)) {
        if (entry.is_regular_file() && entry.path().filename() == "summary.json") {
          out.push_back(entry.path().string());
        }
      }
    } else {
      out.push_back(arg);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_run(const std::string& scenario_path, std::uint64_t seed_override,
            bool has_seed, const std::string& out_dir, int workers,
            bool paper_scale) {
  ScenarioConfig scenario = load_scenario(scenario_path);
  if (paper_scale) apply_paper_scale(scenario);
  std::vector<std::uint64_t> seeds =
      has_seed ? std::vector<std::uint64_t>{seed_override} : scenario.seeds;

  int failures = 0;
  for (std::uint64_t seed : seeds) {
    const RunArtifact artifact = run_one(scenario, seed, out_dir, workers);
    if (artifact.failed) {
      ++failures;
      std::cerr << "run failed (" << scenario.name << ", seed " << seed
                << "): " << artifact.error << "\n";
      continue;
    }
    const SummaryView s = read_summary_json(artifact.summary_json_path);
    std::cout << scenario.name << " " << artifact.method << " seed " << seed
              << ": rmse_vpd=" << s.final_fleet_rmse << " kPa, energy="
              << s.mean_energy << " kWh/m2/day, comm=" << s.comm_bytes
              << " B -> " << artifact.summary_json_path << "\n";
  }
  return failures == 0 ? 0 : 1;
}

int cmd_suite(const std::string& dir, const std::string& out_dir, int workers,
              bool paper_scale) {
  std::vector<ScenarioConfig> scenarios = load_scenario_dir(dir);
  if (scenarios.empty()) {
    std::cerr << "no *.scn scenarios in " << dir << "\n";
    return 1;
  }
  if (paper_scale) {
    for (auto& s : scenarios) apply_paper_scale(s);
  }
  const auto artifacts = run_suite(scenarios, out_dir, workers);
  int failures = 0;
  for (const auto& a : artifacts) {
    if (a.failed) {
      ++failures;
      std::cerr << "failed: " << a.scenario_name << " " << a.method << " seed "
                << a.seed << ": " << a.error << "\n";
    } else {
      std::cout << "ok: " << a.scenario_name << " " << a.method << " seed "
                << a.seed << "\n";
    }
  }
  std::cout << artifacts.size() - static_cast<std::size_t>(failures) << "/"
            << artifacts.size() << " runs succeeded\n";
  return failures == 0 ? 0 : 1;
}

int cmd_accountant(double z, int rounds, double delta, double q,
                   double target_eps) {
  if (target_eps > 0.0) {
    const double solved = solve_noise_multiplier(target_eps, rounds, delta);
    std::cout << "z=" << solved << " achieves eps="
              << rdp_epsilon(solved, rounds, q, delta) << " over " << rounds
              << " rounds at delta=" << delta << "\n";
    return 0;
  }
  const double eps = rdp_epsilon(z, rounds, q, delta);
  std::cout << "eps=" << eps << " (z=" << z << ", rounds=" << rounds
            << ", q=" << q << ", delta=" << delta << ")\n";
  return 0;
}

int cmd_coldstart(const std::string& scenario_path, const std::string& out_dir,
                  int workers) {
  ScenarioConfig scenario = load_scenario(scenario_path);
  if (!scenario.cold_start) {
    std::cerr << "scenario has no [cold_start] section\n";
    return 1;
  }
  const AlgorithmKind methods[] = {AlgorithmKind::kHierFedCEA,
                                   AlgorithmKind::kFedAvg,
                                   AlgorithmKind::kLocalOnly};
  for (AlgorithmKind kind : methods) {
    ScenarioConfig s = scenario;
    s.algorithm = kind;
    std::vector<double> days_per_seed;
    for (std::uint64_t seed : s.seeds) {
      const Fleet fleet = build_fleet(s, seed);
      const RunResult result = run_training(s, seed, &fleet, workers);
      if (result.failed) {
        std::cerr << algorithm_name(kind) << " seed " << seed
                  << " failed: " << result.error << "\n";
        continue;
      }
      // Joiner RMSE per simulated day after joining.
      std::vector<double> by_day;
      for (std::size_t r = 0; r + 1 < result.joiner_rmse_by_round.size();
           r += static_cast<std::size_t>(s.rounds_per_day)) {
        by_day.push_back(result.joiner_rmse_by_round[r]);
      }
      const auto days = cold_start_days(by_day, result.fleet_mean_rmse);
      if (days) {
        days_per_seed.push_back(static_cast<double>(*days));
        std::cout << algorithm_name(kind) << " seed " << seed << ": "
                  << *days << " days to 85% of fleet-average (fleet rmse "
                  << result.fleet_mean_rmse << ")\n";
      } else {
        std::cout << algorithm_name(kind) << " seed " << seed
                  << ": never reached the 85% threshold\n";
      }
      run_one(s, seed, out_dir, workers, &fleet);
    }
    if (!days_per_seed.empty()) {
      std::cout << algorithm_name(kind)
                << " mean cold-start days: " << mean_of(days_per_seed) << "\n";
    }
  }
  return 0;
}

int cmd_simcheck(const std::string& scenario_path) {
  const ScenarioConfig scenario = load_scenario(scenario_path);
  const std::uint64_t seed = scenario.seeds.front();
  const auto facilities = scenario_population(scenario, seed);
  std::cout << "oracle-gain rollout floor per facility:\n";
  for (const auto& f : facilities) {
    const RolloutTrace trace = evaluate_oracle_rollout(
        f, scenario.features, scenario.gains, derive_seed(seed, 0x25, f.id));
    std::cout << "  facility " << f.id << " (" << crop_family_name(f.crop.family)
              << ", climate " << f.climate_zone << "): rmse="
              << rmse_vpd(trace) << " kPa, sigma=" << vpd_sigma(trace)
              << ", energy=" << energy_kwh_m2_day(trace) << " kWh/m2/day\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierfed: hierarchical federated PID auto-tuning simulation"};
  app.require_subcommand(1);

  std::string scenario_path, dir_path, out_dir = default_out_dir();
  std::string table_out = "table.csv", plot_out = "plotdata.csv";
  std::vector<std::string> artifact_args;
  std::uint64_t seed = 0;
  bool paper_scale = false;
  int workers = default_workers();
  double z = 1.0, delta = 1e-5, q = 1.0, target_eps = 0.0;
  int rounds = 100;

  auto* run = app.add_subcommand("run", "execute one scenario file");
  run->add_option("scenario", scenario_path)->required();
  auto* seed_opt = run->add_option("--seed", seed, "override the seed list");
  run->add_option("--out-dir", out_dir);
  run->add_option("--workers", workers);
  run->add_flag("--paper-scale", paper_scale, "K=30, T=100, 5 seeds preset");

  auto* suite = app.add_subcommand("suite", "run every *.scn in a directory");
  suite->add_option("dir", dir_path)->required();
  suite->add_option("--out-dir", out_dir);
  suite->add_option("--workers", workers);
  suite->add_flag("--paper-scale", paper_scale);

  auto* table = app.add_subcommand("table", "emit the comparison table");
  table->add_option("artifacts", artifact_args, "summary.json files or run dirs")
      ->required();
  table->add_option("--out", table_out);

  auto* plot = app.add_subcommand("plotdata", "emit heterogeneity plot data");
  plot->add_option("artifacts", artifact_args)->required();
  plot->add_option("--out", plot_out);

  auto* acct = app.add_subcommand("accountant", "Renyi-DP accounting");
  acct->add_option("--z", z, "noise multiplier");
  acct->add_option("--rounds", rounds);
  acct->add_option("--delta", delta);
  acct->add_option("--q", q);
  acct->add_option("--target-eps", target_eps, "solve for z instead");

  auto* cold = app.add_subcommand("coldstart", "cold-start comparison");
  cold->add_option("scenario", scenario_path)->required();
  cold->add_option("--out-dir", out_dir);
  cold->add_option("--workers", workers);

  auto* simcheck = app.add_subcommand("simcheck", "oracle rollout diagnostics");
  simcheck->add_option("scenario", scenario_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return cmd_run(scenario_path, seed, seed_opt->count() > 0, out_dir,
                     workers, paper_scale);
    }
    if (suite->parsed()) return cmd_suite(dir_path, out_dir, workers, paper_scale);
    if (table->parsed()) {
      emit_table(collect_summaries(artifact_args), table_out);
      std::cout << "wrote " << table_out << "\n";
      return 0;
    }
    if (plot->parsed()) {
      emit_plotdata(collect_summaries(artifact_args), plot_out);
      std::cout << "wrote " << plot_out << "\n";
      return 0;
    }
    if (acct->parsed()) return cmd_accountant(z, rounds, delta, q, target_eps);
    if (cold->parsed()) return cmd_coldstart(scenario_path, out_dir, workers);
    if (simcheck->parsed()) return cmd_simcheck(scenario_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
