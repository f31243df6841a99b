#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hierfed/engine.hpp"
#include "hierfed/suite.hpp"

using namespace hierfed;

namespace {

ScenarioConfig tiny_scenario() {
  ScenarioConfig s;
  s.name = "tiny";
  s.algorithm = AlgorithmKind::kHierFedCEA;
  s.facility_count = 3;
  s.heterogeneity = HeterogeneityLevel::kMed;
  s.rounds = 4;
  s.sim_days = 2;
  s.zone_count = 1;
  s.samples_per_cycle = 240;
  s.seeds = {1};
  s.round_cfg.local_epochs = 1;
  s.round_cfg.batch = 64;
  s.round_cfg.t_warm = 2;
  s.round_cfg.reassign_period = 2;
  return s;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("degeneracy: HierFedCEA collapses to FedAvg") {
  ScenarioConfig s = tiny_scenario();
  s.facility_count = 5;
  s.rounds = 8;
  s.samples_per_cycle = 300;
  s.round_cfg.lr = 0.005;
  s.round_cfg.prox_mu = 0.0;
  s.round_cfg.dp.z_g = 0.0;
  s.round_cfg.dp.z_c = 0.0;
  s.round_cfg.trust_weighting = false;
  s.round_cfg.single_cluster = true;
  s.round_cfg.freeze_local_tier = true;

  const Fleet fleet = build_fleet(s, 7);
  s.algorithm = AlgorithmKind::kHierFedCEA;
  const RunResult hier = run_training(s, 7, &fleet);
  s.algorithm = AlgorithmKind::kFedAvg;
  const RunResult fedavg = run_training(s, 7, &fleet);

  REQUIRE_FALSE(hier.failed);
  REQUIRE_FALSE(fedavg.failed);
  REQUIRE(hier.reports.size() == fedavg.reports.size());
  for (std::size_t r = 0; r < hier.reports.size(); ++r) {
    REQUIRE(hier.reports[r].rows.size() == fedavg.reports[r].rows.size());
    for (std::size_t i = 0; i < hier.reports[r].rows.size(); ++i) {
      CHECK(std::abs(hier.reports[r].rows[i].rmse_vpd -
                     fedavg.reports[r].rows[i].rmse_vpd) < 1e-9);
      CHECK(std::abs(hier.reports[r].rows[i].loss -
                     fedavg.reports[r].rows[i].loss) < 1e-9);
    }
  }
}

TEST_CASE("single facility: four methods share one trajectory at z=0") {
  ScenarioConfig s = tiny_scenario();
  s.facility_count = 1;
  s.rounds = 5;
  s.round_cfg.prox_mu = 0.0;
  s.round_cfg.dp.z_g = 0.0;
  s.round_cfg.dp.z_c = 0.0;

  const Fleet fleet = build_fleet(s, 3);
  std::vector<RunResult> results;
  for (AlgorithmKind kind :
       {AlgorithmKind::kHierFedCEA, AlgorithmKind::kFedAvg,
        AlgorithmKind::kFedProx, AlgorithmKind::kLocalOnly}) {
    results.push_back(run_baseline(kind, s, 3, &fleet));
    REQUIRE_FALSE(results.back().failed);
  }
  for (std::size_t m = 1; m < results.size(); ++m) {
    for (std::size_t r = 0; r < results[0].reports.size(); ++r) {
      CHECK(std::abs(results[m].reports[r].rows[0].loss -
                     results[0].reports[r].rows[0].loss) < 1e-9);
      CHECK(std::abs(results[m].reports[r].rows[0].rmse_vpd -
                     results[0].reports[r].rows[0].rmse_vpd) < 1e-9);
    }
  }
}

TEST_CASE("determinism: same seed is bit-identical, workers do not matter") {
  const ScenarioConfig s = tiny_scenario();
  const Fleet fleet = build_fleet(s, 11);

  const std::string dir = "test_out_det";
  std::filesystem::remove_all(dir);
  const RunArtifact a1 = run_one(s, 11, dir + "/a", 1, &fleet);
  const RunArtifact a2 = run_one(s, 11, dir + "/b", 1, &fleet);
  const RunArtifact a4 = run_one(s, 11, dir + "/c", 4, &fleet);
  REQUIRE_FALSE(a1.failed);
  CHECK(read_file(a1.rounds_csv_path) == read_file(a2.rounds_csv_path));
  CHECK(read_file(a1.rounds_csv_path) == read_file(a4.rounds_csv_path));
  std::filesystem::remove_all(dir);
}

TEST_CASE("engine comm accounting matches the dry-run counter") {
  ScenarioConfig s = tiny_scenario();
  s.rounds = 3;
  const Fleet fleet = build_fleet(s, 5);
  const RunResult r = run_training(s, 5, &fleet);
  REQUIRE_FALSE(r.failed);
  CHECK(r.comm_bytes ==
        expected_comm_bytes(AlgorithmKind::kHierFedCEA, 3, 3));

  ScenarioConfig lo = s;
  lo.algorithm = AlgorithmKind::kLocalOnly;
  const RunResult rl = run_training(lo, 5, &fleet);
  CHECK(rl.comm_bytes == 0);
}

TEST_CASE("trust weights form a convex combination across a round") {
  ScenarioConfig s = tiny_scenario();
  s.facility_count = 4;
  s.rounds = 2;
  const Fleet fleet = build_fleet(s, 13);
  const RunResult r = run_training(s, 13, &fleet);
  REQUIRE_FALSE(r.failed);
  for (const auto& report : r.reports) {
    double weight_sum = 0.0;
    double ts_n_sum = 0.0;
    std::vector<double> ts_n;
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
      const double n = 1.0;  // equal n_k in this fleet
      ts_n.push_back(report.rows[i].trust * n);
      ts_n_sum += report.rows[i].trust * n;
    }
    if (ts_n_sum > 0.0) {
      for (double v : ts_n) weight_sum += v / ts_n_sum;
      CHECK(weight_sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("cold start: the joiner inherits state and is gated by t_warm") {
  ScenarioConfig s = tiny_scenario();
  s.facility_count = 2;
  s.rounds = 4;
  s.cold_start = ColdStartSpec{/*join_round=*/2, CropFamily::kLettuce, 3, 1};
  s.round_cfg.t_warm = 1000000;  // joiner never contributes in this run

  const Fleet fleet = build_fleet(s, 17);
  CHECK(fleet.facilities.size() == 3);  // 2 + joiner
  const RunResult r = run_training(s, 17, &fleet);
  REQUIRE_FALSE(r.failed);
  CHECK(r.join_round == 2);
  // Joiner evaluated from the join round onward.
  CHECK(r.joiner_rmse_by_round.size() == 3);

  // Communication: rounds 1: 2 clients * 280; rounds 2..4: 2*280 + 140
  // (the gated joiner only downloads).
  const std::uint64_t expected = 2 * 280 + 3 * (2 * 280 + 140);
  CHECK(r.comm_bytes == expected);
}

TEST_CASE("suite isolation: one broken scenario cannot poison the rest") {
  ScenarioConfig good = tiny_scenario();
  good.rounds = 2;
  ScenarioConfig bad = good;
  bad.name = "broken";
  bad.facility_count = 1;
  bad.samples_per_cycle = 10;  // fine
  bad.round_cfg.batch = 0;    // invalid; run_training will refuse

  const std::string dir = "test_out_suite";
  std::filesystem::remove_all(dir);
  const auto artifacts = run_suite({good, bad}, dir, 2);
  REQUIRE(artifacts.size() == 2);
  CHECK_FALSE(artifacts[0].failed);
  CHECK(artifacts[1].failed);
  CHECK(std::filesystem::exists(artifacts[0].summary_json_path));
  std::filesystem::remove_all(dir);
}

TEST_CASE("table emission has the exact column set") {
  ScenarioConfig s = tiny_scenario();
  s.rounds = 2;
  const std::string dir = "test_out_table";
  std::filesystem::remove_all(dir);
  const Fleet fleet = build_fleet(s, 1);
  std::vector<std::string> summaries;
  for (AlgorithmKind kind : {AlgorithmKind::kHierFedCEA, AlgorithmKind::kLocalOnly}) {
    ScenarioConfig c = s;
    c.algorithm = kind;
    const RunArtifact a = run_one(c, 1, dir, 1, &fleet);
    REQUIRE_FALSE(a.failed);
    summaries.push_back(a.summary_json_path);
  }
  const std::string table_path = dir + "/table.csv";
  emit_table(summaries, table_path);
  std::ifstream in(table_path);
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "method,rmse_mean,rmse_ci,energy_red_pct,rounds_to_conv,"
        "worst_case_rmse,eps_g,eps_c,comm_bytes");
  std::string row;
  int rows = 0;
  while (std::getline(in, row)) ++rows;
  CHECK(rows == 2);
  std::filesystem::remove_all(dir);
}
