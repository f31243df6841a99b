#pragma once

#include <functional>
#include <vector>

#include "hierfed/report.hpp"
#include "hierfed/scenario.hpp"

namespace hierfed {

// Immutable per-seed inputs shared by every method: facility population,
// generated datasets, and the server's root dataset. Building this is
// algorithm-independent, so one fleet can back all methods at a seed.
struct Fleet {
  std::vector<FacilityProfile> facilities;
  std::vector<std::vector<TrainingSample>> datasets;
  std::vector<bool> dataset_fault;
  std::vector<TrainingSample> root_dataset;
};

Fleet build_fleet(const ScenarioConfig& scenario, std::uint64_t seed);

// Executes the scenario's algorithm for scenario.rounds rounds at the given
// seed. When `fleet` is null it is built internally. `workers` bounds the
// number of concurrent client tasks; results are invariant to it.
RunResult run_training(const ScenarioConfig& scenario, std::uint64_t seed,
                       const Fleet* fleet = nullptr, int workers = 1);

// Same engine with the algorithm overridden.
RunResult run_baseline(AlgorithmKind kind, const ScenarioConfig& scenario,
                       std::uint64_t seed, const Fleet* fleet = nullptr,
                       int workers = 1);

// Deterministic worker pool: applies fn to 0..n-1; each index owns its
// output slot, so scheduling cannot change results.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

}  // namespace hierfed
