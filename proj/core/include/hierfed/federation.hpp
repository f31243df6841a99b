#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "hierfed/facility.hpp"
#include "hierfed/mlp.hpp"
#include "hierfed/privacy.hpp"
#include "hierfed/rng.hpp"

namespace hierfed {

enum class AlgorithmKind {
  kHierFedCEA,
  kFedAvg,
  kFedProx,
  kScaffold,
  kPerFedAvg,
  kFedPer,
  kLocalOnly,
  kCentralized,
  kCurrentTL,
};

constexpr int kAlgorithmCount = 9;
const char* algorithm_name(AlgorithmKind kind);
// Name used in emitted tables; CurrentTL reports as "TL-proxy".
const char* algorithm_display_name(AlgorithmKind kind);
AlgorithmKind algorithm_from_name(const std::string& name);

struct RoundConfig {
  int local_epochs = 5;     // E
  double lr = 0.01;         // eta
  int batch = 64;           // B
  double prox_mu = 0.01;    // mu
  DpConfig dp;
  double tau = 0.15;        // cluster reassignment threshold
  int t_warm = 20;
  int reassign_period = 10;
  int min_cluster_size = 3;
  int root_dataset_size = 500;

  // Engine toggles. Cadences > 1 aggregate a tier only every n-th round.
  bool trust_weighting = true;
  bool single_cluster = false;
  bool freeze_local_tier = false;
  int cadence_g = 1;
  int cadence_c = 1;
};

struct ClientState {
  int facility_id = 0;
  std::vector<TrainingSample> dataset;
  double theta_l = 0.0;  // Tier-3 scalar, never transmitted
  int cluster_id = 0;
  std::array<double, ParamVector::kSize> control_variate{};  // SCAFFOLD c_k
  std::vector<double> trust_history;
  std::uint64_t rng_seed = 0;  // base of this client's independent streams

  // Per-algorithm personal state (LocalOnly, FedPer head, TL fine-tune).
  ParamVector personal;
  bool joined = true;
  int local_steps_done = 0;
  bool byzantine = false;
};

struct ServerState {
  std::array<double, TierSplit::kGlobalSize> theta_g{};
  std::map<int, std::array<double, TierSplit::kClusterSize>> cluster_models;
  std::map<int, std::vector<int>> clusters;  // cluster id -> member ids
  std::array<double, TierSplit::kGlobalSize> g_ref{};
  int round = 0;
  PrivacyLedger ledger;

  int cluster_of(int facility_id) const;
};

// E epochs of minibatch SGD from `start`; per-step gradient is the batch
// gradient plus, when an anchor is given, mu * (theta - anchor), clipped to
// dp.clip_c. Deterministic given rng.
ParamVector local_train(const std::vector<TrainingSample>& dataset,
                        const ParamVector& start, const RoundConfig& cfg,
                        const ParamVector* prox_anchor, RngStream& rng,
                        int* steps_done = nullptr);

struct TierUpdate {
  std::array<double, TierSplit::kGlobalSize> delta_g{};
  std::array<double, TierSplit::kClusterSize> delta_c{};
};

// Tier-splits (trained - reference), clips each tier delta to dp.clip_c and
// adds Gaussian noise with z_g / z_c. The Tier-3 delta never leaves the
// client and is not part of the result.
TierUpdate make_update(const ParamVector& trained, const ParamVector& reference,
                       const DpConfig& dp, RngStream& rng);

// max(0, cosine similarity); a zero delta scores 0. Throws
// std::invalid_argument when g_ref is the zero vector.
double trust_score(std::span<const double> delta_g,
                   std::span<const double> g_ref);

// theta_g += sum_k (TS_k n_k / sum TS_i n_i) * delta_k. Returns false (and
// leaves theta_g untouched) when every trust*weight product is zero.
bool aggregate_global(std::array<double, TierSplit::kGlobalSize>& theta_g,
                      const std::vector<std::array<double, TierSplit::kGlobalSize>>& deltas,
                      const std::vector<double>& trust,
                      const std::vector<double>& weights);

// theta_c += sum_k (n_k / sum n_i) * delta_k over cluster members.
void aggregate_cluster(std::array<double, TierSplit::kClusterSize>& theta_c,
                       const std::vector<std::array<double, TierSplit::kClusterSize>>& deltas,
                       const std::vector<double>& weights);

// Gradient cosine-similarity refinement: each facility is compared with
// every cluster centroid (unweighted mean of member updates); it moves to
// the argmax cluster when the similarity gain exceeds tau and the target
// had at least min_cluster_size members before this refinement pass. All
// moves are applied simultaneously from a snapshot; ties break toward the
// lowest cluster id. Empty clusters are dropped.
void refine_clusters(ServerState& server,
                     const std::map<int, std::array<double, TierSplit::kClusterSize>>& tier2_updates,
                     const RoundConfig& cfg);

// Server descent direction on the clean root dataset at the current model:
// the Tier-1 slice of -gradient. Throws std::invalid_argument on an empty
// root set.
std::array<double, TierSplit::kGlobalSize> compute_g_ref(
    const std::vector<TrainingSample>& root_dataset, const ParamVector& params);

// Fixed per-round communication cost per facility (uplink + downlink), in
// bytes of model payload, matching the wire formats.
std::uint64_t per_round_bytes_per_facility(AlgorithmKind kind);

// Dry-run cumulative communication for k facilities over t rounds.
// Centralized additionally counts the one-time pooled-data upload.
std::uint64_t expected_comm_bytes(AlgorithmKind kind, int k, int t,
                                  int samples_per_facility = 0);

}  // namespace hierfed
