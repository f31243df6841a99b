#include "hierfed/federation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hierfed {

const char* algorithm_name(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::kHierFedCEA: return "HierFedCEA";
    case AlgorithmKind::kFedAvg: return "FedAvg";
    case AlgorithmKind::kFedProx: return "FedProx";
    case AlgorithmKind::kScaffold: return "Scaffold";
    case AlgorithmKind::kPerFedAvg: return "PerFedAvg";
    case AlgorithmKind::kFedPer: return "FedPer";
    case AlgorithmKind::kLocalOnly: return "LocalOnly";
    case AlgorithmKind::kCentralized: return "Centralized";
    case AlgorithmKind::kCurrentTL: return "CurrentTL";
  }
  return "unknown";
}

const char* algorithm_display_name(AlgorithmKind kind) {
  if (kind == AlgorithmKind::kCurrentTL) return "TL-proxy";
  return algorithm_name(kind);
}

AlgorithmKind algorithm_from_name(const std::string& name) {
  for (int i = 0; i < kAlgorithmCount; ++i) {
    const auto kind = static_cast<AlgorithmKind>(i);
    if (name == algorithm_name(kind)) return kind;
  }
  if (name == "TL-proxy") return AlgorithmKind::kCurrentTL;
  throw std::invalid_argument("unknown algorithm: " + name);
}

int ServerState::cluster_of(int facility_id) const {
  for (const auto& [cid, members] : clusters) {
    if (std::find(members.begin(), members.end(), facility_id) != members.end()) {
      return cid;
    }
  }
  throw std::invalid_argument("facility not in any cluster");
}

ParamVector local_train(const std::vector<TrainingSample>& dataset,
                        const ParamVector& start, const RoundConfig& cfg,
                        const ParamVector* prox_anchor, RngStream& rng,
                        int* steps_done) {
  if (dataset.empty()) throw std::invalid_argument("local_train: empty dataset");
  ParamVector theta = start;
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<TrainingSample> batch;
  batch.reserve(static_cast<std::size_t>(cfg.batch));

  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch)) {
      batch.clear();
      const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch));
      for (std::size_t i = at; i < end; ++i) batch.push_back(dataset[order[i]]);

      ParamVector g = gradient(theta, batch);
      if (prox_anchor != nullptr && cfg.prox_mu != 0.0) {
        for (int i = 0; i < ParamVector::kSize; ++i) {
          g.v[i] += cfg.prox_mu * (theta.v[i] - prox_anchor->v[i]);
        }
      }
      if (cfg.freeze_local_tier) g.v[tier_local_index()] = 0.0;
      clip_in_place(g.v, cfg.dp.clip_c);
      for (int i = 0; i < ParamVector::kSize; ++i) theta.v[i] -= cfg.lr * g.v[i];
      if (steps_done != nullptr) ++*steps_done;
    }
  }
  return theta;
}

TierUpdate make_update(const ParamVector& trained, const ParamVector& reference,
                       const DpConfig& dp, RngStream& rng) {
  ParamVector diff;
  for (int i = 0; i < ParamVector::kSize; ++i) {
    diff.v[i] = trained.v[i] - reference.v[i];
  }
  const TierSplit split = split_tiers(diff);
  TierUpdate u;
  u.delta_g = split.global;
  u.delta_c = split.cluster;
  clip_in_place(u.delta_g, dp.clip_c);
  clip_in_place(u.delta_c, dp.clip_c);
  gaussianize(u.delta_g, dp.z_g, dp.clip_c, rng);
  gaussianize(u.delta_c, dp.z_c, dp.clip_c, rng);
  return u;
}

double trust_score(std::span<const double> delta_g,
                   std::span<const double> g_ref) {
  const double ref_norm = l2_norm(g_ref);
  if (ref_norm == 0.0) {
    throw std::invalid_argument("trust_score: zero reference gradient");
  }
  const double delta_norm = l2_norm(delta_g);
  if (delta_norm == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < delta_g.size(); ++i) dot += delta_g[i] * g_ref[i];
  return std::max(0.0, dot / (delta_norm * ref_norm));
}

bool aggregate_global(std::array<double, TierSplit::kGlobalSize>& theta_g,
                      const std::vector<std::array<double, TierSplit::kGlobalSize>>& deltas,
                      const std::vector<double>& trust,
                      const std::vector<double>& weights) {
  double denom = 0.0;
  for (std::size_t k = 0; k < deltas.size(); ++k) denom += trust[k] * weights[k];
  if (denom <= 0.0) return false;
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    const double w = trust[k] * weights[k] / denom;
    if (w == 0.0) continue;
    for (int i = 0; i < TierSplit::kGlobalSize; ++i) {
      theta_g[i] += w * deltas[k][i];
    }
  }
  return true;
}

void aggregate_cluster(std::array<double, TierSplit::kClusterSize>& theta_c,
                       const std::vector<std::array<double, TierSplit::kClusterSize>>& deltas,
                       const std::vector<double>& weights) {
  if (deltas.empty()) return;
  const double denom = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (denom <= 0.0) return;
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    const double w = weights[k] / denom;
    for (int i = 0; i < TierSplit::kClusterSize; ++i) {
      theta_c[i] += w * deltas[k][i];
    }
  }
}

namespace {

double safe_cos(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot / (na * nb);
}

}  // namespace

void refine_clusters(ServerState& server,
                     const std::map<int, std::array<double, TierSplit::kClusterSize>>& tier2_updates,
                     const RoundConfig& cfg) {
  // Snapshot membership and centroids (unweighted means of member updates).
  const auto snapshot = server.clusters;
  std::map<int, std::array<double, TierSplit::kClusterSize>> centroids;
  for (const auto& [cid, members] : snapshot) {
    std::array<double, TierSplit::kClusterSize> c{};
    int n = 0;
    for (int k : members) {
      const auto it = tier2_updates.find(k);
      if (it == tier2_updates.end()) continue;
      for (int i = 0; i < TierSplit::kClusterSize; ++i) c[i] += it->second[i];
      ++n;
    }
    if (n > 0) {
      for (double& x : c) x /= static_cast<double>(n);
    }
    centroids[cid] = c;
  }

  std::map<int, int> moves;  // facility -> target cluster
  for (const auto& [cid, members] : snapshot) {
    for (int k : members) {
      const auto it = tier2_updates.find(k);
      if (it == tier2_updates.end()) continue;
      const double s_current = safe_cos(it->second, centroids[cid]);
      int best_cluster = cid;
      double s_best = s_current;
      for (const auto& [other, centroid] : centroids) {
        if (other == cid) continue;
        const double s = safe_cos(it->second, centroid);
        if (s > s_best || (s == s_best && other < best_cluster)) {
          s_best = s;
          best_cluster = other;
        }
      }
      if (best_cluster != cid && s_best - s_current > cfg.tau &&
          static_cast<int>(snapshot.at(best_cluster).size()) >= cfg.min_cluster_size) {
        moves[k] = best_cluster;
      }
    }
  }

  for (const auto& [k, target] : moves) {
    for (auto& [cid, members] : server.clusters) {
      members.erase(std::remove(members.begin(), members.end(), k), members.end());
    }
    server.clusters[target].push_back(k);
  }
  for (auto& [cid, members] : server.clusters) std::sort(members.begin(), members.end());
  std::erase_if(server.clusters,
                [](const auto& kv) { return kv.second.empty(); });
}

std::array<double, TierSplit::kGlobalSize> compute_g_ref(
    const std::vector<TrainingSample>& root_dataset, const ParamVector& params) {
  if (root_dataset.empty()) {
    throw std::invalid_argument("compute_g_ref: empty root dataset");
  }
  const ParamVector g = gradient(params, root_dataset);
  const TierSplit split = split_tiers(g);
  // Descent direction, so honest client deltas align positively with it.
  std::array<double, TierSplit::kGlobalSize> ref;
  for (int i = 0; i < TierSplit::kGlobalSize; ++i) ref[i] = -split.global[i];
  return ref;
}

std::uint64_t per_round_bytes_per_facility(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::kHierFedCEA:
      return 2 * kUpdatePayloadBytes;  // 140 up + 140 down
    case AlgorithmKind::kFedAvg:
    case AlgorithmKind::kFedProx:
    case AlgorithmKind::kPerFedAvg:
      return 2 * kParamWireBytes;  // full 36-parameter vector each way
    case AlgorithmKind::kScaffold:
      return 4 * kParamWireBytes;  // parameters + control variate each way
    case AlgorithmKind::kFedPer:
      return 2 * 24 * 4;  // shared w1 + b1 only
    case AlgorithmKind::kLocalOnly:
      return 0;
    case AlgorithmKind::kCentralized:
      return kParamWireBytes;  // model distribution only
    case AlgorithmKind::kCurrentTL:
      return kParamWireBytes;  // warm-phase model distribution
  }
  return 0;
}

std::uint64_t expected_comm_bytes(AlgorithmKind kind, int k, int t,
                                  int samples_per_facility) {
  std::uint64_t total = static_cast<std::uint64_t>(k) *
                        static_cast<std::uint64_t>(t) *
                        per_round_bytes_per_facility(kind);
  if (kind == AlgorithmKind::kCentralized || kind == AlgorithmKind::kCurrentTL) {
    // One-time raw dataset upload: 10 float32 per sample.
    total += static_cast<std::uint64_t>(k) *
             static_cast<std::uint64_t>(samples_per_facility) * 40ULL;
  }
  return total;
}

}  // namespace hierfed
