#include "hierfed/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "hierfed/metrics.hpp"

namespace hierfed {

namespace {

// Stream tags; every logical actor derives its seeds through these.
enum : std::uint64_t {
  kTagDataset = 0x21,
  kTagRoot = 0x22,
  kTagInit = 0x23,
  kTagClient = 0x24,
  kTagEval = 0x25,
  kTagCentral = 0x26,
};

constexpr double kConvergenceThresholdKpa = 0.10;
constexpr int kConvergenceSustainRounds = 3;

bool is_flat(AlgorithmKind k) {
  return k == AlgorithmKind::kFedAvg || k == AlgorithmKind::kFedProx ||
         k == AlgorithmKind::kScaffold || k == AlgorithmKind::kPerFedAvg ||
         k == AlgorithmKind::kFedPer;
}

std::array<double, 36> minus(const ParamVector& a, const ParamVector& b) {
  std::array<double, 36> d{};
  for (int i = 0; i < ParamVector::kSize; ++i) d[i] = a.v[i] - b.v[i];
  return d;
}

struct ClientRoundOutput {
  bool active = false;        // trained this round
  bool contributes = false;   // included in aggregation
  ParamVector trained;
  TierUpdate tier_update;                    // HierFedCEA
  std::array<double, 36> flat_delta{};       // flat methods
  std::array<double, 24> shared_delta{};     // FedPer
  std::array<double, 36> variate_delta{};    // SCAFFOLD
  double trust = 1.0;
};

struct EvalOutput {
  double loss = 0.0;
  double rmse = 0.0;
  double sigma = 0.0;
  double overshoot = 0.0;
  double energy = 0.0;
};

}  // namespace

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  const int pool_size = std::min(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(pool_size));
  for (int t = 0; t < pool_size; ++t) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Fleet build_fleet(const ScenarioConfig& scenario, std::uint64_t seed) {
  Fleet fleet;
  fleet.facilities = scenario_population(scenario, seed);
  fleet.datasets.resize(fleet.facilities.size());
  fleet.dataset_fault.resize(fleet.facilities.size(), false);

  for (std::size_t i = 0; i < fleet.facilities.size(); ++i) {
    RngStream rng(derive_seed(seed, kTagDataset, fleet.facilities[i].id));
    DatasetResult ds = generate_dataset(fleet.facilities[i], scenario.sim_days,
                                        scenario.features, scenario.gains, rng);
    fleet.dataset_fault[i] = ds.fault;
    fleet.datasets[i] = std::move(ds.samples);
  }

  // Clean root dataset from the neutral reference facility.
  FacilityProfile ref = reference_facility();
  ref.samples_per_cycle = scenario.round_cfg.root_dataset_size;
  RngStream root_rng(derive_seed(seed, kTagRoot));
  fleet.root_dataset = generate_dataset(ref, std::max(2, scenario.sim_days / 8),
                                        scenario.features, scenario.gains,
                                        root_rng)
                           .samples;
  return fleet;
}

namespace {

class Engine {
 public:
  Engine(const ScenarioConfig& scenario, std::uint64_t seed, const Fleet& fleet,
         int workers)
      : scn_(scenario),
        seed_(seed),
        fleet_(fleet),
        workers_(workers),
        cfg_(scenario.round_cfg),
        kind_(scenario.algorithm) {}

  RunResult run() {
    RunResult result;
    result.scenario_name = scn_.name;
    result.method = algorithm_display_name(kind_);
    result.seed = seed_;
    try {
      initialize();
      for (int t = 0; t < scn_.rounds; ++t) {
        result.reports.push_back(execute_round(t));
      }
      finalize(result);
    } catch (const std::exception& e) {
      result.failed = true;
      result.error = e.what();
    }
    return result;
  }

 private:
  const ScenarioConfig& scn_;
  std::uint64_t seed_;
  const Fleet& fleet_;
  int workers_;
  RoundConfig cfg_;
  AlgorithmKind kind_;

  std::vector<ClientState> clients_;
  ServerState server_;
  ParamVector init_params_;
  ParamVector flat_global_;   // FedAvg-family shared model
  ParamVector central_;       // Centralized / CurrentTL model
  std::array<double, 36> server_variate_{};  // SCAFFOLD c
  std::vector<TrainingSample> pooled_;
  std::uint64_t comm_ = 0;
  int joiner_index_ = -1;  // fleet index of the cold-start joiner
  std::vector<double> joiner_rmse_;
  std::vector<double> fleet_rmse_series_;

  int n_facilities() const { return static_cast<int>(fleet_.facilities.size()); }

  bool is_joiner(int i) const { return i == joiner_index_; }

  bool counted_in_fleet(int i) const {
    return clients_[static_cast<std::size_t>(i)].joined && !is_joiner(i) &&
           !clients_[static_cast<std::size_t>(i)].byzantine;
  }

  void initialize() {
    RngStream init_rng(derive_seed(seed_, kTagInit));
    init_params_ = random_init(init_rng);
    flat_global_ = init_params_;
    central_ = init_params_;

    if (scn_.cold_start) joiner_index_ = n_facilities() - 1;

    const int adversaries = scn_.byzantine ? scn_.byzantine->adversaries : 0;
    const int main_count = (joiner_index_ >= 0) ? joiner_index_ : n_facilities();

    clients_.resize(static_cast<std::size_t>(n_facilities()));
    const TierSplit init_split = split_tiers(init_params_);
    for (int i = 0; i < n_facilities(); ++i) {
      ClientState& c = clients_[static_cast<std::size_t>(i)];
      c.facility_id = fleet_.facilities[static_cast<std::size_t>(i)].id;
      c.dataset = fleet_.datasets[static_cast<std::size_t>(i)];
      c.theta_l = init_split.local;
      c.cluster_id = cluster_for_crop(fleet_.facilities[static_cast<std::size_t>(i)].crop.family);
      c.rng_seed = derive_seed(seed_, kTagClient, static_cast<std::uint64_t>(i));
      c.personal = init_params_;
      c.joined = !is_joiner(i);
      c.byzantine = !is_joiner(i) && i >= main_count - adversaries;
    }

    server_.theta_g = init_split.global;
    server_.round = 0;
    rebuild_clusters();
    for (const auto& [cid, members] : server_.clusters) {
      server_.cluster_models[cid] = init_split.cluster;
    }

    if (kind_ == AlgorithmKind::kCentralized || kind_ == AlgorithmKind::kCurrentTL) {
      rebuild_pool();
      comm_ += pooled_upload_bytes();
    }
  }

  int cluster_for_crop(CropFamily f) const {
    return cfg_.single_cluster ? 0 : crop_cluster_id(f);
  }

  void rebuild_clusters() {
    server_.clusters.clear();
    for (int i = 0; i < n_facilities(); ++i) {
      if (!clients_[static_cast<std::size_t>(i)].joined) continue;
      server_.clusters[clients_[static_cast<std::size_t>(i)].cluster_id].push_back(i);
    }
  }

  void rebuild_pool() {
    pooled_.clear();
    for (int i = 0; i < n_facilities(); ++i) {
      if (!clients_[static_cast<std::size_t>(i)].joined) continue;
      const auto& d = clients_[static_cast<std::size_t>(i)].dataset;
      pooled_.insert(pooled_.end(), d.begin(), d.end());
    }
  }

  std::uint64_t pooled_upload_bytes() const {
    std::uint64_t bytes = 0;
    for (int i = 0; i < n_facilities(); ++i) {
      if (!clients_[static_cast<std::size_t>(i)].joined) continue;
      bytes += clients_[static_cast<std::size_t>(i)].dataset.size() * 40ULL;
    }
    return bytes;
  }

  ParamVector hier_model_for(const ClientState& c) const {
    TierSplit s;
    s.global = server_.theta_g;
    const auto it = server_.cluster_models.find(c.cluster_id);
    s.cluster = (it != server_.cluster_models.end())
                    ? it->second
                    : server_.cluster_models.begin()->second;
    s.local = c.theta_l;
    return merge_tiers(s);
  }

  ParamVector fedper_model_for(const ClientState& c) const {
    ParamVector m = c.personal;
    for (int i = 0; i < 24; ++i) m.v[i] = flat_global_.v[i];
    return m;
  }

  // Model each facility runs in closed loop after this round's aggregation.
  ParamVector eval_model_for(int i, int round) const {
    const ClientState& c = clients_[static_cast<std::size_t>(i)];
    switch (kind_) {
      case AlgorithmKind::kHierFedCEA:
        return hier_model_for(c);
      case AlgorithmKind::kFedAvg:
      case AlgorithmKind::kFedProx:
      case AlgorithmKind::kScaffold:
        return flat_global_;
      case AlgorithmKind::kPerFedAvg: {
        ParamVector g = gradient(flat_global_, c.dataset);
        clip_in_place(g.v, cfg_.dp.clip_c);
        ParamVector adapted = flat_global_;
        for (int j = 0; j < ParamVector::kSize; ++j) {
          adapted.v[j] -= cfg_.lr * g.v[j];
        }
        return adapted;
      }
      case AlgorithmKind::kFedPer:
        return fedper_model_for(c);
      case AlgorithmKind::kLocalOnly:
        return c.personal;
      case AlgorithmKind::kCentralized:
        return central_;
      case AlgorithmKind::kCurrentTL:
        return (round < cfg_.t_warm) ? central_ : c.personal;
    }
    return flat_global_;
  }

  void join_cold_start_client(int round_1based) {
    ClientState& joiner = clients_[static_cast<std::size_t>(joiner_index_)];
    joiner.joined = true;
    joiner.local_steps_done = 0;
    switch (kind_) {
      case AlgorithmKind::kHierFedCEA: {
        // 35 of 36 parameters come from federation state; theta_l starts 0.
        joiner.theta_l = 0.0;
        joiner.cluster_id = cluster_for_crop(
            fleet_.facilities[static_cast<std::size_t>(joiner_index_)].crop.family);
        if (!server_.cluster_models.count(joiner.cluster_id)) {
          joiner.cluster_id = server_.cluster_models.begin()->first;
        }
        rebuild_clusters();
        break;
      }
      case AlgorithmKind::kFedPer:
        joiner.personal = init_params_;  // only the backbone transfers
        break;
      case AlgorithmKind::kLocalOnly:
        joiner.personal = init_params_;  // no transfer at all
        break;
      case AlgorithmKind::kCentralized:
      case AlgorithmKind::kCurrentTL:
        rebuild_pool();
        comm_ += joiner.dataset.size() * 40ULL;
        break;
      default:
        break;  // flat methods: the next broadcast is the transfer
    }
    (void)round_1based;
  }

  RoundReport execute_round(int t) {
    const int round_1based = t + 1;
    server_.round = round_1based;

    if (joiner_index_ >= 0 &&
        !clients_[static_cast<std::size_t>(joiner_index_)].joined &&
        scn_.cold_start->join_round == round_1based) {
      join_cold_start_client(round_1based);
    }

    switch (kind_) {
      case AlgorithmKind::kHierFedCEA:
        hier_round(t);
        break;
      case AlgorithmKind::kLocalOnly:
        local_only_round(t);
        break;
      case AlgorithmKind::kCentralized:
        centralized_round(t);
        break;
      case AlgorithmKind::kCurrentTL:
        current_tl_round(t);
        break;
      default:
        flat_round(t);
        break;
    }

    return build_report(t);
  }

  // --- HierFedCEA ------------------------------------------------------------

  void hier_round(int t) {
    const int n = n_facilities();
    std::vector<ClientRoundOutput> outs(static_cast<std::size_t>(n));
    std::vector<int> steps_before(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
      steps_before[static_cast<std::size_t>(i)] =
          clients_[static_cast<std::size_t>(i)].local_steps_done;
    }

    parallel_for(n, workers_, [&](int i) {
      ClientState& c = clients_[static_cast<std::size_t>(i)];
      if (!c.joined || c.dataset.empty()) return;
      ClientRoundOutput& out = outs[static_cast<std::size_t>(i)];
      const ParamVector model = hier_model_for(c);
      RngStream train_rng(derive_seed(c.rng_seed, static_cast<std::uint64_t>(t), 0));
      int steps = 0;
      out.trained = local_train(c.dataset, model, cfg_, &model, train_rng, &steps);
      c.local_steps_done += steps;
      RngStream dp_rng(derive_seed(c.rng_seed, static_cast<std::uint64_t>(t), 1));
      out.tier_update = make_update(out.trained, model, cfg_.dp, dp_rng);
      out.active = true;
      // A cold-started client is excluded from aggregation until it has done
      // t_warm local steps before the round.
      out.contributes = !is_joiner(i) ||
                        steps_before[static_cast<std::size_t>(i)] >= cfg_.t_warm;
      if (!cfg_.freeze_local_tier) c.theta_l = out.trained.b2(2);
    });

    // Byzantine clients replace their update with the sign-flipped mean of
    // the honest contributions.
    apply_byzantine_tier(outs);

    // Trust scores against the server's reference direction.
    const bool tier1_round = (t % cfg_.cadence_g) == 0;
    const bool tier2_round = (t % cfg_.cadence_c) == 0;
    std::array<double, TierSplit::kGlobalSize> g_ref{};
    if (cfg_.trust_weighting) {
      g_ref = compute_g_ref(fleet_.root_dataset, reference_model());
      server_.g_ref = g_ref;
    }
    for (int i = 0; i < n; ++i) {
      ClientRoundOutput& out = outs[static_cast<std::size_t>(i)];
      if (!out.active || !out.contributes) continue;
      out.trust = cfg_.trust_weighting
                      ? trust_score(out.tier_update.delta_g, g_ref)
                      : 1.0;
      clients_[static_cast<std::size_t>(i)].trust_history.push_back(out.trust);
    }

    bool tier1_ok = true;
    if (tier1_round) {
      std::vector<std::array<double, TierSplit::kGlobalSize>> deltas;
      std::vector<double> trust, weights;
      for (int i = 0; i < n; ++i) {
        const auto& out = outs[static_cast<std::size_t>(i)];
        if (!out.active || !out.contributes) continue;
        deltas.push_back(out.tier_update.delta_g);
        trust.push_back(out.trust);
        weights.push_back(static_cast<double>(clients_[static_cast<std::size_t>(i)].dataset.size()));
      }
      if (!deltas.empty()) {
        tier1_ok = aggregate_global(server_.theta_g, deltas, trust, weights);
      }
    }
    tier1_skipped_ = tier1_round && !tier1_ok;

    std::map<int, std::array<double, TierSplit::kClusterSize>> tier2_updates;
    if (tier2_round) {
      for (auto& [cid, members] : server_.clusters) {
        std::vector<std::array<double, TierSplit::kClusterSize>> deltas;
        std::vector<double> weights;
        for (int i : members) {
          const auto& out = outs[static_cast<std::size_t>(i)];
          if (!out.active || !out.contributes) continue;
          deltas.push_back(out.tier_update.delta_c);
          weights.push_back(static_cast<double>(clients_[static_cast<std::size_t>(i)].dataset.size()));
          tier2_updates[i] = out.tier_update.delta_c;
        }
        if (!deltas.empty()) {
          aggregate_cluster(server_.cluster_models[cid], deltas, weights);
        }
      }
    }

    // Privacy spend accrues whenever clients transmitted noised updates.
    if (tier1_round) {
      server_.ledger.rounds_g += 1;
      server_.ledger.eps_g =
          rdp_epsilon(cfg_.dp.z_g, server_.ledger.rounds_g, 1.0, cfg_.dp.delta);
    }
    if (tier2_round) {
      server_.ledger.rounds_c += 1;
      server_.ledger.eps_c =
          rdp_epsilon(cfg_.dp.z_c, server_.ledger.rounds_c, 1.0, cfg_.dp.delta);
    }

    const int round_1based = t + 1;
    if (!cfg_.single_cluster && round_1based > cfg_.t_warm &&
        cfg_.reassign_period > 0 && round_1based % cfg_.reassign_period == 0) {
      refine_clusters(server_, tier2_updates, cfg_);
      for (const auto& [cid, members] : server_.clusters) {
        for (int i : members) clients_[static_cast<std::size_t>(i)].cluster_id = cid;
        if (!server_.cluster_models.count(cid)) {
          server_.cluster_models[cid] = server_.cluster_models.begin()->second;
        }
      }
    }

    // Up: 140 bytes from each contributing client; down: 140 to each joined.
    for (int i = 0; i < n; ++i) {
      const auto& out = outs[static_cast<std::size_t>(i)];
      if (out.active && out.contributes) comm_ += kUpdatePayloadBytes;
      if (clients_[static_cast<std::size_t>(i)].joined) comm_ += kUpdatePayloadBytes;
    }

    round_trust_.assign(static_cast<std::size_t>(n), 1.0);
    for (int i = 0; i < n; ++i) {
      round_trust_[static_cast<std::size_t>(i)] = outs[static_cast<std::size_t>(i)].trust;
    }
  }

  ParamVector reference_model() const {
    // Gradient evaluation point for g_ref: current global tier over the mean
    // of the cluster models, neutral local bias.
    TierSplit s;
    s.global = server_.theta_g;
    std::array<double, TierSplit::kClusterSize> mean{};
    int count = 0;
    for (const auto& [cid, m] : server_.cluster_models) {
      for (int i = 0; i < TierSplit::kClusterSize; ++i) mean[i] += m[i];
      ++count;
    }
    if (count > 0) {
      for (double& x : mean) x /= static_cast<double>(count);
    }
    s.cluster = mean;
    s.local = 0.0;
    return merge_tiers(s);
  }

  void apply_byzantine_tier(std::vector<ClientRoundOutput>& outs) {
    std::array<double, TierSplit::kGlobalSize> mean_g{};
    std::array<double, TierSplit::kClusterSize> mean_c{};
    int honest = 0;
    for (int i = 0; i < n_facilities(); ++i) {
      const auto& out = outs[static_cast<std::size_t>(i)];
      if (!out.active || !out.contributes ||
          clients_[static_cast<std::size_t>(i)].byzantine) {
        continue;
      }
      for (int j = 0; j < TierSplit::kGlobalSize; ++j) mean_g[j] += out.tier_update.delta_g[j];
      for (int j = 0; j < TierSplit::kClusterSize; ++j) mean_c[j] += out.tier_update.delta_c[j];
      ++honest;
    }
    if (honest == 0) return;
    for (double& x : mean_g) x /= static_cast<double>(honest);
    for (double& x : mean_c) x /= static_cast<double>(honest);
    for (int i = 0; i < n_facilities(); ++i) {
      auto& out = outs[static_cast<std::size_t>(i)];
      if (!out.active || !clients_[static_cast<std::size_t>(i)].byzantine) continue;
      for (int j = 0; j < TierSplit::kGlobalSize; ++j) out.tier_update.delta_g[j] = -mean_g[j];
      for (int j = 0; j < TierSplit::kClusterSize; ++j) out.tier_update.delta_c[j] = -mean_c[j];
    }
  }

  void apply_byzantine_flat(std::vector<ClientRoundOutput>& outs) {
    std::array<double, 36> mean{};
    int honest = 0;
    for (int i = 0; i < n_facilities(); ++i) {
      const auto& out = outs[static_cast<std::size_t>(i)];
      if (!out.active || !out.contributes ||
          clients_[static_cast<std::size_t>(i)].byzantine) {
        continue;
      }
      for (int j = 0; j < 36; ++j) mean[j] += out.flat_delta[j];
      ++honest;
    }
    if (honest == 0) return;
    for (double& x : mean) x /= static_cast<double>(honest);
    for (int i = 0; i < n_facilities(); ++i) {
      auto& out = outs[static_cast<std::size_t>(i)];
      if (!out.active || !clients_[static_cast<std::size_t>(i)].byzantine) continue;
      for (int j = 0; j < 36; ++j) out.flat_delta[j] = -mean[j];
    }
  }

  // --- Flat federated baselines ------------------------------------------------

  void flat_round(int t) {
    const int n = n_facilities();
    std::vector<ClientRoundOutput> outs(static_cast<std::size_t>(n));

    parallel_for(n, workers_, [&](int i) {
      ClientState& c = clients_[static_cast<std::size_t>(i)];
      if (!c.joined || c.dataset.empty()) return;
      ClientRoundOutput& out = outs[static_cast<std::size_t>(i)];
      RngStream train_rng(derive_seed(c.rng_seed, static_cast<std::uint64_t>(t), 0));
      RngStream dp_rng(derive_seed(c.rng_seed, static_cast<std::uint64_t>(t), 1));

      switch (kind_) {
        case AlgorithmKind::kFedAvg: {
          int steps = 0;
          out.trained = local_train(c.dataset, flat_global_, cfg_, nullptr,
                                    train_rng, &steps);
          c.local_steps_done += steps;
          break;
        }
        case AlgorithmKind::kFedProx: {
          int steps = 0;
          out.trained = local_train(c.dataset, flat_global_, cfg_, &flat_global_,
                                    train_rng, &steps);
          c.local_steps_done += steps;
          break;
        }
        case AlgorithmKind::kScaffold:
          out.trained = scaffold_train(c, train_rng, out.variate_delta);
          break;
        case AlgorithmKind::kPerFedAvg:
          out.trained = perfedavg_train(c, train_rng);
          break;
        case AlgorithmKind::kFedPer: {
          const ParamVector start = fedper_model_for(c);
          int steps = 0;
          out.trained = local_train(c.dataset, start, cfg_, nullptr, train_rng, &steps);
          c.local_steps_done += steps;
          c.personal = out.trained;
          std::array<double, 24> d{};
          for (int j = 0; j < 24; ++j) d[j] = out.trained.v[j] - start.v[j];
          clip_in_place(d, cfg_.dp.clip_c);
          gaussianize(d, cfg_.dp.z_c, cfg_.dp.clip_c, dp_rng);
          out.shared_delta = d;
          break;
        }
        default:
          break;
      }

      if (kind_ != AlgorithmKind::kFedPer) {
        auto d = minus(out.trained, flat_global_);
        clip_in_place(d, cfg_.dp.clip_c);
        gaussianize(d, cfg_.dp.z_c, cfg_.dp.clip_c, dp_rng);
        out.flat_delta = d;
      }
      out.active = true;
      out.contributes = true;
    });

    if (kind_ != AlgorithmKind::kFedPer) apply_byzantine_flat(outs);

    // Data-weighted delta aggregation.
    double denom = 0.0;
    for (int i = 0; i < n; ++i) {
      if (!outs[static_cast<std::size_t>(i)].active) continue;
      denom += static_cast<double>(clients_[static_cast<std::size_t>(i)].dataset.size());
    }
    if (denom > 0.0) {
      if (kind_ == AlgorithmKind::kFedPer) {
        for (int i = 0; i < n; ++i) {
          const auto& out = outs[static_cast<std::size_t>(i)];
          if (!out.active) continue;
          const double w =
              static_cast<double>(clients_[static_cast<std::size_t>(i)].dataset.size()) / denom;
          for (int j = 0; j < 24; ++j) flat_global_.v[j] += w * out.shared_delta[j];
        }
      } else {
        for (int i = 0; i < n; ++i) {
          const auto& out = outs[static_cast<std::size_t>(i)];
          if (!out.active) continue;
          const double w =
              static_cast<double>(clients_[static_cast<std::size_t>(i)].dataset.size()) / denom;
          for (int j = 0; j < 36; ++j) flat_global_.v[j] += w * out.flat_delta[j];
        }
      }
    }

    if (kind_ == AlgorithmKind::kScaffold) {
      int active = 0;
      for (int i = 0; i < n; ++i) {
        if (outs[static_cast<std::size_t>(i)].active) ++active;
      }
      if (active > 0) {
        for (int i = 0; i < n; ++i) {
          const auto& out = outs[static_cast<std::size_t>(i)];
          if (!out.active) continue;
          for (int j = 0; j < 36; ++j) {
            server_variate_[j] += out.variate_delta[j] / static_cast<double>(active);
          }
        }
      }
    }

    // The full model content is released each round with z_c.
    server_.ledger.rounds_g += 1;
    server_.ledger.rounds_c += 1;
    server_.ledger.eps_c =
        rdp_epsilon(cfg_.dp.z_c, server_.ledger.rounds_c, 1.0, cfg_.dp.delta);
    server_.ledger.eps_g = server_.ledger.eps_c;

    for (int i = 0; i < n; ++i) {
      if (!clients_[static_cast<std::size_t>(i)].joined) continue;
      comm_ += per_round_bytes_per_facility(kind_);
    }
    round_trust_.assign(static_cast<std::size_t>(n), 1.0);
  }

  ParamVector scaffold_train(ClientState& c, RngStream& rng,
                             std::array<double, 36>& variate_delta) {
    ParamVector theta = flat_global_;
    std::vector<std::size_t> order(c.dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<TrainingSample> batch;
    int steps = 0;
    for (int epoch = 0; epoch < cfg_.local_epochs; ++epoch) {
      rng.shuffle(order);
      for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg_.batch)) {
        batch.clear();
        const std::size_t end =
            std::min(order.size(), at + static_cast<std::size_t>(cfg_.batch));
        for (std::size_t i = at; i < end; ++i) batch.push_back(c.dataset[order[i]]);
        ParamVector g = gradient(theta, batch);
        if (cfg_.freeze_local_tier) g.v[tier_local_index()] = 0.0;
        clip_in_place(g.v, cfg_.dp.clip_c);
        for (int j = 0; j < 36; ++j) {
          theta.v[j] -= cfg_.lr * (g.v[j] - c.control_variate[j] + server_variate_[j]);
        }
        ++steps;
      }
    }
    c.local_steps_done += steps;
    if (steps == 0 || cfg_.lr == 0.0) return theta;
    // Option-II control variate update.
    std::array<double, 36> c_new{};
    const double inv = 1.0 / (static_cast<double>(steps) * cfg_.lr);
    for (int j = 0; j < 36; ++j) {
      c_new[j] = c.control_variate[j] - server_variate_[j] +
                 (flat_global_.v[j] - theta.v[j]) * inv;
      variate_delta[j] = c_new[j] - c.control_variate[j];
    }
    c.control_variate = c_new;
    return theta;
  }

  ParamVector perfedavg_train(ClientState& c, RngStream& rng) {
    ParamVector theta = flat_global_;
    std::vector<std::size_t> order(c.dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<TrainingSample> support, query;
    int steps = 0;
    for (int epoch = 0; epoch < cfg_.local_epochs; ++epoch) {
      rng.shuffle(order);
      const std::size_t bsz = static_cast<std::size_t>(cfg_.batch);
      for (std::size_t at = 0; at + bsz < order.size(); at += 2 * bsz) {
        support.clear();
        query.clear();
        const std::size_t mid = std::min(order.size(), at + bsz);
        const std::size_t end = std::min(order.size(), at + 2 * bsz);
        for (std::size_t i = at; i < mid; ++i) support.push_back(c.dataset[order[i]]);
        for (std::size_t i = mid; i < end; ++i) query.push_back(c.dataset[order[i]]);
        if (query.empty()) break;

        ParamVector gi = gradient(theta, support);
        clip_in_place(gi.v, cfg_.dp.clip_c);
        ParamVector adapted = theta;
        for (int j = 0; j < 36; ++j) adapted.v[j] -= cfg_.lr * gi.v[j];

        ParamVector go = gradient(adapted, query);
        if (cfg_.freeze_local_tier) go.v[tier_local_index()] = 0.0;
        clip_in_place(go.v, cfg_.dp.clip_c);
        for (int j = 0; j < 36; ++j) theta.v[j] -= cfg_.lr * go.v[j];
        ++steps;
      }
    }
    c.local_steps_done += steps;
    return theta;
  }

  // --- Non-federated baselines -------------------------------------------------

  void local_only_round(int t) {
    parallel_for(n_facilities(), workers_, [&](int i) {
      ClientState& c = clients_[static_cast<std::size_t>(i)];
      if (!c.joined || c.dataset.empty()) return;
      RngStream train_rng(derive_seed(c.rng_seed, static_cast<std::uint64_t>(t), 0));
      int steps = 0;
      c.personal = local_train(c.dataset, c.personal, cfg_, nullptr, train_rng, &steps);
      c.local_steps_done += steps;
    });
    round_trust_.assign(static_cast<std::size_t>(n_facilities()), 1.0);
  }

  void centralized_step(int t) {
    RngStream rng(derive_seed(seed_, kTagCentral, static_cast<std::uint64_t>(t)));
    central_ = local_train(pooled_, central_, cfg_, nullptr, rng);
  }

  void centralized_round(int t) {
    centralized_step(t);
    for (int i = 0; i < n_facilities(); ++i) {
      if (clients_[static_cast<std::size_t>(i)].joined) comm_ += kParamWireBytes;
    }
    round_trust_.assign(static_cast<std::size_t>(n_facilities()), 1.0);
  }

  void current_tl_round(int t) {
    if (t < cfg_.t_warm) {
      centralized_step(t);
      for (int i = 0; i < n_facilities(); ++i) {
        if (clients_[static_cast<std::size_t>(i)].joined) comm_ += kParamWireBytes;
      }
      if (t == cfg_.t_warm - 1) {
        // Broadcast the pretrained model; fine-tuning starts next round.
        for (auto& c : clients_) {
          if (c.joined) c.personal = central_;
        }
        comm_ += static_cast<std::uint64_t>(n_facilities()) * kParamWireBytes;
      }
    } else {
      parallel_for(n_facilities(), workers_, [&](int i) {
        ClientState& c = clients_[static_cast<std::size_t>(i)];
        if (!c.joined || c.dataset.empty()) return;
        if (c.local_steps_done == 0 && t > cfg_.t_warm) {
          // A client joining after the broadcast starts from the TL model.
          c.personal = central_;
        }
        RngStream train_rng(derive_seed(c.rng_seed, static_cast<std::uint64_t>(t), 0));
        int steps = 0;
        c.personal = local_train(c.dataset, c.personal, cfg_, nullptr, train_rng, &steps);
        c.local_steps_done += steps;
      });
    }
    round_trust_.assign(static_cast<std::size_t>(n_facilities()), 1.0);
  }

  // --- Reporting ---------------------------------------------------------------

  RoundReport build_report(int t) {
    const int n = n_facilities();
    std::vector<EvalOutput> evals(static_cast<std::size_t>(n));
    parallel_for(n, workers_, [&](int i) {
      const ClientState& c = clients_[static_cast<std::size_t>(i)];
      if (!c.joined) return;
      const ParamVector model = eval_model_for(i, t);
      const RolloutTrace trace = evaluate_rollout(
          fleet_.facilities[static_cast<std::size_t>(i)], model, scn_.features,
          scn_.gains, derive_seed(seed_, kTagEval, static_cast<std::uint64_t>(i)));
      EvalOutput& e = evals[static_cast<std::size_t>(i)];
      e.rmse = rmse_vpd(trace);
      e.sigma = vpd_sigma(trace);
      e.overshoot = overshoot_pct(trace).percent;
      e.energy = energy_kwh_m2_day(trace);
      e.loss = c.dataset.empty() ? 0.0 : loss(model, c.dataset);
    });

    RoundReport report;
    report.round = t + 1;
    report.eps_g = server_.ledger.eps_g;
    report.eps_c = server_.ledger.eps_c;
    report.cum_comm_bytes = comm_;
    report.tier1_skipped = tier1_skipped_;
    tier1_skipped_ = false;

    double fleet_acc = 0.0;
    int fleet_n = 0;
    for (int i = 0; i < n; ++i) {
      const ClientState& c = clients_[static_cast<std::size_t>(i)];
      if (!c.joined) continue;
      const EvalOutput& e = evals[static_cast<std::size_t>(i)];
      FacilityRoundRow row;
      row.facility = c.facility_id;
      row.cluster = c.cluster_id;
      row.loss = e.loss;
      row.rmse_vpd = e.rmse;
      row.sigma_vpd = e.sigma;
      row.overshoot_pct = e.overshoot;
      row.energy_kwh_m2_day = e.energy;
      row.trust = round_trust_.empty() ? 1.0 : round_trust_[static_cast<std::size_t>(i)];
      report.rows.push_back(row);

      if (counted_in_fleet(i)) {
        fleet_acc += e.rmse;
        ++fleet_n;
      }
      if (is_joiner(i)) joiner_rmse_.push_back(e.rmse);
    }
    report.fleet_rmse = fleet_n > 0 ? fleet_acc / fleet_n : 0.0;
    fleet_rmse_series_.push_back(report.fleet_rmse);
    return report;
  }

  void finalize(RunResult& result) {
    result.comm_bytes = comm_;
    result.ledger = server_.ledger;
    result.convergence_round = rounds_to_convergence(
        fleet_rmse_series_, kConvergenceThresholdKpa, kConvergenceSustainRounds);
    if (!result.reports.empty()) {
      const RoundReport& last = result.reports.back();
      result.final_fleet_rmse = last.fleet_rmse;
      double worst = 0.0;
      double energy_acc = 0.0;
      int count = 0;
      for (std::size_t r = 0; r < last.rows.size(); ++r) {
        const auto& row = last.rows[r];
        result.final_facility_rmse.push_back(row.rmse_vpd);
        const int idx = row.facility;
        if (idx >= 0 && idx < n_facilities() && counted_in_fleet(idx)) {
          worst = std::max(worst, row.rmse_vpd);
          energy_acc += row.energy_kwh_m2_day;
          ++count;
        }
      }
      result.worst_case_rmse = worst;
      result.mean_energy_kwh_m2_day = count > 0 ? energy_acc / count : 0.0;
      result.fleet_mean_rmse = last.fleet_rmse;
    }
    if (joiner_index_ >= 0) {
      result.join_round = scn_.cold_start->join_round;
      result.joiner_rmse_by_round = joiner_rmse_;
    }
  }

  bool tier1_skipped_ = false;
  std::vector<double> round_trust_;
};

}  // namespace

RunResult run_training(const ScenarioConfig& scenario, std::uint64_t seed,
                       const Fleet* fleet, int workers) {
  scenario.validate();
  if (fleet != nullptr) {
    Engine engine(scenario, seed, *fleet, workers);
    return engine.run();
  }
  const Fleet built = build_fleet(scenario, seed);
  Engine engine(scenario, seed, built, workers);
  return engine.run();
}

RunResult run_baseline(AlgorithmKind kind, const ScenarioConfig& scenario,
                       std::uint64_t seed, const Fleet* fleet, int workers) {
  ScenarioConfig copy = scenario;
  copy.algorithm = kind;
  return run_training(copy, seed, fleet, workers);
}

}  // namespace hierfed
