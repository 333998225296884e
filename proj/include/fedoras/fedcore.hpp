#pragma once

#include <functional>
#include <map>
#include <optional>

#include "fedoras/data.hpp"
#include "fedoras/network.hpp"
#include "fedoras/space.hpp"

namespace fedoras {

struct LocalCfg {
    int epochs = 1;
    int batch_size = 16;
    double lr = 0.05;
    double momentum = 0.9;
    std::optional<double> clip_norm;
};

enum class Aggregator { OPA, FedAvg };

/// What one client sends back: its full local parameter copy, the mask of
/// what it actually received, and per-operator sample counts.
struct ClientUpdate {
    int client_id = 0;
    bool failed = false;
    Supernet params;
    Subspace received;
    std::map<std::pair<int, int>, std::int64_t> histogram;  // (layer, cand) -> samples
    std::int64_t total_samples = 0;
    double mean_loss = 0.0;
    std::int64_t train_flops = 0;  // fwd+bwd cost proxy
};

struct RoundReport {
    int round = 0;
    std::vector<int> participants;
    std::int64_t bytes_down = 0;  // parameter-count proxy, summed over clients
    std::int64_t bytes_up = 0;
    double mean_client_loss = 0.0;
    std::int64_t train_flops = 0;
    std::vector<double> probe_accuracy;  // per tier; empty when not probed
};

ClientUpdate client_local_train(const SearchSpace& space, const Supernet& global,
                                const Subspace& sub, const std::vector<int>& shard,
                                const Dataset& ds, std::int64_t tier_budget,
                                const LocalCfg& cfg, std::uint64_t seed);

void opa_aggregate(const SearchSpace& space, Supernet& net,
                   const std::vector<ClientUpdate>& updates);
void fedavg_aggregate(const SearchSpace& space, Supernet& net,
                      const std::vector<ClientUpdate>& updates);

/// Weighted elementwise mean of parameter groups; shared by both
/// aggregators and by stage-3 fine-tuning.
void weighted_average_into(Parameter& dst, const std::vector<const Parameter*>& srcs,
                           const std::vector<double>& weights);

struct RoundCfg {
    int clients_per_round = 8;
    std::int64_t b_comm = 0;  // absolute parameter budget
    Aggregator aggregator = Aggregator::OPA;
    LocalCfg local;
    bool per_client_subspace = false;
    int threads = 1;
};

RoundReport run_round(const SearchSpace& space, Supernet& net,
                      const std::vector<ClientShard>& clients, const Dataset& ds,
                      const TierSpec& tiers, const RoundCfg& cfg, int round,
                      std::uint64_t master_seed);

/// Per-tier mean accuracy of `num_paths` budget-respecting random paths,
/// evaluated with supernet weights; read-only.
std::vector<double> probe_validation(const SearchSpace& space, const Supernet& net,
                                     const Dataset& ds, const std::vector<int>& val_idx,
                                     int num_paths, const TierSpec& tiers, Rng& rng);

struct Stage1Cfg {
    int rounds = 60;
    RoundCfg round;
    int probe_interval = 10;
    int probe_paths = 8;
};

struct Stage1Result {
    Supernet net;
    std::vector<RoundReport> history;
};

Stage1Result train_supernet(const SearchSpace& space, const std::vector<ClientShard>& clients,
                            const Dataset& ds, const std::vector<int>& val_idx,
                            const TierSpec& tiers, const Stage1Cfg& cfg,
                            std::uint64_t master_seed, Supernet initial);

/// Chunked parallel map with derived determinism left to the caller.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace fedoras
