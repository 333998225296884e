#pragma once

#include <optional>

#include "fedoras/fedcore.hpp"
#include "fedoras/network.hpp"

namespace fedoras {

enum class LrSchedule { Constant, Cosine, Step };

struct TierModel {
    int tier = 0;
    Path path;
    ModelParams params;
    std::string provenance;  // "supernet-init" | "rand-init"
};

struct FinetuneCfg {
    int rounds = 20;
    int clients_per_round = 6;
    LocalCfg local;
    LrSchedule schedule = LrSchedule::Cosine;
    int threads = 1;
};

struct FinetuneRoundRow {
    int round;
    double lr;
    double mean_loss;
    std::int64_t train_flops;
};

struct FinetuneHistory {
    std::vector<FinetuneRoundRow> rows;
    std::int64_t total_train_flops = 0;
};

/// Cosine decays to lr/10 over the span; step drops x10 at 50% and 75%.
double scheduled_lr(LrSchedule s, double lr0, int round, int total_rounds);

/// FedAvg fine-tuning restricted to clients of tier >= model.tier, weighted
/// by eligible-client shard sizes.
FinetuneHistory finetune_tier(const SearchSpace& space, TierModel& model,
                              const std::vector<ClientShard>& clients, const Dataset& ds,
                              const FinetuneCfg& cfg, std::uint64_t master_seed);

TierModel rand_init_baseline(const SearchSpace& space, const Path& path, int tier,
                             const std::vector<ClientShard>& clients, const Dataset& ds,
                             const FinetuneCfg& cfg, std::uint64_t master_seed);

struct RandomSearchResult {
    std::vector<std::optional<TierModel>> best_per_tier;
    std::vector<double> best_metric;  // -inf for empty tiers
    std::int64_t spent_flops = 0;
    int models_trained = 0;
};

/// Trains uniformly random architectures from scratch until the cumulative
/// client-side training cost exceeds `budget_flops`; returns per-tier best
/// by validation metric.
RandomSearchResult random_search_baseline(const SearchSpace& space, const TierSpec& tiers,
                                          const std::vector<ClientShard>& clients,
                                          const Dataset& ds, const std::vector<int>& val_idx,
                                          std::int64_t budget_flops, const FinetuneCfg& cfg,
                                          std::uint64_t master_seed);

double model_accuracy(const SearchSpace& space, TierModel& model, const Dataset& ds,
                      const std::vector<int>& idx);

}  // namespace fedoras
