#pragma once

#include <functional>

#include "fedoras/data.hpp"
#include "fedoras/fedcore.hpp"
#include "fedoras/network.hpp"
#include "fedoras/space.hpp"

namespace fedoras {

struct Individual {
    Path path;
    double metric = 0.0;       // higher is better
    std::int64_t flops = 0;
    int tier = 0;
    int rank = 0;
    double crowding = 0.0;
};

/// Maximize metric, minimize flops.
bool dominates(const Individual& a, const Individual& b);

/// Fast non-dominated sort; front 0 is the exact Pareto set.
std::vector<std::vector<int>> nondominated_sort(const std::vector<Individual>& pop);

void crowding_distance(std::vector<Individual>& pop, const std::vector<int>& front);

/// Kendall tau-a between two score vectors over the same items; ties count
/// as neither concordant nor discordant.
double kendall_tau(const std::vector<double>& a, const std::vector<double>& b);

/// Scores one batch of paths; entries may be NaN for failed evaluations.
using BatchEval = std::function<std::vector<double>(const std::vector<Path>&)>;

struct SearchTraceRow {
    int iteration;
    double best_metric;
    int front_size;
    std::int64_t union_params;
    std::int64_t cum_comm_cost;
};

struct SearchResult {
    Individual best;
    std::vector<Individual> front;
    std::vector<SearchTraceRow> trace;
};

struct Nsga2Cfg {
    int iterations = 10;
    int population = 128;
    int sample = 64;
    /// Optional: sampled after each iteration to fill the trace's
    /// cumulative communication-cost column (federated evaluation).
    std::function<std::int64_t()> comm_cost_probe;
};

SearchResult nsga2_search(const SearchSpace& space, int tier, const TierSpec& tiers,
                          const BatchEval& eval, const Nsga2Cfg& cfg, Rng& rng);

/// Accuracy of the path on the validation indices using supernet weights.
double evaluate_centralized(const SearchSpace& space, const Supernet& net, const Path& path,
                            const Dataset& ds, const std::vector<int>& val_idx);

BatchEval make_centralized_eval(const SearchSpace& space, const Supernet& net, const Dataset& ds,
                                const std::vector<int>& val_idx, int threads = 1);

/// Per-layer union of the paths' candidates and its searchable size.
struct MinimalSupernet {
    Subspace subspace;
    std::int64_t param_size = 0;
};
MinimalSupernet minimal_supernet(const SearchSpace& space, const std::vector<Path>& paths);

/// Federated evaluation of one batch of paths; clients hold local
/// validation shards, paths are scored tier-aware, and clients picked in
/// successive rounds are disjoint.
struct FedEvalResult {
    std::vector<double> metrics;       // NaN for unevaluated paths
    std::vector<bool> evaluated;
    std::int64_t comm_cost = 0;        // minimal-supernet params x deliveries
};

struct FedEvalCfg {
    int fe_rounds = 1;
    int clients_per_round = 8;
    int threads = 1;
};

FedEvalResult evaluate_federated(const SearchSpace& space, const Supernet& net,
                                 const std::vector<Path>& paths,
                                 const std::vector<ClientShard>& clients,
                                 const std::vector<std::vector<int>>& client_val_shards,
                                 const Dataset& ds, const TierSpec& tiers,
                                 const FedEvalCfg& cfg, Rng& rng);

}  // namespace fedoras
