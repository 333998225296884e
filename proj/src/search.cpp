#include "fedoras/search.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <set>

namespace fedoras {

bool dominates(const Individual& a, const Individual& b) {
    const bool ge = a.metric >= b.metric && a.flops <= b.flops;
    const bool strict = a.metric > b.metric || a.flops < b.flops;
    return ge && strict;
}

std::vector<std::vector<int>> nondominated_sort(const std::vector<Individual>& pop) {
    const int n = static_cast<int>(pop.size());
    std::vector<int> dom_count(static_cast<std::size_t>(n), 0);
    std::vector<std::vector<int>> dominated(static_cast<std::size_t>(n));
    std::vector<std::vector<int>> fronts(1);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            if (dominates(pop[static_cast<std::size_t>(i)], pop[static_cast<std::size_t>(j)]))
                dominated[static_cast<std::size_t>(i)].push_back(j);
            else if (dominates(pop[static_cast<std::size_t>(j)], pop[static_cast<std::size_t>(i)]))
                ++dom_count[static_cast<std::size_t>(i)];
        }
        if (dom_count[static_cast<std::size_t>(i)] == 0) fronts[0].push_back(i);
    }
    while (!fronts.back().empty()) {
        std::vector<int> next;
        for (int i : fronts.back())
            for (int j : dominated[static_cast<std::size_t>(i)])
                if (--dom_count[static_cast<std::size_t>(j)] == 0) next.push_back(j);
        fronts.push_back(std::move(next));
    }
    fronts.pop_back();
    return fronts;
}

void crowding_distance(std::vector<Individual>& pop, const std::vector<int>& front) {
    for (int i : front) pop[static_cast<std::size_t>(i)].crowding = 0.0;
    if (front.size() <= 2) {
        for (int i : front) pop[static_cast<std::size_t>(i)].crowding =
            std::numeric_limits<double>::infinity();
        return;
    }
    auto accumulate = [&](auto key) {
        std::vector<int> order = front;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return key(pop[static_cast<std::size_t>(a)]) < key(pop[static_cast<std::size_t>(b)]);
        });
        const double lo = key(pop[static_cast<std::size_t>(order.front())]);
        const double hi = key(pop[static_cast<std::size_t>(order.back())]);
        pop[static_cast<std::size_t>(order.front())].crowding = std::numeric_limits<double>::infinity();
        pop[static_cast<std::size_t>(order.back())].crowding = std::numeric_limits<double>::infinity();
        if (hi <= lo) return;
        for (std::size_t i = 1; i + 1 < order.size(); ++i)
            pop[static_cast<std::size_t>(order[i])].crowding +=
                (key(pop[static_cast<std::size_t>(order[i + 1])]) -
                 key(pop[static_cast<std::size_t>(order[i - 1])])) /
                (hi - lo);
    };
    accumulate([](const Individual& x) { return x.metric; });
    accumulate([](const Individual& x) { return static_cast<double>(x.flops); });
}

double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw ContractError("kendall_tau: need two equal-length score vectors of size >= 2");
    const int n = static_cast<int>(a.size());
    std::int64_t concordant = 0, discordant = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double da = a[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(j)];
            const double db = b[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(j)];
            const double prod = da * db;
            if (prod > 0.0)
                ++concordant;
            else if (prod < 0.0)
                ++discordant;
        }
    const double total = static_cast<double>(n) * (n - 1) / 2.0;
    return static_cast<double>(concordant - discordant) / total;
}

namespace {

bool better_tournament(const Individual& a, const Individual& b) {
    if (a.rank != b.rank) return a.rank < b.rank;
    return a.crowding > b.crowding;
}

void rank_population(std::vector<Individual>& pop) {
    auto fronts = nondominated_sort(pop);
    for (std::size_t f = 0; f < fronts.size(); ++f) {
        for (int i : fronts[f]) pop[static_cast<std::size_t>(i)].rank = static_cast<int>(f);
        crowding_distance(pop, fronts[f]);
    }
}

/// Pull a child toward feasibility by swapping genes for the cheapest (or
/// most expensive) candidate of a random layer.
void repair_toward_interval(const SearchSpace& sp, int tier, const TierSpec& tiers, Path& p,
                            Rng& rng) {
    for (int guard = 0; guard < 8 * sp.num_layers(); ++guard) {
        const std::int64_t f = cost_of_path(sp, p).flops;
        if (tiers.in_tier(tier, f)) return;
        const int l = rng.uniform_int(sp.num_layers());
        const auto& costs = sp.layers[static_cast<std::size_t>(l)].costs;
        int pick = 0;
        for (std::size_t c = 1; c < costs.size(); ++c) {
            if (f > tiers.edges[static_cast<std::size_t>(tier) + 1]) {
                if (costs[c].flops < costs[static_cast<std::size_t>(pick)].flops) pick = static_cast<int>(c);
            } else {
                if (costs[c].flops > costs[static_cast<std::size_t>(pick)].flops) pick = static_cast<int>(c);
            }
        }
        p.choices[static_cast<std::size_t>(l)] = pick;
    }
}

}  // namespace

SearchResult nsga2_search(const SearchSpace& sp, int tier, const TierSpec& tiers,
                          const BatchEval& eval, const Nsga2Cfg& cfg, Rng& rng) {
    const std::int64_t budget = tiers.budget(tier);
    Subspace full = full_subspace(sp);

    // initial population: budget-respecting random paths inside the tier
    std::set<Path> seen;
    std::vector<Individual> pop;
    const int max_attempts = 400 * cfg.population;
    for (int a = 0; a < max_attempts && static_cast<int>(pop.size()) < cfg.population; ++a) {
        Path p = sample_path_greedy(sp, full, budget, rng);
        const std::int64_t f = cost_of_path(sp, p).flops;
        if (!tiers.in_tier(tier, f) || seen.count(p)) continue;
        seen.insert(p);
        Individual ind;
        ind.path = std::move(p);
        ind.flops = f;
        ind.tier = tier;
        pop.push_back(std::move(ind));
    }
    if (pop.empty()) throw ContractError("nsga2_search: tier admits no feasible paths");
    if (static_cast<int>(pop.size()) < cfg.population)
        std::cerr << "nsga2_search: tier " << tier << " population shrunk to " << pop.size()
                  << " distinct feasible paths\n";

    auto eval_into = [&](std::vector<Individual>& group) {
        std::vector<Path> paths;
        paths.reserve(group.size());
        for (const auto& ind : group) paths.push_back(ind.path);
        std::vector<double> scores = eval(paths);
        for (std::size_t i = 0; i < group.size(); ++i)
            group[i].metric = std::isfinite(scores[i]) ? scores[i]
                                                       : -std::numeric_limits<double>::infinity();
    };
    eval_into(pop);
    rank_population(pop);

    SearchResult res;
    const int L = sp.num_layers();
    for (int it = 0; it < cfg.iterations; ++it) {
        // binary tournament parents
        std::vector<int> parents;
        const int nsel = std::min(cfg.sample, static_cast<int>(pop.size()));
        for (int i = 0; i < nsel; ++i) {
            const int a = rng.uniform_int(static_cast<int>(pop.size()));
            const int b = rng.uniform_int(static_cast<int>(pop.size()));
            parents.push_back(better_tournament(pop[static_cast<std::size_t>(a)],
                                                pop[static_cast<std::size_t>(b)])
                                  ? a
                                  : b);
        }

        std::vector<Individual> children;
        for (std::size_t i = 0; i + 1 < parents.size(); i += 2) {
            const Path& pa = pop[static_cast<std::size_t>(parents[i])].path;
            const Path& pb = pop[static_cast<std::size_t>(parents[i + 1])].path;
            for (int which = 0; which < 2; ++which) {
                Path child;
                bool ok = false;
                for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
                    const int cut = 1 + rng.uniform_int(std::max(1, L - 1));
                    child.choices.clear();
                    for (int l = 0; l < L; ++l) {
                        const Path& src = (l < cut) == (which == 0) ? pa : pb;
                        child.choices.push_back(src.choices[static_cast<std::size_t>(l)]);
                    }
                    for (int l = 0; l < L; ++l)
                        if (rng.uniform() < 1.0 / L)
                            child.choices[static_cast<std::size_t>(l)] = rng.uniform_int(
                                static_cast<int>(sp.layers[static_cast<std::size_t>(l)].candidates.size()));
                    ok = tiers.in_tier(tier, cost_of_path(sp, child).flops);
                }
                if (!ok) repair_toward_interval(sp, tier, tiers, child, rng);
                if (!tiers.in_tier(tier, cost_of_path(sp, child).flops)) continue;
                Individual ind;
                ind.path = std::move(child);
                ind.flops = cost_of_path(sp, ind.path).flops;
                ind.tier = tier;
                children.push_back(std::move(ind));
            }
        }
        eval_into(children);

        for (auto& c : children) pop.push_back(std::move(c));
        rank_population(pop);
        std::sort(pop.begin(), pop.end(), better_tournament);
        if (static_cast<int>(pop.size()) > cfg.population)
            pop.resize(static_cast<std::size_t>(cfg.population));
        rank_population(pop);

        std::vector<Path> batch;
        for (const auto& ind : pop) batch.push_back(ind.path);
        SearchTraceRow row;
        row.iteration = it;
        row.best_metric =
            std::max_element(pop.begin(), pop.end(), [](const Individual& a, const Individual& b) {
                return a.metric < b.metric;
            })->metric;
        row.front_size = static_cast<int>(std::count_if(
            pop.begin(), pop.end(), [](const Individual& x) { return x.rank == 0; }));
        row.union_params = minimal_supernet(sp, batch).param_size;
        row.cum_comm_cost = cfg.comm_cost_probe ? cfg.comm_cost_probe() : 0;
        res.trace.push_back(row);
    }

    res.best = *std::max_element(pop.begin(), pop.end(),
                                 [](const Individual& a, const Individual& b) {
                                     return a.metric < b.metric;
                                 });
    for (const auto& ind : pop)
        if (ind.rank == 0) res.front.push_back(ind);
    std::sort(res.front.begin(), res.front.end(),
              [](const Individual& a, const Individual& b) { return a.flops < b.flops; });
    return res;
}

double evaluate_centralized(const SearchSpace& sp, const Supernet& net, const Path& path,
                            const Dataset& ds, const std::vector<int>& val_idx) {
    if (val_idx.empty()) throw ContractError("evaluate_centralized: empty validation set");
    Supernet& mutable_net = const_cast<Supernet&>(net);  // read-only bind
    PathParams pp = bind_path(sp, mutable_net, path);
    return net_accuracy(sp, pp, path, ds.inputs, ds.labels, val_idx);
}

BatchEval make_centralized_eval(const SearchSpace& sp, const Supernet& net, const Dataset& ds,
                                const std::vector<int>& val_idx, int threads) {
    // cache: evaluation is a pure function of the path for a frozen supernet
    auto cache = std::make_shared<std::map<Path, double>>();
    return [&sp, &net, &ds, &val_idx, threads, cache](const std::vector<Path>& paths) {
        std::vector<double> out(paths.size());
        std::vector<int> todo;
        for (std::size_t i = 0; i < paths.size(); ++i) {
            auto it = cache->find(paths[i]);
            if (it != cache->end())
                out[i] = it->second;
            else
                todo.push_back(static_cast<int>(i));
        }
        std::vector<double> fresh(todo.size());
        parallel_for(static_cast<int>(todo.size()), threads, [&](int j) {
            fresh[static_cast<std::size_t>(j)] = evaluate_centralized(
                sp, net, paths[static_cast<std::size_t>(todo[static_cast<std::size_t>(j)])], ds,
                val_idx);
        });
        for (std::size_t j = 0; j < todo.size(); ++j) {
            out[static_cast<std::size_t>(todo[j])] = fresh[j];
            (*cache)[paths[static_cast<std::size_t>(todo[j])]] = fresh[j];
        }
        return out;
    };
}

MinimalSupernet minimal_supernet(const SearchSpace& sp, const std::vector<Path>& paths) {
    if (paths.empty()) throw ContractError("minimal_supernet: no paths");
    MinimalSupernet ms;
    ms.subspace.mask.resize(sp.layers.size());
    for (std::size_t l = 0; l < sp.layers.size(); ++l)
        ms.subspace.mask[l].assign(sp.layers[l].candidates.size(), 0);
    for (const Path& p : paths) {
        if (static_cast<int>(p.choices.size()) != sp.num_layers())
            throw ContractError("minimal_supernet: path from a different space");
        for (int l = 0; l < sp.num_layers(); ++l)
            ms.subspace.mask[static_cast<std::size_t>(l)]
                           [static_cast<std::size_t>(p.choices[static_cast<std::size_t>(l)])] = 1;
    }
    for (std::size_t l = 0; l < sp.layers.size(); ++l)
        for (std::size_t c = 0; c < ms.subspace.mask[l].size(); ++c)
            if (ms.subspace.mask[l][c]) ms.param_size += sp.layers[l].costs[c].params;
    ms.subspace.param_size = ms.param_size;
    return ms;
}

FedEvalResult evaluate_federated(const SearchSpace& sp, const Supernet& net,
                                 const std::vector<Path>& paths,
                                 const std::vector<ClientShard>& clients,
                                 const std::vector<std::vector<int>>& client_val_shards,
                                 const Dataset& ds, const TierSpec& tiers,
                                 const FedEvalCfg& cfg, Rng& rng) {
    if (cfg.fe_rounds < 1) throw ContractError("evaluate_federated: fe_rounds must be >= 1");

    std::vector<int> path_tier(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i)
        path_tier[i] = tiers.tier_of(cost_of_path(sp, paths[i]).flops);

    // clients used across FE rounds of one batch are unique
    std::vector<int> pool(clients.size());
    std::iota(pool.begin(), pool.end(), 0);
    rng.shuffle(pool);

    std::vector<double> weighted_sum(paths.size(), 0.0);
    std::vector<double> weight(paths.size(), 0.0);
    int deliveries = 0;

    std::size_t cursor = 0;
    for (int r = 0; r < cfg.fe_rounds && cursor < pool.size(); ++r) {
        std::vector<int> selected;
        for (int i = 0; i < cfg.clients_per_round && cursor < pool.size(); ++i)
            selected.push_back(pool[cursor++]);
        std::sort(selected.begin(), selected.end());

        std::vector<std::vector<double>> scores(selected.size(),
                                                std::vector<double>(paths.size(), -1.0));
        parallel_for(static_cast<int>(selected.size()), cfg.threads, [&](int si) {
            const int cid = selected[static_cast<std::size_t>(si)];
            const auto& shard = client_val_shards[static_cast<std::size_t>(cid)];
            if (shard.empty()) return;
            Supernet& mutable_net = const_cast<Supernet&>(net);
            for (std::size_t pi = 0; pi < paths.size(); ++pi) {
                if (clients[static_cast<std::size_t>(cid)].tier < path_tier[pi]) continue;
                PathParams pp = bind_path(sp, mutable_net, paths[pi]);
                scores[static_cast<std::size_t>(si)][pi] =
                    net_accuracy(sp, pp, paths[pi], ds.inputs, ds.labels, shard);
            }
        });

        for (std::size_t si = 0; si < selected.size(); ++si) {
            const int cid = selected[si];
            const double w =
                static_cast<double>(client_val_shards[static_cast<std::size_t>(cid)].size());
            bool delivered = false;
            for (std::size_t pi = 0; pi < paths.size(); ++pi) {
                if (scores[si][pi] < 0.0) continue;
                weighted_sum[pi] += w * scores[si][pi];
                weight[pi] += w;
                delivered = true;
            }
            if (delivered) ++deliveries;
        }
    }

    FedEvalResult res;
    res.metrics.resize(paths.size());
    res.evaluated.resize(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
        res.evaluated[i] = weight[i] > 0.0;
        res.metrics[i] = res.evaluated[i] ? weighted_sum[i] / weight[i]
                                          : std::numeric_limits<double>::quiet_NaN();
    }
    res.comm_cost = minimal_supernet(sp, paths).param_size * deliveries;
    return res;
}

}  // namespace fedoras
