#include "fedoras/fedcore.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace fedoras {

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

ClientUpdate client_local_train(const SearchSpace& sp, const Supernet& global,
                                const Subspace& sub, const std::vector<int>& shard,
                                const Dataset& ds, std::int64_t tier_budget,
                                const LocalCfg& cfg, std::uint64_t seed) {
    if (shard.empty()) throw ContractError("client_local_train: empty shard");

    ClientUpdate up;
    up.params = global;  // local copy; momentum starts fresh each round
    for (auto& lv : up.params.searchable)
        for (auto& ps : lv)
            for (auto& p : ps) {
                p.momentum.fill(0.0);
                p.grad.fill(0.0);
            }
    for (auto* group : {&up.params.post, &up.params.fixed})
        for (auto& ps : *group)
            for (auto& p : ps) {
                p.momentum.fill(0.0);
                p.grad.fill(0.0);
            }
    up.received = sub;

    Rng rng(seed);
    std::vector<int> idx = shard;
    double loss_sum = 0.0;
    int batches = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(idx);
        for (std::size_t begin = 0; begin < idx.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(begin + static_cast<std::size_t>(cfg.batch_size), idx.size());
            const int bsz = static_cast<int>(end - begin);
            Path path = sample_path_greedy(sp, sub, tier_budget, rng);

            Tensor batch = stack_batch(ds.inputs, idx, static_cast<int>(begin), static_cast<int>(end));
            std::vector<int> labels(static_cast<std::size_t>(bsz));
            for (int i = 0; i < bsz; ++i)
                labels[static_cast<std::size_t>(i)] =
                    ds.labels[static_cast<std::size_t>(idx[begin + static_cast<std::size_t>(i)])];

            PathParams pp = bind_path(sp, up.params, path);
            double loss;
            try {
                loss = net_train_batch(sp, pp, path, batch, labels);
                if (!std::isfinite(loss)) throw ContractError("non-finite loss");
                sgd_step(flatten(pp), cfg.lr, cfg.momentum, cfg.clip_norm);
            } catch (const ContractError&) {
                up.failed = true;
                return up;
            }
            loss_sum += loss;
            ++batches;
            up.total_samples += bsz;
            up.train_flops += 3 * cost_of_path(sp, path).flops * bsz;
            for (int l = 0; l < sp.num_layers(); ++l)
                up.histogram[{l, path.choices[static_cast<std::size_t>(l)]}] += bsz;
        }
    }
    up.mean_loss = batches > 0 ? loss_sum / batches : 0.0;
    return up;
}

void weighted_average_into(Parameter& dst, const std::vector<const Parameter*>& srcs,
                           const std::vector<double>& weights) {
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    if (wsum <= 0.0) return;
    for (std::size_t i = 0; i < dst.value.data.size(); ++i) {
        double acc = 0.0;
        for (std::size_t s = 0; s < srcs.size(); ++s)
            acc += (weights[s] / wsum) * srcs[s]->value.data[i];
        dst.value.data[i] = acc;
    }
}

namespace {

void average_paramset(ParamSet& dst, const std::vector<const ParamSet*>& srcs,
                      const std::vector<double>& weights) {
    for (std::size_t pi = 0; pi < dst.size(); ++pi) {
        std::vector<const Parameter*> ps;
        ps.reserve(srcs.size());
        for (const ParamSet* s : srcs) ps.push_back(&(*s)[pi]);
        weighted_average_into(dst[pi], ps, weights);
    }
}

}  // namespace

void opa_aggregate(const SearchSpace& sp, Supernet& net,
                   const std::vector<ClientUpdate>& updates) {
    if (updates.empty()) throw ContractError("opa_aggregate: no updates");

    for (int l = 0; l < sp.num_layers(); ++l) {
        const int ncand = static_cast<int>(sp.layers[static_cast<std::size_t>(l)].candidates.size());
        for (int c = 0; c < ncand; ++c) {
            std::vector<const ParamSet*> srcs;
            std::vector<double> weights;
            for (const ClientUpdate& up : updates) {
                if (!up.received.contains(l, c)) continue;
                auto it = up.histogram.find({l, c});
                const std::int64_t h = it == up.histogram.end() ? 0 : it->second;
                if (h > 0) {
                    srcs.push_back(&up.params.searchable[static_cast<std::size_t>(l)]
                                                        [static_cast<std::size_t>(c)]);
                    weights.push_back(static_cast<double>(h));
                }
            }
            // operators touched by <= 1 client stay untouched
            if (srcs.size() > 1)
                average_paramset(net.searchable[static_cast<std::size_t>(l)]
                                               [static_cast<std::size_t>(c)],
                                 srcs, weights);
        }
    }

    // fixed components see every sample of every client: same rule with
    // total sample counts
    std::vector<double> weights;
    std::vector<const ClientUpdate*> live;
    for (const ClientUpdate& up : updates)
        if (up.total_samples > 0) {
            live.push_back(&up);
            weights.push_back(static_cast<double>(up.total_samples));
        }
    if (live.size() > 1) {
        for (std::size_t li = 0; li < net.post.size(); ++li) {
            std::vector<const ParamSet*> srcs;
            for (const ClientUpdate* up : live) srcs.push_back(&up->params.post[li]);
            average_paramset(net.post[li], srcs, weights);
        }
        for (std::size_t si = 0; si < net.fixed.size(); ++si) {
            if (net.fixed[si].empty()) continue;
            std::vector<const ParamSet*> srcs;
            for (const ClientUpdate* up : live) srcs.push_back(&up->params.fixed[si]);
            average_paramset(net.fixed[si], srcs, weights);
        }
    }
}

void fedavg_aggregate(const SearchSpace& sp, Supernet& net,
                      const std::vector<ClientUpdate>& updates) {
    if (updates.empty()) throw ContractError("fedavg_aggregate: no updates");

    for (int l = 0; l < sp.num_layers(); ++l) {
        const int ncand = static_cast<int>(sp.layers[static_cast<std::size_t>(l)].candidates.size());
        for (int c = 0; c < ncand; ++c) {
            std::vector<const ParamSet*> srcs;
            std::vector<double> weights;
            for (const ClientUpdate& up : updates) {
                if (!up.received.contains(l, c)) continue;  // never dispatched to this client
                srcs.push_back(&up.params.searchable[static_cast<std::size_t>(l)]
                                                    [static_cast<std::size_t>(c)]);
                weights.push_back(static_cast<double>(up.total_samples));
            }
            if (!srcs.empty())
                average_paramset(net.searchable[static_cast<std::size_t>(l)]
                                               [static_cast<std::size_t>(c)],
                                 srcs, weights);
        }
    }
    std::vector<double> weights;
    for (const ClientUpdate& up : updates) weights.push_back(static_cast<double>(up.total_samples));
    for (std::size_t li = 0; li < net.post.size(); ++li) {
        std::vector<const ParamSet*> srcs;
        for (const ClientUpdate& up : updates) srcs.push_back(&up.params.post[li]);
        average_paramset(net.post[li], srcs, weights);
    }
    for (std::size_t si = 0; si < net.fixed.size(); ++si) {
        if (net.fixed[si].empty()) continue;
        std::vector<const ParamSet*> srcs;
        for (const ClientUpdate& up : updates) srcs.push_back(&up.params.fixed[si]);
        average_paramset(net.fixed[si], srcs, weights);
    }
}

RoundReport run_round(const SearchSpace& sp, Supernet& net,
                      const std::vector<ClientShard>& clients, const Dataset& ds,
                      const TierSpec& tiers, const RoundCfg& cfg, int round,
                      std::uint64_t master_seed) {
    const int K = static_cast<int>(clients.size());
    if (cfg.clients_per_round > K)
        throw ContractError("run_round: k exceeds available clients");

    Rng rng(mix_seed(master_seed, 0x20c0de, static_cast<std::uint64_t>(round)));

    std::vector<int> ids(static_cast<std::size_t>(K));
    std::iota(ids.begin(), ids.end(), 0);
    rng.shuffle(ids);
    ids.resize(static_cast<std::size_t>(cfg.clients_per_round));
    std::sort(ids.begin(), ids.end());

    Subspace shared;
    std::vector<Subspace> per_client;
    if (cfg.per_client_subspace) {
        per_client.reserve(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i)
            per_client.push_back(sample_subspace(sp, cfg.b_comm, rng));
    } else {
        shared = sample_subspace(sp, cfg.b_comm, rng);
    }

    RoundReport rep;
    rep.round = round;
    rep.participants = ids;

    std::vector<ClientUpdate> updates(ids.size());
    parallel_for(static_cast<int>(ids.size()), cfg.threads, [&](int i) {
        const int cid = ids[static_cast<std::size_t>(i)];
        const ClientShard& shard = clients[static_cast<std::size_t>(cid)];
        const Subspace& sub = cfg.per_client_subspace ? per_client[static_cast<std::size_t>(i)] : shared;
        const std::int64_t budget = tiers.budget(shard.tier);
        const std::uint64_t seed =
            mix_seed(master_seed, static_cast<std::uint64_t>(round) << 20, static_cast<std::uint64_t>(cid));
        updates[static_cast<std::size_t>(i)] =
            client_local_train(sp, net, sub, shard.indices, ds, budget, cfg.local, seed);
        updates[static_cast<std::size_t>(i)].client_id = cid;
    });

    std::vector<ClientUpdate> ok;
    for (std::size_t i = 0; i < updates.size(); ++i) {
        const Subspace& sub = cfg.per_client_subspace ? per_client[i] : shared;
        rep.bytes_down += sub.param_size + sp.fixed_params;
        if (!updates[i].failed) ok.push_back(std::move(updates[i]));
    }
    if (ok.empty()) return rep;  // round aborted, supernet unchanged
    std::sort(ok.begin(), ok.end(),
              [](const ClientUpdate& a, const ClientUpdate& b) { return a.client_id < b.client_id; });

    for (const ClientUpdate& up : ok) {
        rep.bytes_up += up.received.param_size + sp.fixed_params;
        rep.mean_client_loss += up.mean_loss;
        rep.train_flops += up.train_flops;
    }
    rep.mean_client_loss /= static_cast<double>(ok.size());

    if (cfg.aggregator == Aggregator::OPA)
        opa_aggregate(sp, net, ok);
    else
        fedavg_aggregate(sp, net, ok);
    return rep;
}

std::vector<double> probe_validation(const SearchSpace& sp, const Supernet& net,
                                     const Dataset& ds, const std::vector<int>& val_idx,
                                     int num_paths, const TierSpec& tiers, Rng& rng) {
    std::vector<double> out;
    if (num_paths <= 0) return out;
    if (val_idx.empty()) throw ContractError("probe_validation: empty validation set");
    Subspace full = full_subspace(sp);
    Supernet& mutable_net = const_cast<Supernet&>(net);  // bind only; evaluation is read-only
    for (int t = 0; t < tiers.num_tiers(); ++t) {
        double acc = 0.0;
        for (int i = 0; i < num_paths; ++i) {
            Path p = sample_path_greedy(sp, full, tiers.budget(t), rng);
            PathParams pp = bind_path(sp, mutable_net, p);
            acc += net_accuracy(sp, pp, p, ds.inputs, ds.labels, val_idx);
        }
        out.push_back(acc / num_paths);
    }
    return out;
}

Stage1Result train_supernet(const SearchSpace& sp, const std::vector<ClientShard>& clients,
                            const Dataset& ds, const std::vector<int>& val_idx,
                            const TierSpec& tiers, const Stage1Cfg& cfg,
                            std::uint64_t master_seed, Supernet initial) {
    Stage1Result res;
    res.net = std::move(initial);
    for (int t = 0; t < cfg.rounds; ++t) {
        RoundReport rep = run_round(sp, res.net, clients, ds, tiers, cfg.round, t, master_seed);
        if (cfg.probe_interval > 0 && (t + 1) % cfg.probe_interval == 0) {
            Rng prng(mix_seed(master_seed, 0x9e0be, static_cast<std::uint64_t>(t)));
            rep.probe_accuracy =
                probe_validation(sp, res.net, ds, val_idx, cfg.probe_paths, tiers, prng);
        }
        res.history.push_back(std::move(rep));
    }
    return res;
}

}  // namespace fedoras
