#include "fedoras/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fedoras {

double scheduled_lr(LrSchedule s, double lr0, int round, int total_rounds) {
    switch (s) {
        case LrSchedule::Constant:
            return lr0;
        case LrSchedule::Cosine: {
            const double lr_min = lr0 / 10.0;
            const double t = total_rounds > 1 ? static_cast<double>(round) / (total_rounds - 1) : 1.0;
            return lr_min + (lr0 - lr_min) * 0.5 * (1.0 + std::cos(M_PI * t));
        }
        case LrSchedule::Step: {
            double lr = lr0;
            if (round >= total_rounds / 2) lr /= 10.0;
            if (round >= (3 * total_rounds) / 4) lr /= 10.0;
            return lr;
        }
    }
    return lr0;
}

namespace {

struct LocalModelResult {
    ModelParams params;
    double mean_loss = 0.0;
    std::int64_t samples = 0;
    std::int64_t train_flops = 0;
    bool failed = false;
};

LocalModelResult train_model_locally(const SearchSpace& sp, const ModelParams& global,
                                     const Path& path, const std::vector<int>& shard,
                                     const Dataset& ds, const LocalCfg& cfg, std::uint64_t seed) {
    LocalModelResult res;
    res.params = global;
    for (auto* group : {&res.params.layer, &res.params.post, &res.params.fixed})
        for (auto& ps : *group)
            for (auto& p : ps) {
                p.momentum.fill(0.0);
                p.grad.fill(0.0);
            }
    const std::int64_t path_flops = cost_of_path(sp, path).flops;
    Rng rng(seed);
    std::vector<int> idx = shard;
    double loss_sum = 0.0;
    int batches = 0;
    for (int e = 0; e < cfg.epochs; ++e) {
        rng.shuffle(idx);
        for (std::size_t begin = 0; begin < idx.size();
             begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(begin + static_cast<std::size_t>(cfg.batch_size), idx.size());
            const int bsz = static_cast<int>(end - begin);
            Tensor batch = stack_batch(ds.inputs, idx, static_cast<int>(begin), static_cast<int>(end));
            std::vector<int> labels(static_cast<std::size_t>(bsz));
            for (int i = 0; i < bsz; ++i)
                labels[static_cast<std::size_t>(i)] =
                    ds.labels[static_cast<std::size_t>(idx[begin + static_cast<std::size_t>(i)])];
            PathParams pp = bind_model(sp, res.params);
            try {
                const double loss = net_train_batch(sp, pp, path, batch, labels);
                if (!std::isfinite(loss)) throw ContractError("non-finite loss");
                sgd_step(flatten(pp), cfg.lr, cfg.momentum, cfg.clip_norm);
                loss_sum += loss;
            } catch (const ContractError&) {
                res.failed = true;
                return res;
            }
            ++batches;
            res.samples += bsz;
            res.train_flops += 3 * path_flops * bsz;
        }
    }
    res.mean_loss = batches > 0 ? loss_sum / batches : 0.0;
    return res;
}

void fedavg_models(ModelParams& global, const std::vector<LocalModelResult>& locals) {
    std::vector<double> weights;
    for (const auto& l : locals) weights.push_back(static_cast<double>(l.samples));
    auto avg_group = [&](std::vector<ParamSet>& dst, auto member) {
        for (std::size_t si = 0; si < dst.size(); ++si)
            for (std::size_t pi = 0; pi < dst[si].size(); ++pi) {
                std::vector<const Parameter*> srcs;
                for (const auto& l : locals) srcs.push_back(&(l.params.*member)[si][pi]);
                weighted_average_into(dst[si][pi], srcs, weights);
            }
    };
    avg_group(global.layer, &ModelParams::layer);
    avg_group(global.post, &ModelParams::post);
    avg_group(global.fixed, &ModelParams::fixed);
}

std::vector<int> eligible_clients(const std::vector<ClientShard>& clients, int tier) {
    std::vector<int> out;
    for (const auto& c : clients)
        if (c.tier >= tier) out.push_back(c.client_id);
    return out;
}

}  // namespace

FinetuneHistory finetune_tier(const SearchSpace& sp, TierModel& model,
                              const std::vector<ClientShard>& clients, const Dataset& ds,
                              const FinetuneCfg& cfg, std::uint64_t master_seed) {
    std::vector<int> eligible = eligible_clients(clients, model.tier);
    if (eligible.empty()) throw ContractError("finetune_tier: no eligible clients for tier " +
                                              std::to_string(model.tier));
    const int k = std::min(cfg.clients_per_round, static_cast<int>(eligible.size()));

    FinetuneHistory hist;
    for (int round = 0; round < cfg.rounds; ++round) {
        Rng rng(mix_seed(master_seed, 0xf1e7, static_cast<std::uint64_t>(round) * 131 +
                                                  static_cast<std::uint64_t>(model.tier)));
        std::vector<int> ids = eligible;
        rng.shuffle(ids);
        ids.resize(static_cast<std::size_t>(k));
        std::sort(ids.begin(), ids.end());
        for (int id : ids)
            if (clients[static_cast<std::size_t>(id)].tier < model.tier)
                throw ContractError("finetune_tier: eligibility violated");

        LocalCfg local = cfg.local;
        local.lr = scheduled_lr(cfg.schedule, cfg.local.lr, round, cfg.rounds);

        std::vector<LocalModelResult> locals(ids.size());
        parallel_for(static_cast<int>(ids.size()), cfg.threads, [&](int i) {
            const int cid = ids[static_cast<std::size_t>(i)];
            const std::uint64_t seed = mix_seed(master_seed, 0xf17e + static_cast<std::uint64_t>(round),
                                                static_cast<std::uint64_t>(cid) * 977 +
                                                    static_cast<std::uint64_t>(model.tier));
            locals[static_cast<std::size_t>(i)] = train_model_locally(
                sp, model.params, model.path, clients[static_cast<std::size_t>(cid)].indices, ds,
                local, seed);
        });
        std::vector<LocalModelResult> ok;
        for (auto& l : locals)
            if (!l.failed) ok.push_back(std::move(l));
        FinetuneRoundRow row{round, local.lr, 0.0, 0};
        if (!ok.empty()) {
            fedavg_models(model.params, ok);
            for (const auto& l : ok) {
                row.mean_loss += l.mean_loss;
                row.train_flops += l.train_flops;
            }
            row.mean_loss /= static_cast<double>(ok.size());
        }
        hist.total_train_flops += row.train_flops;
        hist.rows.push_back(row);
    }
    return hist;
}

TierModel rand_init_baseline(const SearchSpace& sp, const Path& path, int tier,
                             const std::vector<ClientShard>& clients, const Dataset& ds,
                             const FinetuneCfg& cfg, std::uint64_t master_seed) {
    TierModel model;
    model.tier = tier;
    model.path = path;
    model.provenance = "rand-init";
    model.params = init_model(sp, path, mix_seed(master_seed, 0x4a9d, static_cast<std::uint64_t>(tier)));
    finetune_tier(sp, model, clients, ds, cfg, mix_seed(master_seed, 0x4a9e));
    return model;
}

RandomSearchResult random_search_baseline(const SearchSpace& sp, const TierSpec& tiers,
                                          const std::vector<ClientShard>& clients,
                                          const Dataset& ds, const std::vector<int>& val_idx,
                                          std::int64_t budget_flops, const FinetuneCfg& cfg,
                                          std::uint64_t master_seed) {
    RandomSearchResult res;
    res.best_per_tier.resize(static_cast<std::size_t>(tiers.num_tiers()));
    res.best_metric.assign(static_cast<std::size_t>(tiers.num_tiers()),
                           -std::numeric_limits<double>::infinity());
    Rng rng(mix_seed(master_seed, 0x2a2d));
    while (res.spent_flops < budget_flops) {
        Path path = sample_path_uniform(sp, rng);
        const int tier = tiers.tier_of(cost_of_path(sp, path).flops);
        TierModel model;
        model.tier = tier;
        model.path = path;
        model.provenance = "random-search";
        model.params = init_model(sp, path, mix_seed(master_seed, 0x2a2e, rng.raw()));
        FinetuneHistory hist = finetune_tier(sp, model, clients, ds, cfg,
                                             mix_seed(master_seed, 0x2a2f, rng.raw()));
        res.spent_flops += hist.total_train_flops;
        ++res.models_trained;
        const double metric = model_accuracy(sp, model, ds, val_idx);
        if (metric > res.best_metric[static_cast<std::size_t>(tier)]) {
            res.best_metric[static_cast<std::size_t>(tier)] = metric;
            res.best_per_tier[static_cast<std::size_t>(tier)] = std::move(model);
        }
    }
    return res;
}

double model_accuracy(const SearchSpace& sp, TierModel& model, const Dataset& ds,
                      const std::vector<int>& idx) {
    PathParams pp = bind_model(sp, model.params);
    return net_accuracy(sp, pp, model.path, ds.inputs, ds.labels, idx);
}

}  // namespace fedoras
