#include "fedoras/space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedoras {

namespace {

std::int64_t searchable_min_flops(const LayerSpec& l) {
    std::int64_t m = l.costs[0].flops;
    for (const auto& c : l.costs) m = std::min(m, c.flops);
    return m;
}

std::int64_t searchable_max_flops(const LayerSpec& l) {
    std::int64_t m = l.costs[0].flops;
    for (const auto& c : l.costs) m = std::max(m, c.flops);
    return m;
}

}  // namespace

OperatorKind parse_op_name(const std::string& name) {
    auto starts = [&](const char* p) { return name.rfind(p, 0) == 0; };
    if (name == "identity") return {OpType::Identity};
    if (name == "zero") return {OpType::Zero};
    if (name == "conv1x1") return {OpType::Conv1x1};
    if (name == "conv3x3") return {OpType::Conv3x3};
    if (name == "affine") return {OpType::AffineNorm};
    if (starts("avgpool")) {
        OperatorKind op{OpType::AvgPool};
        op.window = std::stoi(name.substr(7));
        if (op.window < 2 || op.window % 2 == 0)
            throw ContractError("avgpool window must be an odd number >= 3 (same-shape pooling): " + name);
        return op;
    }
    if (starts("dwsep")) {
        // dwsep{k}_e{expansion}
        auto us = name.find("_e");
        if (us != std::string::npos) {
            OperatorKind op{OpType::DWSepConv};
            op.kernel = std::stoi(name.substr(5, us - 5));
            op.expansion = std::stod(name.substr(us + 2));
            if (op.kernel != 1 && op.kernel != 3)
                throw ContractError("dwsep kernel must be 1 or 3: " + name);
            return op;
        }
    }
    std::string valid;
    for (const auto& n : known_op_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ContractError("unknown operator '" + name + "'; valid kinds: " + valid);
}

std::vector<std::string> known_op_names() {
    return {"identity", "zero",       "conv1x1",   "conv3x3",  "affine",
            "avgpool3", "dwsep1_e0.5", "dwsep1_e1", "dwsep1_e2", "dwsep3_e0.5",
            "dwsep3_e1", "dwsep3_e2"};
}

SearchSpace build_space(const SpaceConfig& cfg) {
    SearchSpace sp;
    sp.config = cfg;

    const int L = cfg.blocks * cfg.layers_per_block;
    int ch = cfg.stem_channels;
    int spatial = cfg.input_spatial;

    // stem
    Slot stem;
    stem.kind = SlotKind::Stem;
    stem.fixed_op = {OpType::Conv3x3};
    stem.fixed_op.out = ch;
    stem.in_shape = {cfg.input_channels, spatial, spatial};
    stem.out_shape = {ch, spatial, spatial};
    sp.slots.push_back(stem);

    int layer_idx = 0;
    for (int b = 0; b < cfg.blocks; ++b) {
        for (int i = 0; i < cfg.layers_per_block; ++i, ++layer_idx) {
            const auto names_it = cfg.layer_overrides.find(layer_idx);
            const std::vector<std::string>& names =
                names_it != cfg.layer_overrides.end() ? names_it->second : cfg.candidates;
            if (names.size() < 2)
                throw ContractError("layer " + std::to_string(layer_idx) +
                                    " needs >=2 candidates, got " + std::to_string(names.size()));
            LayerSpec layer;
            layer.in_shape = {ch, spatial, spatial};
            for (const auto& n : names) {
                OperatorKind op = parse_op_name(n);
                if (op.type == OpType::Zero)
                    throw ContractError("layer " + std::to_string(layer_idx) +
                                        ": zero operator is only valid in skip-connection slots, "
                                        "not in a feedforward layer");
                auto out = op_output_shape(op, layer.in_shape);
                if (out != layer.in_shape)
                    throw ContractError("layer " + std::to_string(layer_idx) + " candidate '" + n +
                                        "' maps " + shape_str(layer.in_shape) + " to " +
                                        shape_str(out) + "; candidates must preserve shape");
                layer.candidates.push_back(op);
                layer.costs.push_back(op_cost(op, layer.in_shape));
            }
            layer.mandatory = std::none_of(layer.candidates.begin(), layer.candidates.end(),
                                           [](const OperatorKind& o) { return o.type == OpType::Identity; });

            Slot s;
            s.kind = SlotKind::Searchable;
            s.layer_index = layer_idx;
            s.in_shape = layer.in_shape;
            s.out_shape = layer.in_shape;
            sp.slots.push_back(s);
            sp.layers.push_back(std::move(layer));
        }
        // fixed reduction: conv3x3 stride 2, channels x reduction_channel_mult
        const int out_ch = static_cast<int>(std::llround(ch * cfg.reduction_channel_mult));
        Slot red;
        red.kind = SlotKind::Reduction;
        red.fixed_op = {OpType::Conv3x3};
        red.fixed_op.out = out_ch;
        red.fixed_op.stride = 2;
        red.in_shape = {ch, spatial, spatial};
        spatial = (spatial + 2 - 3) / 2 + 1;
        ch = out_ch;
        red.out_shape = {ch, spatial, spatial};
        sp.slots.push_back(red);
    }

    Slot pool;
    pool.kind = SlotKind::GlobalPool;
    pool.in_shape = {ch, spatial, spatial};
    pool.out_shape = {ch};
    sp.slots.push_back(pool);

    Slot head;
    head.kind = SlotKind::Classifier;
    head.fixed_op = {OpType::Dense};
    head.fixed_op.out = cfg.classes;
    head.in_shape = {ch};
    head.out_shape = {cfg.classes};
    sp.slots.push_back(head);

    if (static_cast<int>(sp.layers.size()) != L)
        throw ContractError("internal: layer plan mismatch");

    // fixed costs: stem/reductions/classifier plus the per-layer post affine
    // norm and its ReLU; the stem/reduction affine+relu as well.
    for (const Slot& s : sp.slots) {
        switch (s.kind) {
            case SlotKind::Stem:
            case SlotKind::Reduction: {
                OpCost conv = op_cost(s.fixed_op, s.in_shape);
                OperatorKind aff{OpType::AffineNorm};
                OpCost affc = op_cost(aff, s.out_shape);
                sp.fixed_params += conv.params + affc.params;
                std::int64_t hw = static_cast<std::int64_t>(s.out_shape[1]) * s.out_shape[2];
                sp.fixed_flops += conv.flops + affc.flops + s.out_shape[0] * hw;  // + relu
                break;
            }
            case SlotKind::Searchable: {
                OperatorKind aff{OpType::AffineNorm};
                OpCost affc = op_cost(aff, s.out_shape);
                std::int64_t hw = static_cast<std::int64_t>(s.out_shape[1]) * s.out_shape[2];
                sp.fixed_params += affc.params;
                sp.fixed_flops += affc.flops + s.out_shape[0] * hw;
                break;
            }
            case SlotKind::GlobalPool: {
                sp.fixed_flops += Tensor::numel_of(s.in_shape);
                break;
            }
            case SlotKind::Classifier: {
                OpCost d = op_cost(s.fixed_op, s.in_shape);
                sp.fixed_params += d.params;
                sp.fixed_flops += d.flops;
                break;
            }
        }
    }
    for (const LayerSpec& l : sp.layers)
        for (const OpCost& c : l.costs) sp.searchable_params += c.params;

    return sp;
}

PathCost cost_of_path(const SearchSpace& sp, const Path& path) {
    if (static_cast<int>(path.choices.size()) != sp.num_layers())
        throw ContractError("path length != number of searchable layers");
    PathCost c{sp.fixed_params, sp.fixed_flops};
    for (int l = 0; l < sp.num_layers(); ++l) {
        const int idx = path.choices[static_cast<std::size_t>(l)];
        const auto& layer = sp.layers[static_cast<std::size_t>(l)];
        if (idx < 0 || idx >= static_cast<int>(layer.candidates.size()))
            throw ContractError("invalid candidate index at layer " + std::to_string(l));
        c.params += layer.costs[static_cast<std::size_t>(idx)].params;
        c.flops += layer.costs[static_cast<std::size_t>(idx)].flops;
    }
    return c;
}

std::int64_t min_path_flops(const SearchSpace& sp) {
    std::int64_t f = sp.fixed_flops;
    for (const auto& l : sp.layers) f += searchable_min_flops(l);
    return f;
}

std::int64_t max_path_flops(const SearchSpace& sp) {
    std::int64_t f = sp.fixed_flops;
    for (const auto& l : sp.layers) f += searchable_max_flops(l);
    return f;
}

int TierSpec::tier_of(std::int64_t flops) const {
    if (flops <= edges.front()) return 0;
    for (int t = 0; t < num_tiers(); ++t)
        if (flops <= edges[static_cast<std::size_t>(t) + 1]) return t;
    return num_tiers() - 1;
}

bool TierSpec::in_tier(int tier, std::int64_t flops) const {
    const std::int64_t lo = edges[static_cast<std::size_t>(tier)];
    const std::int64_t hi = edges[static_cast<std::size_t>(tier) + 1];
    if (tier == 0) return flops >= lo && flops <= hi;
    return flops > lo && flops <= hi;
}

TierSpec tier_boundaries(const SearchSpace& sp, int num_tiers, double rho_l, double rho_h,
                         int sample_n, Rng& rng, std::vector<double> client_fractions) {
    if (num_tiers < 2) throw ContractError("tier_boundaries: num_tiers must be >= 2");
    if (sample_n < 1000) throw ContractError("tier_boundaries: need >= 1000 samples");
    if (!(rho_l >= 0.0 && rho_l < rho_h)) throw ContractError("tier_boundaries: need 0 <= rho_l < rho_h");
    if (!(rho_h < 1.0)) throw ContractError("rho_h must be < 1 for multi-tier");

    std::vector<std::int64_t> flops(static_cast<std::size_t>(sample_n));
    for (auto& f : flops) f = cost_of_path(sp, sample_path_uniform(sp, rng)).flops;
    std::sort(flops.begin(), flops.end());
    if (flops.front() == flops.back()) throw ContractError("space has no FLOPs spread");

    auto quantile = [&](double rho) {
        std::size_t idx = static_cast<std::size_t>(std::floor(rho * sample_n));
        idx = std::min(std::max<std::size_t>(idx, 1), flops.size()) - 1;
        return flops[idx];
    };
    const double b_high = static_cast<double>(quantile(rho_h));
    const double b_low =
        rho_l > 0.0 ? static_cast<double>(quantile(rho_l)) : static_cast<double>(flops.front());

    TierSpec tiers;
    tiers.edges.resize(static_cast<std::size_t>(num_tiers) + 1);
    tiers.edges.front() = min_path_flops(sp);
    tiers.edges.back() = max_path_flops(sp);
    for (int i = 1; i < num_tiers; ++i)
        tiers.edges[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(
            std::llround(b_low + (b_high - b_low) * i / (num_tiers - 1)));
    for (std::size_t i = 1; i < tiers.edges.size(); ++i)
        if (tiers.edges[i] <= tiers.edges[i - 1])
            throw ContractError("tier_boundaries: degenerate boundaries (space has too little spread)");

    if (client_fractions.empty())
        client_fractions.assign(static_cast<std::size_t>(num_tiers), 1.0 / num_tiers);
    tiers.client_fractions = std::move(client_fractions);
    return tiers;
}

Subspace full_subspace(const SearchSpace& sp) {
    Subspace sub;
    sub.mask.resize(sp.layers.size());
    for (std::size_t l = 0; l < sp.layers.size(); ++l) {
        sub.mask[l].assign(sp.layers[l].candidates.size(), 1);
        for (const OpCost& c : sp.layers[l].costs) sub.param_size += c.params;
    }
    return sub;
}

std::int64_t min_feasible_subspace_params(const SearchSpace& sp) {
    std::int64_t total = 0;
    for (const auto& layer : sp.layers) {
        if (!layer.mandatory) continue;
        std::int64_t best = -1;
        for (const OpCost& c : layer.costs)
            if (c.params > 0 && (best < 0 || c.params < best)) best = c.params;
        if (best > 0) total += best;
    }
    return total;
}

Subspace sample_subspace(const SearchSpace& sp, std::int64_t b_comm, Rng& rng) {
    const std::int64_t min_needed = min_feasible_subspace_params(sp);
    if (!(min_needed < b_comm))
        throw ContractError("sample_subspace: budget " + std::to_string(b_comm) +
                            " infeasible; minimum feasible budget is " +
                            std::to_string(min_needed + 1));

    Subspace sub;
    sub.mask.resize(sp.layers.size());
    for (std::size_t l = 0; l < sp.layers.size(); ++l)
        sub.mask[l].assign(sp.layers[l].candidates.size(), 0);

    // non-parametric candidates are always sent downstream
    for (std::size_t l = 0; l < sp.layers.size(); ++l)
        for (std::size_t c = 0; c < sp.layers[l].costs.size(); ++c)
            if (sp.layers[l].costs[c].params == 0) sub.mask[l][c] = 1;

    std::int64_t running = 0;

    // mandatory layers first: one candidate each, with a reservation for the
    // cheapest choice of the mandatory layers still to come
    std::vector<int> mandatory;
    for (int l = 0; l < sp.num_layers(); ++l)
        if (sp.layers[static_cast<std::size_t>(l)].mandatory) mandatory.push_back(l);
    rng.shuffle(mandatory);
    for (std::size_t mi = 0; mi < mandatory.size(); ++mi) {
        const int l = mandatory[mi];
        std::int64_t reserve = 0;
        for (std::size_t mj = mi + 1; mj < mandatory.size(); ++mj) {
            const auto& layer = sp.layers[static_cast<std::size_t>(mandatory[mj])];
            std::int64_t best = -1;
            for (const OpCost& c : layer.costs)
                if (c.params > 0 && (best < 0 || c.params < best)) best = c.params;
            if (best > 0) reserve += best;
        }
        const auto& layer = sp.layers[static_cast<std::size_t>(l)];
        std::vector<int> feasible;
        for (std::size_t c = 0; c < layer.costs.size(); ++c)
            if (!sub.mask[static_cast<std::size_t>(l)][c] &&
                running + layer.costs[c].params + reserve < b_comm)
                feasible.push_back(static_cast<int>(c));
        if (feasible.empty())
            throw ContractError("sample_subspace: no feasible candidate for mandatory layer " +
                                std::to_string(l));
        const int pick = feasible[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(feasible.size())))];
        sub.mask[static_cast<std::size_t>(l)][static_cast<std::size_t>(pick)] = 1;
        running += layer.costs[static_cast<std::size_t>(pick)].params;
    }

    // remaining parametric candidates, global uniform order without replacement
    std::vector<std::pair<int, int>> pool;
    for (int l = 0; l < sp.num_layers(); ++l)
        for (std::size_t c = 0; c < sp.layers[static_cast<std::size_t>(l)].costs.size(); ++c)
            if (sp.layers[static_cast<std::size_t>(l)].costs[c].params > 0 &&
                !sub.mask[static_cast<std::size_t>(l)][c])
                pool.emplace_back(l, static_cast<int>(c));
    rng.shuffle(pool);
    for (auto [l, c] : pool) {
        const std::int64_t p = sp.layers[static_cast<std::size_t>(l)].costs[static_cast<std::size_t>(c)].params;
        if (running + p < b_comm) {
            sub.mask[static_cast<std::size_t>(l)][static_cast<std::size_t>(c)] = 1;
            running += p;
        }
    }

    sub.param_size = running;
    return sub;
}

Path sample_path_uniform(const SearchSpace& sp, Rng& rng) {
    Path p;
    p.choices.resize(static_cast<std::size_t>(sp.num_layers()));
    for (int l = 0; l < sp.num_layers(); ++l)
        p.choices[static_cast<std::size_t>(l)] =
            rng.uniform_int(static_cast<int>(sp.layers[static_cast<std::size_t>(l)].candidates.size()));
    return p;
}

Path sample_path_rejection(const SearchSpace& sp, const Subspace& sub, std::int64_t budget,
                           Rng& rng, int max_rejections) {
    std::vector<std::vector<int>> selected(sp.layers.size());
    for (std::size_t l = 0; l < sp.layers.size(); ++l) {
        for (std::size_t c = 0; c < sub.mask[l].size(); ++c)
            if (sub.mask[l][c]) selected[l].push_back(static_cast<int>(c));
        if (selected[l].empty())
            throw ContractError("sample_path_rejection: empty layer " + std::to_string(l));
    }
    for (int attempt = 0; attempt < max_rejections; ++attempt) {
        Path p;
        p.choices.resize(sp.layers.size());
        for (std::size_t l = 0; l < sp.layers.size(); ++l)
            p.choices[l] = selected[l][static_cast<std::size_t>(
                rng.uniform_int(static_cast<int>(selected[l].size())))];
        if (cost_of_path(sp, p).flops < budget) return p;
    }
    throw ContractError("sample_path_rejection: budget infeasible or pathological (cap " +
                        std::to_string(max_rejections) + " reached)");
}

Path sample_path_greedy(const SearchSpace& sp, const Subspace& sub, std::int64_t budget,
                        Rng& rng) {
    const int L = sp.num_layers();
    // per-layer candidate lists within the subspace and their min costs
    std::vector<std::vector<int>> selected(static_cast<std::size_t>(L));
    std::vector<std::int64_t> min_cost(static_cast<std::size_t>(L), 0);
    for (int l = 0; l < L; ++l) {
        const auto& layer = sp.layers[static_cast<std::size_t>(l)];
        std::int64_t mc = -1;
        for (std::size_t c = 0; c < sub.mask[static_cast<std::size_t>(l)].size(); ++c)
            if (sub.mask[static_cast<std::size_t>(l)][c]) {
                selected[static_cast<std::size_t>(l)].push_back(static_cast<int>(c));
                const std::int64_t f = layer.costs[c].flops;
                if (mc < 0 || f < mc) mc = f;
            }
        if (mc < 0) throw ContractError("sample_path_greedy: empty layer " + std::to_string(l));
        min_cost[static_cast<std::size_t>(l)] = mc;
    }

    std::int64_t floor_cost = sp.fixed_flops;
    for (int l = 0; l < L; ++l) floor_cost += min_cost[static_cast<std::size_t>(l)];
    if (!(floor_cost < budget))
        throw ContractError("sample_path_greedy: budget " + std::to_string(budget) +
                            " infeasible even with cheapest choices (min cost " +
                            std::to_string(floor_cost) + ")");

    // random permutation, layers without a zero-cost option ordered first
    std::vector<int> order(static_cast<std::size_t>(L));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::stable_partition(order.begin(), order.end(),
                          [&](int l) { return min_cost[static_cast<std::size_t>(l)] > 0; });

    Path p;
    p.choices.assign(static_cast<std::size_t>(L), -1);
    std::int64_t running = sp.fixed_flops;
    std::int64_t reserve = floor_cost - sp.fixed_flops;
    for (int step = 0; step < L; ++step) {
        const int l = order[static_cast<std::size_t>(step)];
        reserve -= min_cost[static_cast<std::size_t>(l)];
        const auto& layer = sp.layers[static_cast<std::size_t>(l)];
        std::vector<int> feasible;
        for (int c : selected[static_cast<std::size_t>(l)])
            if (running + layer.costs[static_cast<std::size_t>(c)].flops + reserve < budget)
                feasible.push_back(c);
        // floor_cost < budget guarantees at least the cheapest candidate fits
        const int pick = feasible[static_cast<std::size_t>(
            rng.uniform_int(static_cast<int>(feasible.size())))];
        p.choices[static_cast<std::size_t>(l)] = pick;
        running += layer.costs[static_cast<std::size_t>(pick)].flops;
    }
    return p;
}

// ---- parameters -----------------------------------------------------------

Supernet init_supernet(const SearchSpace& sp, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x5eed));
    Supernet net;
    net.searchable.resize(sp.layers.size());
    for (std::size_t l = 0; l < sp.layers.size(); ++l) {
        const auto& layer = sp.layers[l];
        for (const OperatorKind& op : layer.candidates)
            net.searchable[l].push_back(init_params(op, layer.in_shape[0], rng));
        OperatorKind aff{OpType::AffineNorm};
        net.post.push_back(init_params(aff, layer.in_shape[0], rng));
    }
    net.fixed.resize(sp.slots.size());
    for (std::size_t s = 0; s < sp.slots.size(); ++s) {
        const Slot& slot = sp.slots[s];
        if (slot.kind == SlotKind::Stem || slot.kind == SlotKind::Reduction) {
            ParamSet ps = init_params(slot.fixed_op, slot.in_shape[0], rng);
            OperatorKind aff{OpType::AffineNorm};
            ParamSet affps = init_params(aff, slot.out_shape[0], rng);
            for (auto& p : affps) ps.push_back(std::move(p));
            net.fixed[s] = std::move(ps);
        } else if (slot.kind == SlotKind::Classifier) {
            net.fixed[s] = init_params(slot.fixed_op, slot.in_shape[0], rng);
        }
    }
    for (const auto& lv : net.searchable)
        for (const auto& ps : lv) net.total_param_count += param_count(ps);
    for (const auto& ps : net.post) net.total_param_count += param_count(ps);
    for (const auto& ps : net.fixed) net.total_param_count += param_count(ps);
    return net;
}

ModelParams extract_model(const SearchSpace& sp, const Supernet& net, const Path& path) {
    ModelParams m;
    for (int l = 0; l < sp.num_layers(); ++l) {
        m.layer.push_back(net.searchable[static_cast<std::size_t>(l)]
                                        [static_cast<std::size_t>(path.choices[static_cast<std::size_t>(l)])]);
        m.post.push_back(net.post[static_cast<std::size_t>(l)]);
    }
    m.fixed = net.fixed;
    return m;
}

ModelParams init_model(const SearchSpace& sp, const Path& path, std::uint64_t seed) {
    Supernet scratch = init_supernet(sp, seed);
    return extract_model(sp, scratch, path);
}

std::int64_t model_param_count(const ModelParams& m) {
    std::int64_t n = 0;
    for (const auto& ps : m.layer) n += param_count(ps);
    for (const auto& ps : m.post) n += param_count(ps);
    for (const auto& ps : m.fixed) n += param_count(ps);
    return n;
}

PathParams bind_path(const SearchSpace& sp, Supernet& net, const Path& path) {
    PathParams pp;
    for (int l = 0; l < sp.num_layers(); ++l) {
        pp.layer.push_back(&net.searchable[static_cast<std::size_t>(l)]
                                          [static_cast<std::size_t>(path.choices[static_cast<std::size_t>(l)])]);
        pp.post.push_back(&net.post[static_cast<std::size_t>(l)]);
    }
    for (auto& ps : net.fixed) pp.fixed.push_back(&ps);
    return pp;
}

PathParams bind_model(const SearchSpace& sp, ModelParams& m) {
    PathParams pp;
    for (auto& ps : m.layer) pp.layer.push_back(&ps);
    for (auto& ps : m.post) pp.post.push_back(&ps);
    (void)sp;
    for (auto& ps : m.fixed) pp.fixed.push_back(&ps);
    return pp;
}

std::vector<Parameter*> flatten(const PathParams& pp) {
    std::vector<Parameter*> out;
    auto add = [&](ParamSet* ps) {
        if (!ps) return;
        for (Parameter& p : *ps) out.push_back(&p);
    };
    for (ParamSet* ps : pp.layer) add(ps);
    for (ParamSet* ps : pp.post) add(ps);
    for (ParamSet* ps : pp.fixed) add(ps);
    return out;
}

}  // namespace fedoras
