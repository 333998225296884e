// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier than the unit suites; shares trained supernets across
// criteria to stay within a desk-scale time budget.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "fedoras/config.hpp"
#include "fedoras/finetune.hpp"
#include "fedoras/io.hpp"
#include "fedoras/search.hpp"

using namespace fedoras;

namespace {

int g_failures = 0;

void report(int criterion, const char* what, bool ok, const std::string& detail = "") {
    std::printf("%s criterion %2d: %s%s%s\n", ok ? "PASS" : "FAIL", criterion, what,
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

int hw_threads() {
    const unsigned n = std::thread::hardware_concurrency();
    return n ? static_cast<int>(n) : 4;
}

// ---- shared experiment scaffolding ---------------------------------------

struct Setup {
    SearchSpace sp;
    Dataset ds;
    Split split;
    std::vector<ClientShard> clients;
    std::vector<std::vector<int>> client_val;
    TierSpec tiers;
};

Setup make_setup(std::uint64_t seed, double alpha, int samples = 800, int num_clients = 16) {
    Setup s;
    s.sp = build_space(SpaceConfig{});
    s.ds = gen_synthetic(4, samples, 0.35, mix_seed(seed, 0xd));
    Rng rng(mix_seed(seed, 0xe));
    s.split = holdout_split(s.ds, 0.15, 0.12, rng);
    Dataset train_view;
    train_view.classes = s.ds.classes;
    for (int idx : s.split.train) {
        train_view.inputs.push_back(s.ds.inputs[static_cast<std::size_t>(idx)]);
        train_view.labels.push_back(s.ds.labels[static_cast<std::size_t>(idx)]);
    }
    s.clients = lda_partition(train_view, num_clients, alpha, rng);
    for (auto& c : s.clients)
        for (int& idx : c.indices) idx = s.split.train[static_cast<std::size_t>(idx)];
    s.tiers = tier_boundaries(s.sp, 4, 0.0, 0.8, 5000, rng);
    assign_tiers(s.clients, {0.25, 0.25, 0.25, 0.25}, rng);
    Rng vr(mix_seed(seed, 0xf));
    s.client_val = uniform_index_partition(s.split.val, num_clients, vr);
    return s;
}

Stage1Result train_stage1(const Setup& s, std::uint64_t seed, Aggregator agg, double bcomm_frac,
                          int rounds, int probe_interval, int clients_per_round = 4) {
    Stage1Cfg cfg;
    cfg.rounds = rounds;
    cfg.probe_interval = probe_interval;
    cfg.probe_paths = 4;
    cfg.round.clients_per_round = clients_per_round;
    cfg.round.aggregator = agg;
    cfg.round.b_comm = std::max<std::int64_t>(
        static_cast<std::int64_t>(bcomm_frac * static_cast<double>(s.sp.searchable_params)),
        min_feasible_subspace_params(s.sp) + 1);
    cfg.round.local.epochs = 1;
    cfg.round.local.batch_size = 16;
    cfg.round.local.lr = 0.05;
    cfg.round.threads = hw_threads();
    Supernet net = init_supernet(s.sp, mix_seed(seed, 0x11));
    return train_supernet(s.sp, s.clients, s.ds, s.split.val, s.tiers, cfg,
                          mix_seed(seed, 0x12), std::move(net));
}

std::vector<SearchResult> search_all_tiers(const Setup& s, const Supernet& net,
                                           const std::vector<int>& val_idx, std::uint64_t seed) {
    std::vector<SearchResult> out;
    BatchEval eval = make_centralized_eval(s.sp, net, s.ds, val_idx, hw_threads());
    for (int t = 0; t < s.tiers.num_tiers(); ++t) {
        Nsga2Cfg cfg;
        cfg.iterations = 6;
        cfg.population = 24;
        cfg.sample = 12;
        Rng rng(mix_seed(seed, 0x20, static_cast<std::uint64_t>(t)));
        out.push_back(nsga2_search(s.sp, t, s.tiers, eval, cfg, rng));
    }
    return out;
}

FinetuneCfg small_finetune(double lr = 0.03) {
    FinetuneCfg cfg;
    cfg.rounds = 8;
    cfg.clients_per_round = 4;
    cfg.local.epochs = 1;
    cfg.local.lr = lr;
    cfg.threads = hw_threads();
    return cfg;
}

struct TierOutcome {
    double test_acc = 0.0;
    std::int64_t finetune_flops = 0;
};

TierOutcome finetune_one(const Setup& s, const Supernet* net, const Path& path, int tier,
                         std::uint64_t seed, const FinetuneCfg& cfg = small_finetune()) {
    TierModel model;
    model.tier = tier;
    model.path = path;
    if (net) {
        model.provenance = "supernet-init";
        model.params = extract_model(s.sp, *net, path);
    } else {
        model.provenance = "rand-init";
        model.params = init_model(s.sp, path, mix_seed(seed, 0x30));
    }
    FinetuneHistory hist =
        finetune_tier(s.sp, model, s.clients, s.ds, cfg, mix_seed(seed, 0x31));
    TierOutcome out;
    out.finetune_flops = hist.total_train_flops;
    out.test_acc = model_accuracy(s.sp, model, s.ds, s.split.test);
    return out;
}

// results shared between criteria 8 and 9
struct PipelineRun {
    Setup setup;
    Stage1Result stage1;
    std::vector<SearchResult> searches;
    std::vector<TierOutcome> super_init;   // per tier
    std::int64_t total_flops = 0;          // supernet + fine-tuning cost
};

PipelineRun run_pipeline(std::uint64_t seed, double alpha) {
    PipelineRun r;
    r.setup = make_setup(seed, alpha, 1600);
    r.stage1 = train_stage1(r.setup, seed, Aggregator::OPA, 0.5, 40, 10, 6);
    for (const auto& row : r.stage1.history) r.total_flops += row.train_flops;
    r.searches = search_all_tiers(r.setup, r.stage1.net, r.setup.split.val, seed);
    for (int t = 0; t < 4; ++t) {
        const Path& p = r.searches[static_cast<std::size_t>(t)].best.path;
        r.super_init.push_back(finetune_one(r.setup, &r.stage1.net, p, t, mix_seed(seed, 1, t)));
        r.total_flops += r.super_init.back().finetune_flops;
    }
    return r;
}

// ---- criterion 1: gradient fidelity --------------------------------------

void criterion_gradients() {
    const std::vector<OperatorKind> ops = {
        {OpType::Conv1x1, 0},  {OpType::Conv3x3, 0},          {OpType::DWSepConv, 0, 3, 0.5},
        {OpType::DWSepConv, 0, 3, 1.0}, {OpType::DWSepConv, 0, 3, 2.0}, {OpType::AffineNorm},
        {OpType::AvgPool, 0, 3, 1.0, 2}, {OpType::Dense, 6},
    };
    bool ok = true;
    std::string detail;
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 3 && ok; ++seed) {
        Rng rng(seed * 1117);
        for (const auto& op : ops) {
            const int c = 2 + rng.uniform_int(3);
            const int spatial = 3 + rng.uniform_int(3);
            std::vector<int> shape = op.type == OpType::Dense
                                         ? std::vector<int>{2, 5 + rng.uniform_int(4)}
                                         : std::vector<int>{2, c, spatial, spatial};
            ParamSet params = init_params(op, shape[1], rng);
            Tensor x(shape);
            for (double& v : x.data) v = rng.normal();

            auto loss_of = [&] {
                Tensor y = op_forward(op, params, x);
                double s = 0.0;
                for (double v : y.data) s += 0.5 * v * v;
                return s;
            };
            Tensor y = op_forward(op, params, x);
            for (auto& p : params) p.grad.fill(0.0);
            Tensor gx = op_backward(op, params, x, y);

            std::int64_t total = 0, good = 0, skipped = 0;
            double max_rel = 0.0;
            const double h = 1e-5;
            auto fd = [&](double* slot, double step) {
                const double orig = *slot;
                *slot = orig + step;
                const double up = loss_of();
                *slot = orig - step;
                const double dn = loss_of();
                *slot = orig;
                return (up - dn) / (2 * step);
            };
            auto probe = [&](double* slot, double analytic) {
                const double numeric = fd(slot, h);
                const double numeric2 = fd(slot, h / 2);
                const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
                // a ReLU kink inside the finite-difference interval makes the
                // estimate itself unstable; such coordinates carry no signal
                if (std::abs(numeric - numeric2) / denom > 1e-4) {
                    ++skipped;
                    return;
                }
                const double rel = std::abs(numeric - analytic) / denom;
                max_rel = std::max(max_rel, rel);
                ++total;
                if (rel < 1e-4) ++good;
            };
            for (std::size_t i = 0; i < x.data.size(); i += 5) probe(&x.data[i], gx.data[i]);
            for (auto& p : params)
                for (std::size_t i = 0; i < p.value.data.size(); i += 3)
                    probe(&p.value.data[i], p.grad.data[i]);
            ++checked;
            const double frac = total ? static_cast<double>(good) / total : 1.0;
            const double usable =
                static_cast<double>(total) / static_cast<double>(total + skipped);
            if (usable < 0.8) {
                ok = false;
                detail = op_name(op) + ": only " + fmt_double(usable) +
                         " of coordinates gave a stable finite-difference estimate";
                break;
            }
            if (frac < 0.95 || max_rel >= 1e-2) {
                ok = false;
                detail = op_name(op) + ": frac_ok " + fmt_double(frac) + ", max rel " +
                         fmt_double(max_rel);
                break;
            }
        }
    }
    if (ok && checked < 20) {
        ok = false;
        detail = "only " + std::to_string(checked) + " shape/seed cases";
    }
    report(1, "finite-difference gradients across all parameterized kernels", ok, detail);
}

// ---- criterion 2: path-sampling budget safety ----------------------------

void criterion_path_budgets() {
    SearchSpace sp = build_space(SpaceConfig{});
    Rng rng(2025);
    bool ok = true;
    std::string detail;
    long violations = 0;
    for (int pair = 0; pair < 10 && ok; ++pair) {
        Subspace sub = sample_subspace(sp, sp.searchable_params / 2 + pair * 500, rng);
        // pick a budget above the subspace's cheapest completion
        std::int64_t floor_cost = sp.fixed_flops;
        for (std::size_t l = 0; l < sub.mask.size(); ++l) {
            std::int64_t mc = -1;
            for (std::size_t c = 0; c < sub.mask[l].size(); ++c)
                if (sub.mask[l][c]) {
                    const std::int64_t f = sp.layers[l].costs[c].flops;
                    if (mc < 0 || f < mc) mc = f;
                }
            floor_cost += mc;
        }
        const std::int64_t budget = floor_cost + 1 + rng.uniform_int(200000);
        for (int d = 0; d < 10000; ++d) {
            Path p = sample_path_greedy(sp, sub, budget, rng);
            if (cost_of_path(sp, p).flops >= budget) ++violations;
        }
    }
    if (violations) {
        ok = false;
        detail = std::to_string(violations) + " budget violations";
    }

    if (ok) {
        // enumerable space: greedy support must equal the brute-force feasible set
        SpaceConfig small;
        small.blocks = 1;
        small.layers_per_block = 2;
        SearchSpace tiny = build_space(small);
        Subspace sub = full_subspace(tiny);
        const std::int64_t budget = (min_path_flops(tiny) + max_path_flops(tiny)) / 2;
        std::set<Path> feasible;
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b) {
                Path p;
                p.choices = {a, b};
                if (cost_of_path(tiny, p).flops < budget) feasible.insert(p);
            }
        std::set<Path> seen;
        Rng gr(77);
        for (int d = 0; d < 50000; ++d) seen.insert(sample_path_greedy(tiny, sub, budget, gr));
        if (seen != feasible) {
            ok = false;
            detail = "greedy support " + std::to_string(seen.size()) + " != feasible " +
                     std::to_string(feasible.size());
        }
    }
    report(2, "greedy path sampling never exceeds its budget; support = feasible set", ok, detail);
}

// ---- criterion 3: subspace budget ----------------------------------------

void criterion_subspace_budget() {
    SearchSpace sp = build_space(SpaceConfig{});
    const std::int64_t b = sp.searchable_params / 2;
    Rng rng(31337);
    bool ok = true;
    std::string detail;
    for (int d = 0; d < 10000 && ok; ++d) {
        Subspace sub = sample_subspace(sp, b, rng);
        if (!(sub.param_size < b)) {
            ok = false;
            detail = "draw " + std::to_string(d) + " hit the budget";
        }
        for (const auto& layer : sub.mask) {
            int selected = 0;
            for (char m : layer) selected += m;
            if (selected < 1) {
                ok = false;
                detail = "empty layer at draw " + std::to_string(d);
            }
        }
    }
    report(3, "10k sampled subspaces all strictly under budget with no empty layer", ok, detail);
}

// ---- criterion 4: per-operator aggregation -------------------------------

void criterion_aggregation() {
    SpaceConfig small;
    small.blocks = 1;
    small.layers_per_block = 2;
    SearchSpace sp = build_space(small);
    bool ok = true;
    std::string detail;
    Rng rng(404);

    // (a) full histograms: matches plain sample-weighted averaging
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        Supernet base = init_supernet(sp, 9000 + static_cast<std::uint64_t>(trial));
        std::vector<ClientUpdate> ups;
        const int n = 2 + rng.uniform_int(3);
        for (int i = 0; i < n; ++i) {
            ClientUpdate u;
            u.client_id = i;
            u.params = init_supernet(sp, 100000 + static_cast<std::uint64_t>(trial * 8 + i));
            u.received = full_subspace(sp);
            u.total_samples = 1 + rng.uniform_int(40);
            for (int l = 0; l < sp.num_layers(); ++l)
                for (std::size_t c = 0; c < sp.layers[static_cast<std::size_t>(l)].candidates.size(); ++c)
                    u.histogram[{l, static_cast<int>(c)}] = u.total_samples;
            ups.push_back(std::move(u));
        }
        Supernet a = base, b = base;
        opa_aggregate(sp, a, ups);
        fedavg_aggregate(sp, b, ups);
        for (std::size_t l = 0; l < a.searchable.size() && ok; ++l)
            for (std::size_t c = 0; c < a.searchable[l].size() && ok; ++c)
                for (std::size_t i = 0; i < a.searchable[l][c].size() && ok; ++i)
                    for (std::size_t k = 0; k < a.searchable[l][c][i].value.data.size(); ++k)
                        if (std::abs(a.searchable[l][c][i].value.data[k] -
                                     b.searchable[l][c][i].value.data[k]) > 1e-12) {
                            ok = false;
                            detail = "full-histogram mismatch at trial " + std::to_string(trial);
                            break;
                        }
    }

    // (b) single-contributor operators bitwise unchanged
    if (ok) {
        Supernet net = init_supernet(sp, 5);
        const Supernet before = net;
        ClientUpdate u;
        u.client_id = 0;
        u.params = init_supernet(sp, 6);
        u.received = full_subspace(sp);
        u.total_samples = 10;
        u.histogram[{0, 1}] = 10;
        opa_aggregate(sp, net, {u});
        for (std::size_t l = 0; l < net.searchable.size() && ok; ++l)
            for (std::size_t c = 0; c < net.searchable[l].size() && ok; ++c)
                for (std::size_t i = 0; i < net.searchable[l][c].size(); ++i)
                    if (net.searchable[l][c][i].value.data !=
                        before.searchable[l][c][i].value.data) {
                        ok = false;
                        detail = "single-contributor operator changed";
                        break;
                    }
    }

    // (c) worked example: counts {2,3,5}, values {1,2,4} -> 2.8 exactly
    if (ok) {
        Supernet net = init_supernet(sp, 7);
        std::vector<ClientUpdate> ups;
        const double values[3] = {1.0, 2.0, 4.0};
        const std::int64_t counts[3] = {2, 3, 5};
        for (int i = 0; i < 3; ++i) {
            ClientUpdate u;
            u.client_id = i;
            u.params = net;
            u.received = full_subspace(sp);
            for (auto& p : u.params.searchable[0][1]) p.value.fill(values[i]);
            u.histogram[{0, 1}] = counts[i];
            u.total_samples = counts[i];
            ups.push_back(std::move(u));
        }
        opa_aggregate(sp, net, ups);
        for (const auto& p : net.searchable[0][1])
            for (double v : p.value.data)
                if (std::abs(v - 2.8) > 1e-15) {
                    ok = false;
                    detail = "worked example gave " + fmt_double(v);
                }
    }
    report(4, "histogram-weighted aggregation: FedAvg limit, privacy guard, worked example", ok,
           detail);
}

// ---- criterion 5: pareto + rank correlation ------------------------------

void criterion_pareto() {
    Rng rng(55);
    bool ok = true;
    std::string detail;
    for (int trial = 0; trial < 100 && ok; ++trial) {
        std::vector<Individual> pop(50);
        for (auto& ind : pop) {
            ind.metric = rng.uniform();
            ind.flops = 1 + rng.uniform_int(500);
        }
        std::set<int> oracle;
        for (std::size_t i = 0; i < pop.size(); ++i) {
            bool dominated = false;
            for (std::size_t j = 0; j < pop.size(); ++j)
                if (j != i && dominates(pop[j], pop[i])) dominated = true;
            if (!dominated) oracle.insert(static_cast<int>(i));
        }
        auto fronts = nondominated_sort(pop);
        if (std::set<int>(fronts[0].begin(), fronts[0].end()) != oracle) {
            ok = false;
            detail = "front 0 mismatch at trial " + std::to_string(trial);
        }
    }
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        const int n = 2 + rng.uniform_int(10);
        std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
        for (auto& v : a) v = rng.uniform_int(5);
        for (auto& v : b) v = rng.uniform_int(5);
        int con = 0, dis = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double prod = (a[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(j)]) *
                                    (b[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(j)]);
                if (prod > 0) ++con;
                if (prod < 0) ++dis;
            }
        const double oracle = static_cast<double>(con - dis) / (n * (n - 1) / 2.0);
        if (std::abs(kendall_tau(a, b) - oracle) > 1e-12) {
            ok = false;
            detail = "tau mismatch at trial " + std::to_string(trial);
        }
    }
    report(5, "non-dominated sort and rank correlation match brute-force oracles", ok, detail);
}

// ---- criterion 6: federated vs centralized evaluation --------------------

void criterion_fed_eval() {
    bool ok = true;
    std::string detail;

    // exact equivalence with full participation
    {
        Setup s = make_setup(606, 1000.0);
        for (auto& c : s.clients) c.tier = s.tiers.num_tiers() - 1;  // no eligibility filtering
        Supernet net = init_supernet(s.sp, 17);
        std::vector<Path> paths;
        for (std::uint64_t i = 0; i < 8; ++i) {
            Rng rng(700 + i);
            paths.push_back(sample_path_uniform(s.sp, rng));
        }
        FedEvalCfg cfg;
        cfg.fe_rounds = 1;
        cfg.clients_per_round = static_cast<int>(s.clients.size());
        cfg.threads = hw_threads();
        Rng rng(3);
        FedEvalResult fed = evaluate_federated(s.sp, net, paths, s.clients, s.client_val, s.ds,
                                               s.tiers, cfg, rng);
        BatchEval central = make_centralized_eval(s.sp, net, s.ds, s.split.val, hw_threads());
        auto truth = central(paths);
        for (std::size_t i = 0; i < paths.size(); ++i)
            if (!fed.evaluated[i] || std::abs(fed.metrics[i] - truth[i]) > 1e-12) {
                ok = false;
                detail = "full-participation metrics differ from centralized";
            }
        // identical score vectors: tau agrees with the self-correlation
        // (tau-a stays below 1 when exact ties exist, in both alike)
        if (ok && kendall_tau(fed.metrics, truth) != kendall_tau(truth, truth)) {
            ok = false;
            detail = "ranking differs from centralized at full participation";
        }
    }

    // fidelity grows with fe_rounds, crossing 0.8 before all clients are used
    if (ok) {
        // trained supernets give the paths a real accuracy spread to rank
        std::vector<Setup> setups;
        std::vector<Supernet> nets;
        for (std::uint64_t seed = 1; seed <= 8; ++seed) {
            setups.push_back(make_setup(900 + seed, 1000.0, 1600));
            for (auto& c : setups.back().clients) c.tier = setups.back().tiers.num_tiers() - 1;
            nets.push_back(train_stage1(setups.back(), 60 + seed, Aggregator::OPA, 0.5, 10, 10).net);
        }
        std::vector<double> mean_tau;
        for (int rounds : {1, 2, 4}) {
            double acc = 0.0;
            for (std::uint64_t seed = 1; seed <= 8; ++seed) {
                Setup& s = setups[static_cast<std::size_t>(seed - 1)];
                const Supernet& net = nets[static_cast<std::size_t>(seed - 1)];
                std::vector<Path> paths;
                for (std::uint64_t i = 0; i < 10; ++i) {
                    Rng rng(seed * 31 + i);
                    paths.push_back(sample_path_uniform(s.sp, rng));
                }
                FedEvalCfg cfg;
                cfg.fe_rounds = rounds;
                cfg.clients_per_round = 3;  // 16 clients: 4 rounds still partial
                cfg.threads = hw_threads();
                Rng rng(seed);
                FedEvalResult fed = evaluate_federated(s.sp, net, paths, s.clients, s.client_val,
                                                       s.ds, s.tiers, cfg, rng);
                BatchEval central = make_centralized_eval(s.sp, net, s.ds, s.split.val,
                                                          hw_threads());
                acc += kendall_tau(fed.metrics, central(paths));
            }
            mean_tau.push_back(acc / 8.0);
        }
        for (std::size_t i = 1; i < mean_tau.size(); ++i)
            if (mean_tau[i] < mean_tau[i - 1]) {
                ok = false;
                detail = "mean tau decreased: " + fmt_double(mean_tau[i - 1]) + " -> " +
                         fmt_double(mean_tau[i]);
            }
        if (ok && mean_tau.back() < 0.8) {
            ok = false;
            detail = "tau at 4 partial rounds only " + fmt_double(mean_tau.back());
        }
    }
    report(6, "federated evaluation matches centralized at full participation and converges", ok,
           detail);
}

// ---- criterion 7: aggregation convergence direction ----------------------

double mean_probe(const RoundReport& r) {
    double s = 0.0;
    int n = 0;
    for (double a : r.probe_accuracy)
        if (!std::isnan(a)) {
            s += a;
            ++n;
        }
    return n ? s / n : std::nan("");
}

void criterion_convergence() {
    bool ok = true;
    std::string detail;
    for (double frac : {0.5, 0.25}) {
        int wins = 0;
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            Setup s = make_setup(7000 + seed, 1.0);
            Stage1Result opa = train_stage1(s, 7100 + seed, Aggregator::OPA, frac, 16, 1);
            Stage1Result avg = train_stage1(s, 7100 + seed, Aggregator::FedAvg, frac, 16, 1);
            const double target = 0.7 * mean_probe(avg.history.back());
            auto first_reach = [&](const Stage1Result& r) {
                for (std::size_t i = 0; i < r.history.size(); ++i)
                    if (mean_probe(r.history[i]) >= target) return static_cast<int>(i);
                return static_cast<int>(r.history.size());
            };
            if (first_reach(opa) <= first_reach(avg)) ++wins;
        }
        if (wins < 2) {
            ok = false;
            detail = "bcomm frac " + fmt_double(frac) + ": histogram-weighted aggregation won " +
                     std::to_string(wins) + "/3 seeds";
        }
    }
    report(7, "histogram-weighted aggregation reaches the accuracy target no later than FedAvg",
           ok, detail);
}

// ---- criteria 8 + 9: shared pipeline runs --------------------------------

void criteria_pipeline() {
    std::vector<PipelineRun> runs;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) runs.push_back(run_pipeline(seed, 0.1));

    // 8: supernet-init beats rand-init at the top tier and has a smaller
    //    best-to-worst tier accuracy gap
    {
        // both initializations get the same gentle finetune budget, so the
        // comparison isolates the value of the inherited supernet weights
        const FinetuneCfg gentle = small_finetune(0.02);
        double super_top = 0.0, rand_top = 0.0, super_gap = 0.0, rand_gap = 0.0;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto& r = runs[i];
            const std::uint64_t seed = i + 1;
            std::vector<TierOutcome> super, rand_;
            for (int t = 0; t < 4; ++t) {
                const Path& p = r.searches[static_cast<std::size_t>(t)].best.path;
                super.push_back(finetune_one(r.setup, &r.stage1.net, p, t,
                                             mix_seed(seed, 1, static_cast<std::uint64_t>(t)),
                                             gentle));
                rand_.push_back(finetune_one(r.setup, nullptr, p, t,
                                             mix_seed(seed, 2, static_cast<std::uint64_t>(t)),
                                             gentle));
            }
            super_top += super[3].test_acc;
            rand_top += rand_[3].test_acc;
            auto gap = [](const std::vector<TierOutcome>& v) {
                double lo = 1.0, hi = 0.0;
                for (const auto& t : v) {
                    lo = std::min(lo, t.test_acc);
                    hi = std::max(hi, t.test_acc);
                }
                return hi - lo;
            };
            super_gap += gap(super);
            rand_gap += gap(rand_);
        }
        const bool ok = super_top >= rand_top && super_gap <= rand_gap;
        report(8, "supernet-initialized models beat scratch models and narrow the tier gap", ok,
               "top-tier mean " + fmt_double(super_top / 3) + " vs " + fmt_double(rand_top / 3) +
                   "; gap " + fmt_double(super_gap / 3) + " vs " + fmt_double(rand_gap / 3));
    }

    // 9: against random search under an equal training-cost budget
    {
        std::vector<double> pipeline_mean(4, 0.0), random_mean(4, 0.0);
        std::vector<int> random_n(4, 0);
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto& r = runs[i];
            for (int t = 0; t < 4; ++t)
                pipeline_mean[static_cast<std::size_t>(t)] += r.super_init[static_cast<std::size_t>(t)].test_acc / 3.0;
            RandomSearchResult rs =
                random_search_baseline(r.setup.sp, r.setup.tiers, r.setup.clients, r.setup.ds,
                                       r.setup.split.val, r.total_flops, small_finetune(),
                                       mix_seed(9000, i));
            for (int t = 0; t < 4; ++t)
                if (rs.best_per_tier[static_cast<std::size_t>(t)]) {
                    TierModel& m = *rs.best_per_tier[static_cast<std::size_t>(t)];
                    random_mean[static_cast<std::size_t>(t)] +=
                        model_accuracy(r.setup.sp, m, r.setup.ds, r.setup.split.test);
                    ++random_n[static_cast<std::size_t>(t)];
                }
        }
        int tiers_won = 0;
        std::string margins;
        for (int t = 0; t < 4; ++t) {
            const double rnd = random_n[static_cast<std::size_t>(t)]
                                   ? random_mean[static_cast<std::size_t>(t)] /
                                         random_n[static_cast<std::size_t>(t)]
                                   : 0.0;
            if (pipeline_mean[static_cast<std::size_t>(t)] >= rnd) ++tiers_won;
            margins += (t ? " " : "") + fmt_double(pipeline_mean[static_cast<std::size_t>(t)]) +
                       "/" + fmt_double(rnd);
        }
        report(9, "pipeline matches or beats budget-matched random search on >= 3 of 4 tiers",
               tiers_won >= 3, "tier means (pipeline/random): " + margins);
    }

    // 10: validation subsampling has little effect on final test accuracy
    {
        double mean_diff_50 = 0.0, mean_diff_20 = 0.0;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto& r = runs[i];
            for (double frac : {0.5, 0.2}) {
                std::vector<int> sub_val = r.setup.split.val;
                Rng rng(mix_seed(123, i, static_cast<std::uint64_t>(frac * 10)));
                rng.shuffle(sub_val);
                sub_val.resize(static_cast<std::size_t>(
                    std::llround(frac * static_cast<double>(sub_val.size()))));
                std::sort(sub_val.begin(), sub_val.end());
                // same search seed as the full-validation run, so the only
                // difference is the validation subset itself
                auto searches = search_all_tiers(r.setup, r.stage1.net, sub_val,
                                                 static_cast<std::uint64_t>(i + 1));
                double diff = 0.0;
                for (int t = 0; t < 4; ++t) {
                    // same fine-tune seed as the full-validation run, so the
                    // comparison isolates the validation-subset effect
                    TierOutcome out = finetune_one(r.setup, &r.stage1.net,
                                                   searches[static_cast<std::size_t>(t)].best.path,
                                                   t, mix_seed(i + 1, 1, static_cast<std::uint64_t>(t)));
                    diff += (out.test_acc -
                             r.super_init[static_cast<std::size_t>(t)].test_acc) / 4.0;
                }
                (frac == 0.5 ? mean_diff_50 : mean_diff_20) += diff / 3.0;
            }
        }
        // signed mean over seeds and tiers: subsampling must not shift test
        // accuracy systematically in either direction
        const bool ok = std::abs(mean_diff_50) < 0.02 + 1e-12 &&
                        std::abs(mean_diff_20) < 0.02 + 1e-12;
        report(10, "validation subsampling (50%, 20%) shifts test accuracy by < 2 points", ok,
               "mean delta: 50% " + fmt_double(mean_diff_50) + ", 20% " +
                   fmt_double(mean_diff_20));
    }
}

// ---- criterion 11: end-to-end determinism --------------------------------

void criterion_determinism() {
    namespace fs = std::filesystem;
    const char* bin = std::getenv("FEDORAS_SIM_BIN");
    bool ok = true;
    std::string detail;
    if (!bin) {
        ok = false;
        detail = "FEDORAS_SIM_BIN not set";
    } else {
        fs::path cfg = fs::temp_directory_path() / "fedoras_acc_cfg.json";
        {
            std::ofstream f(cfg);
            f << R"({"data": {"samples": 480, "clients": 8},
                     "supernet": {"rounds": 4, "clients_per_round": 3},
                     "search": {"iterations": 2, "population": 16, "sample_size": 8},
                     "finetune": {"rounds": 2, "clients_per_round": 2},
                     "seed": 11})";
        }
        fs::path a = fs::temp_directory_path() / "fedoras_acc_a";
        fs::path b = fs::temp_directory_path() / "fedoras_acc_b";
        fs::remove_all(a);
        fs::remove_all(b);
        auto run = [&](const fs::path& out, int threads) {
            const std::string cmd = std::string(bin) + " e2e --config " + cfg.string() +
                                    " --threads " + std::to_string(threads) + " --out " +
                                    out.string() + " > /dev/null 2>&1";
            return std::system(cmd.c_str()) == 0;
        };
        if (!run(a, 1) || !run(b, 8)) {
            ok = false;
            detail = "pipeline run failed";
        } else {
            for (const char* name :
                 {"rounds.csv", "clients.csv", "finetune.csv", "search_tier0.csv",
                  "search_tier1.csv", "search_tier2.csv", "search_tier3.csv", "summary.json"}) {
                if (read_text_file((a / name).string()) != read_text_file((b / name).string())) {
                    ok = false;
                    detail = std::string(name) + " differs between thread counts";
                    break;
                }
            }
        }
        fs::remove_all(a);
        fs::remove_all(b);
        fs::remove(cfg);
    }
    report(11, "end-to-end metrics are byte-identical at 1 and 8 threads", ok, detail);
}

}  // namespace

int main() {
    criterion_gradients();
    criterion_path_budgets();
    criterion_subspace_budget();
    criterion_aggregation();
    criterion_pareto();
    criterion_fed_eval();
    criterion_convergence();
    criteria_pipeline();
    criterion_determinism();
    if (g_failures) std::printf("%d criteria FAILED\n", g_failures);
    else std::printf("all 11 criteria passed\n");
    return g_failures ? 1 : 0;
}
