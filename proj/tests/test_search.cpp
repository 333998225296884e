#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "fedoras/search.hpp"

using namespace fedoras;

namespace {

std::vector<Individual> random_cloud(Rng& rng, int n) {
    std::vector<Individual> pop(static_cast<std::size_t>(n));
    for (auto& ind : pop) {
        ind.metric = rng.uniform();
        ind.flops = 1 + rng.uniform_int(1000);
    }
    return pop;
}

std::set<int> brute_force_pareto(const std::vector<Individual>& pop) {
    std::set<int> front;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < pop.size() && !dominated; ++j)
            if (j != i && dominates(pop[j], pop[i])) dominated = true;
        if (!dominated) front.insert(static_cast<int>(i));
    }
    return front;
}

double kendall_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    const int n = static_cast<int>(a.size());
    int concordant = 0, discordant = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double da = a[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(j)];
            const double db = b[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(j)];
            if (da * db > 0) ++concordant;
            if (da * db < 0) ++discordant;
        }
    return static_cast<double>(concordant - discordant) / (n * (n - 1) / 2.0);
}

struct EvalFixture {
    SearchSpace sp;
    Supernet net;
    Dataset ds;
    std::vector<ClientShard> clients;
    std::vector<std::vector<int>> client_val;
    std::vector<int> val_idx;
    TierSpec tiers;

    EvalFixture() : sp(build_space(SpaceConfig{})), net(init_supernet(sp, 7)) {
        ds = gen_synthetic(sp.config.classes, 640, 0.3, 44);
        Rng rng(3);
        clients = lda_partition(ds, 8, 1000.0, rng);
        tiers = tier_boundaries(sp, 4, 0.0, 0.8, 5000, rng);
        // every client in the top tier: eligibility never filters a path
        for (auto& c : clients) c.tier = tiers.num_tiers() - 1;
        for (int i = 480; i < 640; ++i) val_idx.push_back(i);
        Rng vr(5);
        client_val = uniform_index_partition(val_idx, static_cast<int>(clients.size()), vr);
    }
};

}  // namespace

TEST_CASE("dominance and the three-point example") {
    Individual a{{}, 0.9, 10}, b{{}, 0.8, 5}, c{{}, 0.7, 20};
    CHECK_FALSE(dominates(a, b));
    CHECK_FALSE(dominates(b, a));
    CHECK(dominates(a, c));
    auto fronts = nondominated_sort({a, b, c});
    REQUIRE(fronts.size() >= 2);
    CHECK(std::set<int>(fronts[0].begin(), fronts[0].end()) == std::set<int>{0, 1});
    CHECK(fronts[1] == std::vector<int>{2});
}

TEST_CASE("front 0 equals the brute-force oracle on 100 random instances") {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        auto pop = random_cloud(rng, 50);
        auto fronts = nondominated_sort(pop);
        REQUIRE_FALSE(fronts.empty());
        CHECK(std::set<int>(fronts[0].begin(), fronts[0].end()) == brute_force_pareto(pop));
    }
    // single individual: one front
    auto single = nondominated_sort({Individual{{}, 0.5, 10}});
    CHECK(single.size() == 1);
}

TEST_CASE("kendall tau: endpoints, worked example, oracle sweep") {
    CHECK(kendall_tau({1, 2, 3, 4}, {1, 2, 3, 4}) == 1.0);
    CHECK(kendall_tau({1, 2, 3, 4}, {4, 3, 2, 1}) == -1.0);
    CHECK(kendall_tau({1, 2, 3, 4}, {1, 2, 4, 3}) == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
    CHECK_THROWS_AS(kendall_tau({1.0}, {1.0}), ContractError);

    Rng rng(12);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + rng.uniform_int(12);
        std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
        for (auto& v : a) v = rng.uniform_int(6);  // duplicates exercise tie handling
        for (auto& v : b) v = rng.uniform_int(6);
        CHECK(kendall_tau(a, b) == doctest::Approx(kendall_oracle(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("minimal supernet union sizes") {
    SearchSpace sp = build_space(SpaceConfig{});
    Path p1, p2;
    p1.choices = {1, 2, 3, 1};
    p2.choices = {1, 2, 3, 2};  // differs in the last layer only

    auto one = minimal_supernet(sp, {p1});
    CHECK(one.param_size == cost_of_path(sp, p1).params - sp.fixed_params);

    auto two = minimal_supernet(sp, {p1, p2});
    const std::int64_t expected =
        one.param_size + sp.layers[3].costs[2].params;  // shared part + the extra variant
    CHECK(two.param_size == expected);
    CHECK(two.param_size <= sp.searchable_params);

    CHECK_THROWS_AS(minimal_supernet(sp, {}), ContractError);
}

TEST_CASE("nsga2 converges to the cheapest path under a flops-minimizing metric") {
    SpaceConfig small;   // 36 total paths: exhaustively checkable
    small.blocks = 1;
    small.layers_per_block = 2;
    SearchSpace sp = build_space(small);
    Rng tr(1);
    TierSpec tiers = tier_boundaries(sp, 4, 0.0, 0.8, 5000, tr);

    BatchEval cheap_is_best = [&](const std::vector<Path>& paths) {
        std::vector<double> out;
        for (const auto& p : paths)
            out.push_back(-static_cast<double>(cost_of_path(sp, p).flops));
        return out;
    };
    Nsga2Cfg cfg;
    cfg.iterations = 8;
    cfg.population = 32;
    cfg.sample = 16;
    Rng rng(21);
    SearchResult res = nsga2_search(sp, 1, tiers, cheap_is_best, cfg, rng);

    // enumerate the tier's feasible minimum
    std::int64_t best = -1;
    std::vector<int> choice(static_cast<std::size_t>(sp.num_layers()), 0);
    const auto sizes = [&] {
        std::vector<int> s;
        for (const auto& l : sp.layers) s.push_back(static_cast<int>(l.candidates.size()));
        return s;
    }();
    while (true) {
        Path p;
        p.choices = choice;
        const std::int64_t f = cost_of_path(sp, p).flops;
        if (tiers.in_tier(1, f) && (best < 0 || f < best)) best = f;
        int l = 0;
        while (l < sp.num_layers() &&
               ++choice[static_cast<std::size_t>(l)] == sizes[static_cast<std::size_t>(l)]) {
            choice[static_cast<std::size_t>(l)] = 0;
            ++l;
        }
        if (l == sp.num_layers()) break;
    }
    CHECK(res.best.flops == best);
    CHECK(res.trace.size() == 8);
    for (const auto& ind : res.front) CHECK(tiers.in_tier(1, ind.flops));
}

TEST_CASE("nsga2 iteration zero returns the best of the initial population") {
    SearchSpace sp = build_space(SpaceConfig{});
    Rng tr(2);
    TierSpec tiers = tier_boundaries(sp, 4, 0.0, 0.8, 5000, tr);
    BatchEval eval = [&](const std::vector<Path>& paths) {
        return std::vector<double>(paths.size(), 0.5);
    };
    Nsga2Cfg cfg;
    cfg.iterations = 0;
    cfg.population = 16;
    cfg.sample = 8;
    Rng rng(5);
    SearchResult res = nsga2_search(sp, 0, tiers, eval, cfg, rng);
    CHECK(res.best.metric == 0.5);
    CHECK(tiers.in_tier(0, res.best.flops));
}

TEST_CASE("centralized evaluation is pure and cached") {
    EvalFixture fx;
    BatchEval eval = make_centralized_eval(fx.sp, fx.net, fx.ds, fx.val_idx, 2);
    Path p;
    p.choices = {1, 2, 1, 3};
    auto first = eval({p, p});
    CHECK(first[0] == first[1]);
    auto again = eval({p});
    CHECK(again[0] == first[0]);
    // untrained supernet scores near chance
    CHECK(first[0] > 0.05);
    CHECK(first[0] < 0.6);
}

TEST_CASE("federated evaluation with all clients equals centralized") {
    EvalFixture fx;
    std::vector<Path> paths;
    for (std::uint64_t s = 0; s < 6; ++s) {
        Rng rng(40 + s);
        paths.push_back(sample_path_uniform(fx.sp, rng));
    }
    FedEvalCfg cfg;
    cfg.fe_rounds = 1;
    cfg.clients_per_round = static_cast<int>(fx.clients.size());
    Rng rng(6);
    FedEvalResult fed = evaluate_federated(fx.sp, fx.net, paths, fx.clients, fx.client_val,
                                           fx.ds, fx.tiers, cfg, rng);
    BatchEval central = make_centralized_eval(fx.sp, fx.net, fx.ds, fx.val_idx);
    auto truth = central(paths);
    for (std::size_t i = 0; i < paths.size(); ++i) {
        REQUIRE(fed.evaluated[i]);
        CHECK(fed.metrics[i] == doctest::Approx(truth[i]).epsilon(1e-12));
    }
    CHECK(kendall_tau(fed.metrics, truth) == 1.0);
    CHECK(fed.comm_cost ==
          minimal_supernet(fx.sp, paths).param_size *
              static_cast<std::int64_t>(fx.clients.size()));
}

TEST_CASE("federated evaluation: one client, one round") {
    EvalFixture fx;
    Path p;
    p.choices = {0, 1, 2, 3};
    FedEvalCfg cfg;
    cfg.fe_rounds = 1;
    cfg.clients_per_round = 1;
    Rng rng(8);
    FedEvalResult fed = evaluate_federated(fx.sp, fx.net, {p}, fx.clients, fx.client_val,
                                           fx.ds, fx.tiers, cfg, rng);
    REQUIRE(fed.evaluated[0]);
    // metric must equal some single client's local accuracy
    bool matched = false;
    for (std::size_t c = 0; c < fx.clients.size(); ++c) {
        ModelParams m = extract_model(fx.sp, const_cast<Supernet&>(fx.net), p);
        PathParams pp = bind_model(fx.sp, m);
        const double local =
            net_accuracy(fx.sp, pp, p, fx.ds.inputs, fx.ds.labels, fx.client_val[c]);
        if (std::abs(local - fed.metrics[0]) < 1e-12) matched = true;
    }
    CHECK(matched);
}

TEST_CASE("fidelity improves with fe_rounds on average") {
    std::vector<double> mean_tau;
    for (int rounds : {1, 4}) {
        double acc = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            EvalFixture fx;
            std::vector<Path> paths;
            for (std::uint64_t s = 0; s < 8; ++s) {
                Rng rng(seed * 100 + s);
                paths.push_back(sample_path_uniform(fx.sp, rng));
            }
            FedEvalCfg cfg;
            cfg.fe_rounds = rounds;
            cfg.clients_per_round = 2;
            Rng rng(seed);
            FedEvalResult fed = evaluate_federated(fx.sp, fx.net, paths, fx.clients,
                                                   fx.client_val, fx.ds, fx.tiers, cfg, rng);
            BatchEval central = make_centralized_eval(fx.sp, fx.net, fx.ds, fx.val_idx);
            acc += kendall_tau(fed.metrics, central(paths));
        }
        mean_tau.push_back(acc / 5.0);
    }
    CHECK(mean_tau[1] >= mean_tau[0] - 0.05);
}
