// fedoras-sim: deterministic desk-scale federated architecture search.
//
// Every subcommand rebuilds its inputs from the seed, so `search` does not
// need a prior `train-supernet` invocation; `e2e` runs the whole pipeline
// with one set of artifacts.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedoras/config.hpp"
#include "fedoras/finetune.hpp"
#include "fedoras/io.hpp"
#include "fedoras/search.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fedoras;

namespace {

struct CliOverrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string out;
    std::string aggregator;
    std::optional<double> bcomm_frac;
    std::string eval;
    std::optional<int> fe_rounds;
};

ExperimentConfig resolve_config(const CliOverrides& o) {
    ExperimentConfig c =
        o.config_path.empty() ? ExperimentConfig{} : load_config_file(o.config_path);
    if (o.seed) c.seed = *o.seed;
    if (o.threads) c.threads = *o.threads;
    if (!o.aggregator.empty())
        c.aggregator = o.aggregator == "opa" ? Aggregator::OPA : Aggregator::FedAvg;
    if (o.bcomm_frac) c.bcomm_fraction = *o.bcomm_frac;
    if (!o.eval.empty()) c.eval = o.eval;
    if (o.fe_rounds) c.fe_rounds = *o.fe_rounds;
    c.finetune.threads = c.threads;
    return c;
}

fs::path resolve_out(const CliOverrides& o) {
    if (!o.out.empty()) return o.out;
    if (const char* env = std::getenv("FEDORAS_SIM_OUT")) return env;
    return "fedoras-out";
}

/// Everything derived deterministically from the config before any
/// federated stage runs.
struct Pipeline {
    ExperimentConfig cfg;
    SearchSpace space;
    Dataset ds;
    Split split;
    std::vector<ClientShard> clients;
    std::vector<std::vector<int>> client_val;
    TierSpec tiers;
    std::int64_t b_comm = 0;
};

Pipeline build_pipeline(const ExperimentConfig& cfg) {
    Pipeline p;
    p.cfg = cfg;
    p.space = build_space(cfg.space);
    p.ds = gen_synthetic(cfg.space.classes, cfg.samples, cfg.noise,
                         mix_seed(cfg.seed, 0xda7a), cfg.space.input_channels,
                         cfg.space.input_spatial);
    {
        Rng rng(mix_seed(cfg.seed, 0x5917));
        p.split = holdout_split(p.ds, cfg.val_fraction, cfg.test_fraction, rng);
    }
    {
        Dataset train_view;  // lda_partition works on a dataset, so narrow it
        train_view.classes = p.ds.classes;
        for (int idx : p.split.train) {
            train_view.inputs.push_back(p.ds.inputs[static_cast<std::size_t>(idx)]);
            train_view.labels.push_back(p.ds.labels[static_cast<std::size_t>(idx)]);
        }
        Rng rng(mix_seed(cfg.seed, 0x1da));
        p.clients = lda_partition(train_view, cfg.clients, cfg.alpha, rng);
        for (auto& c : p.clients)
            for (int& idx : c.indices) idx = p.split.train[static_cast<std::size_t>(idx)];
    }
    {
        Rng rng(mix_seed(cfg.seed, 0x71e5));
        std::vector<double> fracs(static_cast<std::size_t>(cfg.num_tiers),
                                  1.0 / cfg.num_tiers);
        p.tiers = tier_boundaries(p.space, cfg.num_tiers, cfg.rho_l, cfg.rho_h,
                                  cfg.tier_samples, rng, fracs);
        assign_tiers(p.clients, p.tiers.client_fractions, rng);
    }
    {
        Rng rng(mix_seed(cfg.seed, 0xc11a));
        p.client_val = uniform_index_partition(p.split.val, cfg.clients, rng);
    }
    p.b_comm = static_cast<std::int64_t>(
        std::llround(cfg.bcomm_fraction * static_cast<double>(p.space.searchable_params)));
    const std::int64_t min_b = min_feasible_subspace_params(p.space);
    if (p.b_comm <= min_b) p.b_comm = min_b + 1;
    return p;
}

void write_run_preamble(const fs::path& out, const ExperimentConfig& cfg) {
    fs::create_directories(out);
    write_text_file((out / "config.json").string(), config_to_json(cfg).dump(2) + "\n");
    write_text_file((out / "seed.txt").string(), std::to_string(cfg.seed) + "\n");
}

std::string clients_csv(const Pipeline& p) {
    std::string out = "# clients v1\nclient_id,tier,shard_size,label_histogram\n";
    for (const auto& c : p.clients) {
        std::vector<int> hist(static_cast<std::size_t>(p.ds.classes), 0);
        for (int idx : c.indices) ++hist[static_cast<std::size_t>(p.ds.labels[static_cast<std::size_t>(idx)])];
        std::string h;
        for (std::size_t i = 0; i < hist.size(); ++i) {
            if (i) h += ';';
            h += std::to_string(hist[i]);
        }
        out += std::to_string(c.client_id) + ',' + std::to_string(c.tier) + ',' +
               std::to_string(c.indices.size()) + ',' + h + '\n';
    }
    return out;
}

Stage1Result run_stage1(const Pipeline& p) {
    Stage1Cfg s1;
    s1.rounds = p.cfg.rounds;
    s1.probe_interval = p.cfg.probe_interval;
    s1.round.clients_per_round = p.cfg.clients_per_round;
    s1.round.b_comm = p.b_comm;
    s1.round.aggregator = p.cfg.aggregator;
    s1.round.local = p.cfg.local;
    s1.round.per_client_subspace = !p.cfg.shared_subspace;
    s1.round.threads = p.cfg.threads;
    Supernet net = init_supernet(p.space, mix_seed(p.cfg.seed, 0x5a9e));
    return train_supernet(p.space, p.clients, p.ds, p.split.val, p.tiers, s1,
                          mix_seed(p.cfg.seed, 0x57a1), std::move(net));
}

struct SearchOutputs {
    std::vector<SearchResult> per_tier;
    std::vector<double> fidelity;  // Kendall tau vs ground-truth metric, per tier
};

SearchOutputs run_stage2(const Pipeline& p, const Supernet& net, const fs::path& out) {
    SearchOutputs so;
    for (int t = 0; t < p.tiers.num_tiers(); ++t) {
        Rng rng(mix_seed(p.cfg.seed, 0x5ea9, static_cast<std::uint64_t>(t)));
        Nsga2Cfg nc;
        nc.iterations = p.cfg.search_iterations;
        nc.population = p.cfg.population;
        nc.sample = p.cfg.sample_size;
        BatchEval eval;
        std::shared_ptr<std::int64_t> fed_cost;
        if (p.cfg.eval == "central") {
            eval = make_centralized_eval(p.space, net, p.ds, p.split.val, p.cfg.threads);
        } else {
            fed_cost = std::make_shared<std::int64_t>(0);
            auto fed_rng = std::make_shared<Rng>(
                mix_seed(p.cfg.seed, 0xfede, static_cast<std::uint64_t>(t)));
            FedEvalCfg fc{p.cfg.fe_rounds, p.cfg.fe_clients_per_round, p.cfg.threads};
            eval = [&, fed_cost, fed_rng, fc](const std::vector<Path>& paths) {
                FedEvalResult r = evaluate_federated(p.space, net, paths, p.clients,
                                                     p.client_val, p.ds, p.tiers, fc, *fed_rng);
                *fed_cost += r.comm_cost;
                return r.metrics;
            };
            nc.comm_cost_probe = [fed_cost] { return *fed_cost; };
        }
        SearchResult res = nsga2_search(p.space, t, p.tiers, eval, nc, rng);

        // fidelity: does the search metric rank paths like held-out accuracy?
        {
            std::vector<Path> front_paths;
            std::vector<double> proxy;
            for (const auto& ind : res.front) {
                front_paths.push_back(ind.path);
                proxy.push_back(ind.metric);
            }
            if (front_paths.size() >= 2) {
                BatchEval truth =
                    make_centralized_eval(p.space, net, p.ds, p.split.test, p.cfg.threads);
                so.fidelity.push_back(kendall_tau(proxy, truth(front_paths)));
            } else {
                so.fidelity.push_back(std::numeric_limits<double>::quiet_NaN());
            }
        }
        write_text_file((out / ("search_tier" + std::to_string(t) + ".csv")).string(),
                        search_csv(res.trace));
        so.per_tier.push_back(std::move(res));
    }
    return so;
}

json finetune_all(const Pipeline& p, const Supernet& net, const SearchOutputs& so,
                  const fs::path& out) {
    json tiers = json::array();
    std::string csv = "# finetune v1\ntier,round,lr,mean_loss,train_flops\n";
    for (int t = 0; t < p.tiers.num_tiers(); ++t) {
        const SearchResult& res = so.per_tier[static_cast<std::size_t>(t)];
        TierModel model;
        model.tier = t;
        model.path = res.best.path;
        model.provenance = "supernet-init";
        model.params = extract_model(p.space, net, model.path);
        FinetuneHistory hist = finetune_tier(p.space, model, p.clients, p.ds, p.cfg.finetune,
                                             mix_seed(p.cfg.seed, 0xf7, static_cast<std::uint64_t>(t)));
        FinetuneHistory per = hist;
        std::string tier_csv = finetune_csv(t, per);
        csv += tier_csv.substr(tier_csv.find('\n', tier_csv.find('\n') + 1) + 1);
        const double val_acc = model_accuracy(p.space, model, p.ds, p.split.val);
        const double test_acc = model_accuracy(p.space, model, p.ds, p.split.test);
        save_model((out / ("model_tier" + std::to_string(t))).string(), p.space, model);
        tiers.push_back({{"tier", t},
                         {"path", model.path.choices},
                         {"flops", res.best.flops},
                         {"params", cost_of_path(p.space, model.path).params},
                         {"supernet_metric", res.best.metric},
                         {"val_accuracy", val_acc},
                         {"test_accuracy", test_acc},
                         {"finetune_flops", hist.total_train_flops}});
    }
    write_text_file((out / "finetune.csv").string(), csv);
    return tiers;
}

int run_report(const fs::path& out) {
    const fs::path sj = out / "summary.json";
    if (!fs::exists(sj)) {
        std::cerr << "report: no summary.json under " << out << "\n";
        return 1;
    }
    json s = json::parse(read_text_file(sj.string()));
    std::cout << "run " << out.string() << " (seed " << s.value("seed", 0) << ", stage "
              << s.value("stage", "?") << ")\n";
    if (s.contains("supernet"))
        std::cout << "  supernet: " << s["supernet"]["rounds"].get<int>() << " rounds, final loss "
                  << s["supernet"]["final_loss"].get<double>() << ", train GFLOP "
                  << s["supernet"]["train_flops"].get<double>() / 1e9 << "\n";
    if (s.contains("tiers"))
        for (const auto& t : s["tiers"]) {
            std::cout << "  tier " << t["tier"].get<int>() << ": flops " << t["flops"].get<std::int64_t>();
            if (t.contains("test_accuracy"))
                std::cout << ", test acc " << t["test_accuracy"].get<double>();
            else
                std::cout << ", supernet metric " << t["supernet_metric"].get<double>();
            std::cout << "\n";
        }
    if (s.contains("fidelity")) {
        std::cout << "  rank fidelity (tau):";
        for (const auto& f : s["fidelity"]) std::cout << ' ' << f.get<double>();
        std::cout << "\n";
    }
    return 0;
}

json supernet_summary(const Stage1Result& s1) {
    double final_loss = 0.0;
    std::int64_t flops = 0;
    for (const auto& r : s1.history) flops += r.train_flops;
    if (!s1.history.empty()) final_loss = s1.history.back().mean_client_loss;
    return {{"rounds", s1.history.size()}, {"final_loss", final_loss}, {"train_flops", flops}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic federated architecture-search simulator"};
    app.require_subcommand(1);

    CliOverrides o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "experiment config JSON");
        sub->add_option("--seed", o.seed, "master seed (overrides config)");
        sub->add_option("--threads", o.threads, "worker threads (overrides config)");
        sub->add_option("--out", o.out, "run directory (default $FEDORAS_SIM_OUT or ./fedoras-out)");
    };
    auto add_train_flags = [&](CLI::App* sub) {
        sub->add_option("--aggregator", o.aggregator, "opa|fedavg")
            ->check(CLI::IsMember({"opa", "fedavg"}));
        sub->add_option("--bcomm-frac", o.bcomm_frac,
                        "download budget as a fraction of searchable params")
            ->check(CLI::Range(0.0, 1.0));
    };
    auto add_search_flags = [&](CLI::App* sub) {
        sub->add_option("--eval", o.eval, "central|federated")
            ->check(CLI::IsMember({"central", "federated"}));
        sub->add_option("--fe-rounds", o.fe_rounds, "federated-evaluation rounds per batch");
    };

    CLI::App* c_part = app.add_subcommand("partition", "generate data and client shards");
    CLI::App* c_train = app.add_subcommand("train-supernet", "stage 1: federated supernet training");
    CLI::App* c_search = app.add_subcommand("search", "stages 1-2: supernet + per-tier search");
    CLI::App* c_ft = app.add_subcommand("finetune", "stages 1-3: full pipeline to tier models");
    CLI::App* c_e2e = app.add_subcommand("e2e", "alias for the full pipeline");
    CLI::App* c_report = app.add_subcommand("report", "summarize an existing run directory");
    for (auto* sub : {c_part, c_train, c_search, c_ft, c_e2e}) add_common(sub);
    for (auto* sub : {c_train, c_search, c_ft, c_e2e}) add_train_flags(sub);
    for (auto* sub : {c_search, c_ft, c_e2e}) add_search_flags(sub);
    c_report->add_option("--out", o.out, "run directory to read");

    CLI11_PARSE(app, argc, argv);
    const std::string cmd = app.get_subcommands().front()->get_name();
    const fs::path out = resolve_out(o);

    if (cmd == "report") return run_report(out);

    try {
        const ExperimentConfig cfg = resolve_config(o);
        write_run_preamble(out, cfg);
        Pipeline p = build_pipeline(cfg);
        write_text_file((out / "clients.csv").string(), clients_csv(p));

        json summary = {{"seed", cfg.seed}, {"stage", cmd}, {"b_comm", p.b_comm}};
        {
            json edges = json::array();
            for (auto e : p.tiers.edges) edges.push_back(e);
            summary["tier_edges"] = edges;
        }

        if (cmd != "partition") {
            Stage1Result s1 = run_stage1(p);
            write_text_file((out / "rounds.csv").string(), round_csv(s1.history));
            summary["supernet"] = supernet_summary(s1);

            if (cmd != "train-supernet") {
                SearchOutputs so = run_stage2(p, s1.net, out);
                summary["fidelity"] = so.fidelity;
                if (cmd == "search") {
                    json tiers = json::array();
                    for (int t = 0; t < p.tiers.num_tiers(); ++t) {
                        const auto& best = so.per_tier[static_cast<std::size_t>(t)].best;
                        tiers.push_back({{"tier", t},
                                         {"path", best.path.choices},
                                         {"flops", best.flops},
                                         {"supernet_metric", best.metric}});
                    }
                    summary["tiers"] = tiers;
                } else {
                    summary["tiers"] = finetune_all(p, s1.net, so, out);
                }
            }
        }

        write_text_file((out / "summary.json").string(), summary.dump(2) + "\n");
        std::cout << "wrote " << out.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::error_code ec;
        fs::create_directories(out, ec);
        std::ofstream(out / "FAILED") << e.what() << "\n";
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
