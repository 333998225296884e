#include "fedoras/config.hpp"

#include <fstream>
#include <set>

namespace fedoras {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& field, const std::string& why) {
    throw ContractError("config: " + field + ": " + why);
}

void check_keys(const json& j, const std::string& prefix, const std::set<std::string>& allowed) {
    if (!j.is_object()) bad(prefix.empty() ? "<root>" : prefix, "expected an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) bad(prefix + k, "unknown key");
}

template <typename T>
void get_num(const json& j, const std::string& prefix, const char* key, T& out, double lo,
             double hi) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number()) bad(prefix + key, "expected a number");
    const double d = v.get<double>();
    if (d < lo || d > hi)
        bad(prefix + key, "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    if constexpr (std::is_integral_v<T>) {
        if (d != std::floor(d)) bad(prefix + key, "expected an integer");
        out = static_cast<T>(d);
    } else {
        out = static_cast<T>(d);
    }
}

void get_bool(const json& j, const std::string& prefix, const char* key, bool& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_boolean()) bad(prefix + key, "expected a boolean");
    out = j.at(key).get<bool>();
}

void parse_space(const json& j, SpaceConfig& s) {
    check_keys(j, "space.",
               {"input_channels", "input_spatial", "classes", "stem_channels", "blocks",
                "layers_per_block", "reduction_channel_mult", "candidates", "layer_overrides"});
    get_num(j, "space.", "input_channels", s.input_channels, 1, 64);
    get_num(j, "space.", "input_spatial", s.input_spatial, 2, 64);
    get_num(j, "space.", "classes", s.classes, 2, 64);
    get_num(j, "space.", "stem_channels", s.stem_channels, 1, 256);
    get_num(j, "space.", "blocks", s.blocks, 1, 8);
    get_num(j, "space.", "layers_per_block", s.layers_per_block, 1, 8);
    get_num(j, "space.", "reduction_channel_mult", s.reduction_channel_mult, 1.0, 4.0);
    auto parse_cands = [](const json& arr, const std::string& field) {
        if (!arr.is_array() || arr.empty()) bad(field, "expected a non-empty array of op names");
        std::vector<std::string> out;
        for (const auto& e : arr) {
            if (!e.is_string()) bad(field, "expected strings");
            parse_op_name(e.get<std::string>());  // validates
            out.push_back(e.get<std::string>());
        }
        return out;
    };
    if (j.contains("candidates")) s.candidates = parse_cands(j.at("candidates"), "space.candidates");
    if (j.contains("layer_overrides")) {
        const auto& o = j.at("layer_overrides");
        if (!o.is_object()) bad("space.layer_overrides", "expected an object keyed by layer index");
        for (const auto& [k, v] : o.items()) {
            int idx;
            try {
                idx = std::stoi(k);
            } catch (...) {
                bad("space.layer_overrides." + k, "key is not a layer index");
            }
            s.layer_overrides[idx] = parse_cands(v, "space.layer_overrides." + k);
        }
    }
}

void parse_local(const json& j, const std::string& prefix, LocalCfg& l) {
    check_keys(j, prefix, {"epochs", "batch_size", "lr", "momentum", "clip_norm"});
    get_num(j, prefix, "epochs", l.epochs, 1, 100);
    get_num(j, prefix, "batch_size", l.batch_size, 1, 4096);
    get_num(j, prefix, "lr", l.lr, 1e-8, 10.0);
    get_num(j, prefix, "momentum", l.momentum, 0.0, 0.999);
    // 0 disables clipping
    double clip = l.clip_norm.value_or(0.0);
    get_num(j, prefix, "clip_norm", clip, 0.0, 1e6);
    l.clip_norm = clip > 0.0 ? std::optional<double>(clip) : std::nullopt;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    check_keys(j, "",
               {"space",        "data",      "tiers",    "supernet", "search",
                "finetune",     "threads",   "seed"});
    if (j.contains("space")) parse_space(j.at("space"), c.space);
    if (j.contains("data")) {
        const auto& d = j.at("data");
        check_keys(d, "data.",
                   {"samples", "noise", "alpha", "clients", "val_fraction", "test_fraction"});
        get_num(d, "data.", "samples", c.samples, 32, 1000000);
        get_num(d, "data.", "noise", c.noise, 0.0, 5.0);
        get_num(d, "data.", "alpha", c.alpha, 1e-3, 1e6);
        get_num(d, "data.", "clients", c.clients, 2, 10000);
        get_num(d, "data.", "val_fraction", c.val_fraction, 0.0, 0.45);
        get_num(d, "data.", "test_fraction", c.test_fraction, 0.0, 0.45);
        if (c.val_fraction + c.test_fraction > 0.9)
            bad("data.val_fraction", "val + test fractions leave no training data");
    }
    if (j.contains("tiers")) {
        const auto& t = j.at("tiers");
        check_keys(t, "tiers.", {"count", "rho_l", "rho_h", "samples"});
        get_num(t, "tiers.", "count", c.num_tiers, 1, 16);
        get_num(t, "tiers.", "rho_l", c.rho_l, 0.0, 1.0);
        get_num(t, "tiers.", "rho_h", c.rho_h, 0.0, 0.999);
        get_num(t, "tiers.", "samples", c.tier_samples, 1000, 10000000);
        if (c.rho_l >= c.rho_h) bad("tiers.rho_l", "must be < rho_h");
    }
    if (j.contains("supernet")) {
        const auto& s = j.at("supernet");
        check_keys(s, "supernet.",
                   {"rounds", "clients_per_round", "bcomm_fraction", "aggregator",
                    "shared_subspace", "local", "probe_interval"});
        get_num(s, "supernet.", "rounds", c.rounds, 0, 100000);
        get_num(s, "supernet.", "clients_per_round", c.clients_per_round, 1, 10000);
        get_num(s, "supernet.", "bcomm_fraction", c.bcomm_fraction, 0.0, 1.0);
        get_num(s, "supernet.", "probe_interval", c.probe_interval, 1, 100000);
        get_bool(s, "supernet.", "shared_subspace", c.shared_subspace);
        if (s.contains("aggregator")) {
            const std::string a = s.at("aggregator").get<std::string>();
            if (a == "opa")
                c.aggregator = Aggregator::OPA;
            else if (a == "fedavg")
                c.aggregator = Aggregator::FedAvg;
            else
                bad("supernet.aggregator", "expected \"opa\" or \"fedavg\"");
        }
        if (s.contains("local")) parse_local(s.at("local"), "supernet.local.", c.local);
    }
    if (j.contains("search")) {
        const auto& s = j.at("search");
        check_keys(s, "search.",
                   {"iterations", "population", "sample_size", "eval", "fe_rounds",
                    "fe_clients_per_round"});
        get_num(s, "search.", "iterations", c.search_iterations, 1, 100000);
        get_num(s, "search.", "population", c.population, 4, 100000);
        get_num(s, "search.", "sample_size", c.sample_size, 2, 100000);
        get_num(s, "search.", "fe_rounds", c.fe_rounds, 1, 1000);
        get_num(s, "search.", "fe_clients_per_round", c.fe_clients_per_round, 1, 10000);
        if (s.contains("eval")) {
            c.eval = s.at("eval").get<std::string>();
            if (c.eval != "central" && c.eval != "federated")
                bad("search.eval", "expected \"central\" or \"federated\"");
        }
        if (c.sample_size > c.population) bad("search.sample_size", "must be <= population");
    }
    if (j.contains("finetune")) {
        const auto& f = j.at("finetune");
        check_keys(f, "finetune.", {"rounds", "clients_per_round", "schedule", "local"});
        get_num(f, "finetune.", "rounds", c.finetune.rounds, 0, 100000);
        get_num(f, "finetune.", "clients_per_round", c.finetune.clients_per_round, 1, 10000);
        if (f.contains("schedule")) {
            const std::string s = f.at("schedule").get<std::string>();
            if (s == "constant")
                c.finetune.schedule = LrSchedule::Constant;
            else if (s == "cosine")
                c.finetune.schedule = LrSchedule::Cosine;
            else if (s == "step")
                c.finetune.schedule = LrSchedule::Step;
            else
                bad("finetune.schedule", "expected \"constant\", \"cosine\" or \"step\"");
        }
        if (f.contains("local")) parse_local(f.at("local"), "finetune.local.", c.finetune.local);
    }
    get_num(j, "", "threads", c.threads, 1, 256);
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) bad("seed", "expected a non-negative integer");
        c.seed = j.at("seed").get<std::uint64_t>();
    }
    c.finetune.threads = c.threads;
    return c;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ContractError("config: " + path + ": " + e.what());
    }
    return parse_config(j);
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
    json overrides = json::object();
    for (const auto& [k, v] : c.space.layer_overrides) overrides[std::to_string(k)] = v;
    json local = {{"epochs", c.local.epochs},
                  {"batch_size", c.local.batch_size},
                  {"lr", c.local.lr},
                  {"momentum", c.local.momentum},
                  {"clip_norm", c.local.clip_norm.value_or(0.0)}};
    json ft_local = {{"epochs", c.finetune.local.epochs},
                     {"batch_size", c.finetune.local.batch_size},
                     {"lr", c.finetune.local.lr},
                     {"momentum", c.finetune.local.momentum},
                     {"clip_norm", c.finetune.local.clip_norm.value_or(0.0)}};
    const char* sched = c.finetune.schedule == LrSchedule::Constant ? "constant"
                        : c.finetune.schedule == LrSchedule::Cosine ? "cosine"
                                                                    : "step";
    return json{
        {"space",
         {{"input_channels", c.space.input_channels},
          {"input_spatial", c.space.input_spatial},
          {"classes", c.space.classes},
          {"stem_channels", c.space.stem_channels},
          {"blocks", c.space.blocks},
          {"layers_per_block", c.space.layers_per_block},
          {"reduction_channel_mult", c.space.reduction_channel_mult},
          {"candidates", c.space.candidates},
          {"layer_overrides", overrides}}},
        {"data",
         {{"samples", c.samples},
          {"noise", c.noise},
          {"alpha", c.alpha},
          {"clients", c.clients},
          {"val_fraction", c.val_fraction},
          {"test_fraction", c.test_fraction}}},
        {"tiers",
         {{"count", c.num_tiers}, {"rho_l", c.rho_l}, {"rho_h", c.rho_h}, {"samples", c.tier_samples}}},
        {"supernet",
         {{"rounds", c.rounds},
          {"clients_per_round", c.clients_per_round},
          {"bcomm_fraction", c.bcomm_fraction},
          {"aggregator", c.aggregator == Aggregator::OPA ? "opa" : "fedavg"},
          {"shared_subspace", c.shared_subspace},
          {"probe_interval", c.probe_interval},
          {"local", local}}},
        {"search",
         {{"iterations", c.search_iterations},
          {"population", c.population},
          {"sample_size", c.sample_size},
          {"eval", c.eval},
          {"fe_rounds", c.fe_rounds},
          {"fe_clients_per_round", c.fe_clients_per_round}}},
        {"finetune",
         {{"rounds", c.finetune.rounds},
          {"clients_per_round", c.finetune.clients_per_round},
          {"schedule", sched},
          {"local", ft_local}}},
        {"threads", c.threads},
        {"seed", c.seed},
    };
}

}  // namespace fedoras
