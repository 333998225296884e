#pragma once

#include <string>

#include "fedoras/fedcore.hpp"
#include "fedoras/finetune.hpp"
#include "fedoras/space.hpp"

#include <json.hpp>

namespace fedoras {

struct ExperimentConfig {
    SpaceConfig space;

    // data
    int samples = 4000;
    double noise = 0.35;
    double alpha = 1.0;          // Dirichlet concentration for the label skew
    int clients = 20;
    double val_fraction = 0.1;   // server-held validation split
    double test_fraction = 0.1;

    // tiers
    int num_tiers = 4;
    double rho_l = 0.05;
    double rho_h = 0.8;
    int tier_samples = 20000;

    // supernet stage
    int rounds = 40;
    int clients_per_round = 8;
    double bcomm_fraction = 0.5;  // subspace budget as a fraction of searchable params
    Aggregator aggregator = Aggregator::OPA;
    bool shared_subspace = true;
    LocalCfg local;
    int probe_interval = 10;

    // search stage
    int search_iterations = 12;
    int population = 128;
    int sample_size = 64;
    std::string eval = "central";  // "central" | "federated"
    int fe_rounds = 2;
    int fe_clients_per_round = 8;

    // fine-tune stage
    FinetuneCfg finetune;

    int threads = 1;
    std::uint64_t seed = 1;
};

/// Parses and validates a config JSON. Unknown keys and out-of-range values
/// raise ContractError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);

/// Normalized round-trip form (all fields explicit), suitable for writing
/// into a run directory.
nlohmann::json config_to_json(const ExperimentConfig& c);

}  // namespace fedoras
