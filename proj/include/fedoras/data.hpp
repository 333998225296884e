#pragma once

#include <string>
#include <vector>

#include "fedoras/rng.hpp"
#include "fedoras/tensor.hpp"

namespace fedoras {

struct Dataset {
    std::vector<Tensor> inputs;  // per-sample [C,H,W]
    std::vector<int> labels;
    int classes = 0;

    int size() const { return static_cast<int>(inputs.size()); }
};

struct ClientShard {
    int client_id = 0;
    std::vector<int> indices;  // into the parent dataset
    int tier = 0;
};

/// Class-conditional Gaussian-blob images: one fixed spatial template per
/// class plus iid noise. Balanced classes, deterministic per seed.
Dataset gen_synthetic(int classes, int n, double noise, std::uint64_t seed,
                      int channels = 1, int spatial = 8);

/// Dirichlet(alpha) non-IID partition into approximately equisized shards.
std::vector<ClientShard> lda_partition(const Dataset& ds, int num_clients, double alpha, Rng& rng);

/// Same partitioner over an arbitrary index list (used for per-client
/// validation shards).
std::vector<std::vector<int>> uniform_index_partition(const std::vector<int>& indices,
                                                      int num_parts, Rng& rng);

void assign_tiers(std::vector<ClientShard>& shards, const std::vector<double>& tier_fractions,
                  Rng& rng);

/// Exact largest-remainder rounding of fractions*total.
std::vector<int> largest_remainder_counts(const std::vector<double>& fractions, int total);

struct Split {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
};
/// Stratified by class, disjoint, deterministic per rng state.
Split holdout_split(const Dataset& ds, double val_fraction, double test_fraction, Rng& rng);

/// Binary import: directory with manifest.json listing per-class tensor
/// files (4 x u32 little-endian shape header, then row-major float64).
Dataset load_dataset_dir(const std::string& dir);
void save_dataset_dir(const Dataset& ds, const std::string& dir);

}  // namespace fedoras
