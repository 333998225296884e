#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedoras/kernels.hpp"
#include "fedoras/rng.hpp"

namespace fedoras {

struct SpaceConfig {
    int input_channels = 1;
    int input_spatial = 8;
    int classes = 4;
    int stem_channels = 8;
    int blocks = 2;
    int layers_per_block = 2;
    double reduction_channel_mult = 1.5;
    /// Candidate operator names applied to every layer unless overridden.
    std::vector<std::string> candidates = {"identity", "conv1x1",   "conv3x3",
                                           "dwsep3_e0.5", "dwsep3_e1", "dwsep3_e2"};
    /// Per-layer candidate overrides, keyed by flattened layer index.
    std::map<int, std::vector<std::string>> layer_overrides;
};

OperatorKind parse_op_name(const std::string& name);
std::vector<std::string> known_op_names();

enum class SlotKind { Stem, Searchable, Reduction, GlobalPool, Classifier };

/// One position in the network's slot plan. Searchable slots reference a
/// layer; the rest carry a fixed operator.
struct Slot {
    SlotKind kind;
    int layer_index = -1;   // for Searchable
    OperatorKind fixed_op;  // for Stem/Reduction/Classifier
    std::vector<int> in_shape;   // [C,H,W] (or [F] for classifier)
    std::vector<int> out_shape;
};

struct LayerSpec {
    std::vector<OperatorKind> candidates;
    bool mandatory = false;  // no Identity among candidates
    std::vector<int> in_shape;
    std::vector<OpCost> costs;  // per candidate
};

struct SearchSpace {
    SpaceConfig config;
    std::vector<Slot> slots;
    std::vector<LayerSpec> layers;  // flattened searchable layers, size L
    std::int64_t fixed_params = 0;  // stem/reductions/classifier/per-layer norms
    std::int64_t fixed_flops = 0;
    std::int64_t searchable_params = 0;  // sum over all candidates

    int num_layers() const { return static_cast<int>(layers.size()); }
};

/// One candidate index per searchable layer.
struct Path {
    std::vector<int> choices;

    bool operator==(const Path&) const = default;
    auto operator<=>(const Path&) const = default;
};

/// Per-layer candidate mask plus the parameter size of the selection
/// (searchable entries only).
struct Subspace {
    std::vector<std::vector<char>> mask;  // [layer][cand]
    std::int64_t param_size = 0;

    bool contains(int layer, int cand) const {
        return mask[static_cast<std::size_t>(layer)][static_cast<std::size_t>(cand)] != 0;
    }
};

/// Half-open FLOPs intervals (edges[i], edges[i+1]] covering the whole path
/// FLOPs range; tier 0's interval includes its lower edge.
struct TierSpec {
    std::vector<std::int64_t> edges;  // num_tiers + 1 values, strictly increasing
    std::vector<double> client_fractions;

    int num_tiers() const { return static_cast<int>(edges.size()) - 1; }
    int tier_of(std::int64_t flops) const;
    /// Strict upper budget usable with the samplers' `< budget` rule, sized
    /// so every path inside the tier interval qualifies.
    std::int64_t budget(int tier) const { return edges[static_cast<std::size_t>(tier) + 1] + 1; }
    bool in_tier(int tier, std::int64_t flops) const;
};

SearchSpace build_space(const SpaceConfig& config);

struct PathCost {
    std::int64_t params;
    std::int64_t flops;
};
PathCost cost_of_path(const SearchSpace& space, const Path& path);

std::int64_t min_path_flops(const SearchSpace& space);
std::int64_t max_path_flops(const SearchSpace& space);

TierSpec tier_boundaries(const SearchSpace& space, int num_tiers, double rho_l, double rho_h,
                         int sample_n, Rng& rng, std::vector<double> client_fractions = {});

Subspace full_subspace(const SearchSpace& space);
std::int64_t min_feasible_subspace_params(const SearchSpace& space);
Subspace sample_subspace(const SearchSpace& space, std::int64_t b_comm, Rng& rng);

Path sample_path_rejection(const SearchSpace& space, const Subspace& sub, std::int64_t budget,
                           Rng& rng, int max_rejections = 10000);
Path sample_path_greedy(const SearchSpace& space, const Subspace& sub, std::int64_t budget,
                        Rng& rng);
/// Uniform over the (unconstrained) full space, one candidate per layer.
Path sample_path_uniform(const SearchSpace& space, Rng& rng);

// ---- parameters -----------------------------------------------------------

/// Global parameter store: one ParamSet per (layer, candidate), per-layer
/// post-op affine norms, and fixed slot parameters.
struct Supernet {
    std::vector<std::vector<ParamSet>> searchable;  // [layer][cand]
    std::vector<ParamSet> post;                     // [layer] affine scale/bias
    std::vector<ParamSet> fixed;                    // indexed by slot, empty for searchable slots
    std::int64_t total_param_count = 0;
};

Supernet init_supernet(const SearchSpace& space, std::uint64_t seed);

/// Standalone model: the chosen candidates' parameters plus copies of all
/// fixed components. Training an extract never touches the supernet.
struct ModelParams {
    std::vector<ParamSet> layer;  // size L, the chosen candidate's params
    std::vector<ParamSet> post;   // size L
    std::vector<ParamSet> fixed;  // per slot
};

ModelParams extract_model(const SearchSpace& space, const Supernet& net, const Path& path);
ModelParams init_model(const SearchSpace& space, const Path& path, std::uint64_t seed);
std::int64_t model_param_count(const ModelParams& m);

/// Borrowed view of the parameters a single path runs through; works for
/// both a Supernet and an extracted ModelParams.
struct PathParams {
    std::vector<ParamSet*> layer;
    std::vector<ParamSet*> post;
    std::vector<ParamSet*> fixed;  // per slot index (nullptr for searchable slots)
};

PathParams bind_path(const SearchSpace& space, Supernet& net, const Path& path);
PathParams bind_model(const SearchSpace& space, ModelParams& m);

/// All parameters in a PathParams as a flat list (for sgd_step).
std::vector<Parameter*> flatten(const PathParams& pp);

}  // namespace fedoras
