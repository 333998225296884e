#include "fedoras/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fedoras {

using nlohmann::json;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // take the shortest representation that round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char cand[40];
        std::snprintf(cand, sizeof cand, "%.*g", prec, v);
        double back;
        std::sscanf(cand, "%lf", &back);
        if (back == v) return cand;
    }
    return buf;
}

std::string path_to_string(const Path& p) {
    std::string out;
    for (std::size_t i = 0; i < p.choices.size(); ++i) {
        if (i) out += '-';
        out += std::to_string(p.choices[i]);
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ContractError("io: cannot write " + path);
    out << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractError("io: cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string round_csv(const std::vector<RoundReport>& rows) {
    std::string out = "# rounds v1\nround,participants,bytes_down,bytes_up,mean_client_loss,"
                      "train_flops,probe_accuracy\n";
    for (const auto& r : rows) {
        std::string probe;
        for (std::size_t i = 0; i < r.probe_accuracy.size(); ++i) {
            if (i) probe += ';';
            probe += fmt_double(r.probe_accuracy[i]);
        }
        out += std::to_string(r.round) + ',' + std::to_string(r.participants.size()) + ',' +
               std::to_string(r.bytes_down) + ',' + std::to_string(r.bytes_up) + ',' +
               fmt_double(r.mean_client_loss) + ',' + std::to_string(r.train_flops) + ',' +
               probe + '\n';
    }
    return out;
}

std::string search_csv(const std::vector<SearchTraceRow>& rows) {
    std::string out = "# search v1\niteration,best_metric,front_size,union_params,cum_comm_cost\n";
    for (const auto& r : rows)
        out += std::to_string(r.iteration) + ',' + fmt_double(r.best_metric) + ',' +
               std::to_string(r.front_size) + ',' + std::to_string(r.union_params) + ',' +
               std::to_string(r.cum_comm_cost) + '\n';
    return out;
}

std::string finetune_csv(int tier, const FinetuneHistory& hist) {
    std::string out = "# finetune v1\ntier,round,lr,mean_loss,train_flops\n";
    for (const auto& r : hist.rows)
        out += std::to_string(tier) + ',' + std::to_string(r.round) + ',' + fmt_double(r.lr) +
               ',' + fmt_double(r.mean_loss) + ',' + std::to_string(r.train_flops) + '\n';
    return out;
}

std::uint64_t space_digest(const SearchSpace& space) {
    std::uint64_t h = 0x9e3779b97f4a7c15ull;
    auto mix = [&](std::uint64_t v) { h = mix64(h ^ v); };
    mix(static_cast<std::uint64_t>(space.config.input_channels));
    mix(static_cast<std::uint64_t>(space.config.input_spatial));
    mix(static_cast<std::uint64_t>(space.config.classes));
    mix(static_cast<std::uint64_t>(space.config.stem_channels));
    mix(static_cast<std::uint64_t>(space.config.blocks));
    mix(static_cast<std::uint64_t>(space.config.layers_per_block));
    for (const auto& layer : space.layers)
        for (const auto& cand : layer.candidates) {
            mix(static_cast<std::uint64_t>(cand.type));
            mix(static_cast<std::uint64_t>(cand.out));
            mix(static_cast<std::uint64_t>(cand.kernel));
            mix(static_cast<std::uint64_t>(cand.expansion * 16));
        }
    mix(static_cast<std::uint64_t>(space.fixed_params));
    mix(static_cast<std::uint64_t>(space.searchable_params));
    return h;
}

namespace {

void collect(const ModelParams& m, std::vector<const Parameter*>& out) {
    for (const auto* group : {&m.layer, &m.post, &m.fixed})
        for (const auto& ps : *group)
            for (const auto& p : ps) out.push_back(&p);
}

void collect_mut(ModelParams& m, std::vector<Parameter*>& out) {
    for (auto* group : {&m.layer, &m.post, &m.fixed})
        for (auto& ps : *group)
            for (auto& p : ps) out.push_back(&p);
}

void write_le_doubles(std::ofstream& out, const std::vector<double>& v) {
    static_assert(sizeof(double) == 8);
    for (double d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        out.write(reinterpret_cast<const char*>(b), 8);
    }
}

void read_le_doubles(std::ifstream& in, std::vector<double>& v) {
    for (double& d : v) {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        if (!in) throw ContractError("io: model blob truncated");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        std::memcpy(&d, &bits, 8);
    }
}

}  // namespace

void save_model(const std::string& stem, const SearchSpace& space, const TierModel& model) {
    std::vector<const Parameter*> params;
    collect(model.params, params);
    json shapes = json::array();
    for (const auto* p : params) shapes.push_back(p->value.shape);
    json manifest = {
        {"format", "fedoras-model-v1"},
        {"space_digest", space_digest(space)},
        {"tier", model.tier},
        {"path", model.path.choices},
        {"provenance", model.provenance},
        {"tensor_shapes", shapes},
    };
    write_text_file(stem + ".json", manifest.dump(2) + "\n");
    std::ofstream bin(stem + ".bin", std::ios::binary);
    if (!bin) throw ContractError("io: cannot write " + stem + ".bin");
    for (const auto* p : params) write_le_doubles(bin, p->value.data);
}

TierModel load_model(const std::string& stem, const SearchSpace& space) {
    json manifest = json::parse(read_text_file(stem + ".json"));
    if (manifest.value("format", "") != "fedoras-model-v1")
        throw ContractError("io: " + stem + ".json: unknown model format");
    if (manifest.at("space_digest").get<std::uint64_t>() != space_digest(space))
        throw ContractError("io: " + stem + ": model was saved for a different space");
    TierModel model;
    model.tier = manifest.at("tier").get<int>();
    model.path.choices = manifest.at("path").get<std::vector<int>>();
    model.provenance = manifest.value("provenance", "");
    model.params = init_model(space, model.path, 0);
    std::vector<Parameter*> params;
    collect_mut(model.params, params);
    const auto shapes = manifest.at("tensor_shapes");
    if (shapes.size() != params.size())
        throw ContractError("io: " + stem + ": tensor count mismatch");
    std::ifstream bin(stem + ".bin", std::ios::binary);
    if (!bin) throw ContractError("io: cannot read " + stem + ".bin");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (shapes[i].get<std::vector<int>>() != params[i]->value.shape)
            throw ContractError("io: " + stem + ": tensor shape mismatch at index " +
                                std::to_string(i));
        read_le_doubles(bin, params[i]->value.data);
        params[i]->grad.fill(0.0);
        params[i]->momentum.fill(0.0);
    }
    char extra;
    if (bin.read(&extra, 1)) throw ContractError("io: " + stem + ".bin: trailing bytes");
    return model;
}

}  // namespace fedoras
