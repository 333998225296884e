#include "fedoras/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace fedoras {

namespace fs = std::filesystem;
using nlohmann::json;

Dataset gen_synthetic(int classes, int n, double noise, std::uint64_t seed,
                      int channels, int spatial) {
    if (classes < 2) throw ContractError("gen_synthetic: need >= 2 classes");
    if (n < classes) throw ContractError("gen_synthetic: need n >= classes");

    Rng rng(mix_seed(seed, 0xda7a));
    std::vector<Tensor> templates;
    for (int c = 0; c < classes; ++c) {
        Tensor t({channels, spatial, spatial});
        double sq = 0.0;
        for (double& v : t.data) {
            v = rng.normal();
            sq += v * v;
        }
        const double rms = std::sqrt(sq / static_cast<double>(t.numel()));
        for (double& v : t.data) v /= rms;
        templates.push_back(std::move(t));
    }

    Dataset ds;
    ds.classes = classes;
    const int base = n / classes, extra = n % classes;
    for (int c = 0; c < classes; ++c) {
        const int count = base + (c < extra ? 1 : 0);
        for (int i = 0; i < count; ++i) {
            Tensor x = templates[static_cast<std::size_t>(c)];
            for (double& v : x.data) v += noise * rng.normal();
            ds.inputs.push_back(std::move(x));
            ds.labels.push_back(c);
        }
    }
    // stable shuffle of sample order
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Dataset out;
    out.classes = classes;
    for (int i : perm) {
        out.inputs.push_back(std::move(ds.inputs[static_cast<std::size_t>(i)]));
        out.labels.push_back(ds.labels[static_cast<std::size_t>(i)]);
    }

    // separability guarantee: nearest-template (a linear classifier) must be
    // comfortably above chance for the noise levels the simulator targets
    if (noise <= 0.5) {
        int correct = 0;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = 0.0;
            for (int c = 0; c < classes; ++c) {
                double d = 0.0;
                for (std::size_t j = 0; j < out.inputs[static_cast<std::size_t>(i)].data.size(); ++j) {
                    const double diff = out.inputs[static_cast<std::size_t>(i)].data[j] -
                                        templates[static_cast<std::size_t>(c)].data[j];
                    d += diff * diff;
                }
                if (c == 0 || d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (best == out.labels[static_cast<std::size_t>(i)]) ++correct;
        }
        if (static_cast<double>(correct) / n <= 0.8)
            throw ContractError("gen_synthetic: generated data is not linearly separable enough");
    }
    return out;
}

std::vector<ClientShard> lda_partition(const Dataset& ds, int num_clients, double alpha, Rng& rng) {
    if (alpha <= 0.0) throw ContractError("lda_partition: alpha must be > 0");
    if (num_clients > ds.size() / 10)
        throw ContractError("lda_partition: too many clients for dataset size");

    const int C = ds.classes;
    std::vector<std::vector<int>> pools(static_cast<std::size_t>(C));
    for (int i = 0; i < ds.size(); ++i)
        pools[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])].push_back(i);
    for (auto& p : pools) rng.shuffle(p);

    const int base = ds.size() / num_clients;
    const int extra = ds.size() % num_clients;

    std::vector<ClientShard> shards(static_cast<std::size_t>(num_clients));
    for (int k = 0; k < num_clients; ++k) {
        shards[static_cast<std::size_t>(k)].client_id = k;
        std::vector<double> p(static_cast<std::size_t>(C));
        double total = 0.0;
        for (double& v : p) {
            v = rng.gamma(alpha);
            total += v;
        }
        if (total <= 0.0) p.assign(static_cast<std::size_t>(C), 1.0);
        const int want = base + (k < extra ? 1 : 0);
        for (int i = 0; i < want; ++i) {
            std::vector<double> w = p;
            for (int c = 0; c < C; ++c)
                if (pools[static_cast<std::size_t>(c)].empty()) w[static_cast<std::size_t>(c)] = 0.0;
            double ws = 0.0;
            for (double v : w) ws += v;
            int cls;
            if (ws <= 0.0) {
                cls = -1;
                for (int c = 0; c < C; ++c)
                    if (!pools[static_cast<std::size_t>(c)].empty()) { cls = c; break; }
                if (cls < 0) throw ContractError("lda_partition: pools exhausted early");
            } else {
                cls = rng.discrete(w);
            }
            auto& pool = pools[static_cast<std::size_t>(cls)];
            shards[static_cast<std::size_t>(k)].indices.push_back(pool.back());
            pool.pop_back();
        }
        if (shards[static_cast<std::size_t>(k)].indices.empty())
            throw ContractError("lda_partition: produced an empty shard");
    }
    return shards;
}

std::vector<std::vector<int>> uniform_index_partition(const std::vector<int>& indices,
                                                      int num_parts, Rng& rng) {
    std::vector<int> shuffled = indices;
    rng.shuffle(shuffled);
    std::vector<std::vector<int>> parts(static_cast<std::size_t>(num_parts));
    for (std::size_t i = 0; i < shuffled.size(); ++i)
        parts[i % static_cast<std::size_t>(num_parts)].push_back(shuffled[i]);
    return parts;
}

std::vector<int> largest_remainder_counts(const std::vector<double>& fractions, int total) {
    double fsum = 0.0;
    for (double f : fractions) fsum += f;
    if (std::abs(fsum - 1.0) > 1e-9)
        throw ContractError("tier fractions must sum to 1, got " + std::to_string(fsum));
    std::vector<int> counts(fractions.size());
    std::vector<std::pair<double, std::size_t>> rema;
    int assigned = 0;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        const double exact = fractions[i] * total;
        counts[i] = static_cast<int>(std::floor(exact));
        assigned += counts[i];
        rema.emplace_back(exact - counts[i], i);
    }
    std::stable_sort(rema.begin(), rema.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int i = 0; i < total - assigned; ++i) ++counts[rema[static_cast<std::size_t>(i)].second];
    return counts;
}

void assign_tiers(std::vector<ClientShard>& shards, const std::vector<double>& tier_fractions,
                  Rng& rng) {
    const int n = static_cast<int>(shards.size());
    for (double f : tier_fractions)
        if (f > 0.0 && f * n < 1.0)
            throw ContractError("assign_tiers: a nonzero fraction maps to zero clients");
    std::vector<int> counts = largest_remainder_counts(tier_fractions, n);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    int pos = 0;
    for (std::size_t t = 0; t < counts.size(); ++t)
        for (int i = 0; i < counts[t]; ++i)
            shards[static_cast<std::size_t>(order[static_cast<std::size_t>(pos++)])].tier =
                static_cast<int>(t);
}

Split holdout_split(const Dataset& ds, double val_fraction, double test_fraction, Rng& rng) {
    if (val_fraction <= 0.0 || test_fraction <= 0.0 || val_fraction + test_fraction >= 1.0)
        throw ContractError("holdout_split: fractions must be positive and sum below 1");
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(ds.classes));
    for (int i = 0; i < ds.size(); ++i)
        by_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])].push_back(i);
    Split out;
    for (auto& idx : by_class) {
        rng.shuffle(idx);
        const int nv = static_cast<int>(std::lround(val_fraction * idx.size()));
        const int nt = static_cast<int>(std::lround(test_fraction * idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (static_cast<int>(i) < nv)
                out.val.push_back(idx[i]);
            else if (static_cast<int>(i) < nv + nt)
                out.test.push_back(idx[i]);
            else
                out.train.push_back(idx[i]);
        }
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

// ---- binary import/export -------------------------------------------------

namespace {

void write_u32(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& f) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_dataset_dir(const Dataset& ds, const std::string& dir) {
    fs::create_directories(dir);
    json manifest;
    manifest["classes"] = ds.classes;
    manifest["files"] = json::array();
    for (int c = 0; c < ds.classes; ++c) {
        std::vector<int> idx;
        for (int i = 0; i < ds.size(); ++i)
            if (ds.labels[static_cast<std::size_t>(i)] == c) idx.push_back(i);
        if (idx.empty()) continue;
        const auto& shape = ds.inputs[static_cast<std::size_t>(idx[0])].shape;
        const std::string fname = "class_" + std::to_string(c) + ".bin";
        std::ofstream f(fs::path(dir) / fname, std::ios::binary);
        write_u32(f, static_cast<std::uint32_t>(idx.size()));
        write_u32(f, static_cast<std::uint32_t>(shape[0]));
        write_u32(f, static_cast<std::uint32_t>(shape[1]));
        write_u32(f, static_cast<std::uint32_t>(shape[2]));
        for (int i : idx) {
            const auto& d = ds.inputs[static_cast<std::size_t>(i)].data;
            f.write(reinterpret_cast<const char*>(d.data()),
                    static_cast<std::streamsize>(d.size() * sizeof(double)));
        }
        manifest["files"].push_back({{"class", c}, {"file", fname}, {"count", idx.size()}});
    }
    std::ofstream m(fs::path(dir) / "manifest.json");
    m << manifest.dump(2) << "\n";
}

Dataset load_dataset_dir(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw ContractError("load_dataset_dir: missing manifest.json in " + dir);
    json manifest = json::parse(mf);
    Dataset ds;
    ds.classes = manifest.at("classes").get<int>();
    for (const auto& entry : manifest.at("files")) {
        const int cls = entry.at("class").get<int>();
        std::ifstream f(fs::path(dir) / entry.at("file").get<std::string>(), std::ios::binary);
        if (!f) throw ContractError("load_dataset_dir: missing tensor file");
        const std::uint32_t n = read_u32(f), C = read_u32(f), H = read_u32(f), W = read_u32(f);
        for (std::uint32_t i = 0; i < n; ++i) {
            Tensor t({static_cast<int>(C), static_cast<int>(H), static_cast<int>(W)});
            f.read(reinterpret_cast<char*>(t.data.data()),
                   static_cast<std::streamsize>(t.data.size() * sizeof(double)));
            if (!f) throw ContractError("load_dataset_dir: truncated tensor file");
            ds.inputs.push_back(std::move(t));
            ds.labels.push_back(cls);
        }
    }
    return ds;
}

}  // namespace fedoras
