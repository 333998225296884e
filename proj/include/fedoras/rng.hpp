#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace fedoras {

/// splitmix64 finalizer; used to derive independent seeds from
/// (master seed, round, client, ...) tuples so that results do not
/// depend on scheduling or thread count.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    return mix64(mix64(mix64(a) ^ b) ^ c);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t raw() { return gen_(); }

    /// Uniform in [0, n).
    int uniform_int(int n) {
        return static_cast<int>(std::uniform_int_distribution<std::int64_t>(0, n - 1)(gen_));
    }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }

    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(gen_);
    }

    double gamma(double shape) {
        return std::gamma_distribution<double>(shape, 1.0)(gen_);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), gen_);
    }

    /// Index drawn from unnormalized non-negative weights.
    int discrete(const std::vector<double>& w) {
        double total = 0.0;
        for (double x : w) total += x;
        double u = uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            acc += w[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(w.size()) - 1;
    }

    Rng derive(std::uint64_t tag) { return Rng(mix_seed(gen_(), tag)); }

    std::mt19937_64& engine() { return gen_; }

  private:
    std::mt19937_64 gen_;
};

}  // namespace fedoras
