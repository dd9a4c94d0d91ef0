#pragma once

#include <cstdint>
#include <random>

namespace ztrack {

/// Seedable random stream. Every stochastic component owns one of these so
/// runs are reproducible and per-target streams stay independent.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// Derive an independent stream, e.g. from (global_seed, target_id).
    static Rng derive(std::uint64_t global_seed, std::uint64_t key) {
        std::seed_seq seq{global_seed, key};
        std::mt19937_64 eng(0);
        eng.seed(seq);
        Rng r(0);
        r.eng_ = eng;
        return r;
    }

    double normal(double mean, double sigma) {
        std::normal_distribution<double> d(mean, sigma);
        return d(eng_);
    }

    /// Uniform in [0, 1).
    double uniform() {
        std::uniform_real_distribution<double> d(0.0, 1.0);
        return d(eng_);
    }

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(eng_);
    }

    int coin_sign() { return uniform() < 0.5 ? 1 : -1; }

    std::uint64_t u64() { return eng_(); }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

} // namespace ztrack
