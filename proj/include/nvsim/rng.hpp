#ifndef NVSIM_RNG_HPP
#define NVSIM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace nvsim {

// SplitMix64 with per-stream seeding. Each Monte Carlo shot owns one stream
// derived from (master seed, stream id), so results do not depend on how
// shots are partitioned across threads.
class ShotRng {
public:
    ShotRng(std::uint64_t master_seed, std::uint64_t stream_id)
        : state_(mix64(master_seed ^ mix64(stream_id + kGolden))) {}

    std::uint64_t next_u64() {
        ++n_draws_;
        state_ += kGolden;
        return mix64(state_);
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // waiting time for a Poisson process with the given rate (per second)
    double exponential(double rate_per_s) {
        return -std::log1p(-uniform()) / rate_per_s;
    }

    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Exact in distribution for any mean: sums Knuth blocks of mean <= 16.
    std::uint64_t poisson(double mean) {
        if (!(mean >= 0.0)) throw std::invalid_argument("poisson: negative mean");
        std::uint64_t total = 0;
        while (mean > 16.0) {
            total += knuth_poisson(16.0);
            mean -= 16.0;
        }
        return total + knuth_poisson(mean);
    }

    std::uint64_t draws() const { return n_draws_; }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t knuth_poisson(double mean) {
        const double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double prod = uniform();
        while (prod > limit) {
            ++k;
            prod *= uniform();
        }
        return k;
    }

    std::uint64_t state_;
    std::uint64_t n_draws_ = 0;
};

}

#endif
