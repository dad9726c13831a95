#pragma once

#include <cmath>
#include <cstdint>

namespace dexsim {

// Deterministic xoshiro256** generator, seeded through splitmix64.
// All simulation and tie-breaking randomness flows through this class so that
// a given seed reproduces bit-identical results across runs and platforms.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : s_) word = splitmix64(x);
    }

    // Derive an independent stream, e.g. one per simulation run or partition.
    Rng spawn(std::uint64_t stream) const {
        return Rng(mix(s_[0] ^ s_[3], stream));
    }

    // Stateless combine, for per-item deterministic keys.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t x = a + 0x9e3779b97f4a7c15ull * (b + 1);
        return splitmix64(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Standard normal via Box-Muller (no cached spare, keeps streams simple).
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double variance) {
        return mean + std::sqrt(variance) * normal();
    }

    double exponential(double rate) {
        double u = uniform01();
        while (u <= 0.0) u = uniform01();
        return -std::log(u) / rate;
    }

    // Exact Poisson sampling: Knuth product method, splitting large means so
    // the product never underflows.
    long poisson(double mu) {
        if (mu <= 0.0) return 0;
        if (mu > 30.0) {
            const double half = mu / 2.0;
            return poisson(half) + poisson(mu - half);
        }
        const double limit = std::exp(-mu);
        long k = 0;
        double prod = uniform01();
        while (prod > limit) {
            ++k;
            prod *= uniform01();
        }
        return k;
    }

  private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    std::uint64_t s_[4];
};

}  // namespace dexsim
