#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace gatgan {

// Deterministic random source. Wraps mt19937_64 but fixes the uniform and
// normal transforms, so identical seeds yield identical draws regardless of
// the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t raw() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller with cached spare.
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n), rejection-sampled. n must be positive.
    std::uint64_t below(std::uint64_t n);

    bool bernoulli(double p) { return uniform() < p; }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

    // Independent stream derived from this rng's seed and a purpose tag.
    // Streams with distinct tags are decorrelated; the same (seed, tag) pair
    // always yields the same stream.
    Rng stream(std::uint64_t tag) const;

    std::uint64_t seed() const { return seed_; }

    // Full engine state as text, round-trippable through set_state().
    std::string state() const;
    void set_state(const std::string& s);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// SplitMix64 finalizer; used to derive stream seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace gatgan
