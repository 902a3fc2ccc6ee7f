#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace xaiopt {

// Seeded random stream. Distribution transforms are written out by hand so
// that draws are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform on [0, 1) with 53 bits of resolution.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer on [0, n). n must be positive.
    std::size_t index(std::size_t n);

    // Standard normal via Box-Muller (no cached second variate).
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_string(std::string_view s);

// Seed for one method invocation, derived from the study root seed, the
// trial index and the instance id so that evaluation order cannot change it.
std::uint64_t stream_seed(std::uint64_t root, std::uint64_t trial, std::string_view instance);

} // namespace xaiopt
