#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace annsnn {

/// Seeded 64-bit Mersenne Twister. The raw engine sequence is fixed by the C++
/// standard; the real-valued draws below are derived by hand instead of through
/// <random> distributions, whose algorithms differ between standard libraries.
class Rng
{
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    static constexpr const char* algorithm() { return "mt19937_64"; }
    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, n).
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via Box-Muller.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Independent stream derived from this one's seed and a stream id.
    Rng split(std::uint64_t stream) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace annsnn
