#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace divgan {

/// Seedable generator used everywhere randomness is needed.
///
/// Wraps std::mt19937_64. Uniform and Gaussian draws are computed here from
/// raw 64-bit words, so a seed gives the same stream on every standard
/// library. Independent streams come from split(), which seeds a child
/// generator from (seed, stream id) through SplitMix64.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    /// Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n);
    /// Standard normal draw (Box-Muller, one output per call).
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Child generator for an independent stream.
    Rng split(std::uint64_t stream) const { return Rng(seed_, stream_ * 0x9E3779B97F4A7C15ULL + stream + 1); }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

    /// Full engine state as text; restore() reproduces the stream exactly.
    std::string serialize() const;
    static Rng restore(const std::string& text);

    bool operator==(const Rng& other) const { return engine_ == other.engine_; }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
    std::uint64_t stream_;
};

} // namespace divgan
