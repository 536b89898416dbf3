#pragma once

#include <cmath>
#include <cstdint>

#include <boost/random/normal_distribution.hpp>

namespace tontine {

/// SplitMix64 finalizer; also used as a seed expander.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
    constexpr std::uint64_t operator()() noexcept {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

private:
    std::uint64_t state_;
};

/// xoshiro256** with helpers for the variates the simulators need.
///
/// Streams are derived from (master seed, stream index) so that every Monte
/// Carlo path owns an independent generator and results do not depend on how
/// paths are scheduled over worker threads.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) noexcept {
        SplitMix64 sm(seed);
        for (auto& w : s_) w = sm();
    }

    static Rng for_stream(std::uint64_t master, std::uint64_t index) noexcept {
        return Rng(mix64(master) ^ mix64(index + 0x632BE59BD9B4E019ULL));
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept {
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

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1).
    double uniform_open() noexcept {
        return (static_cast<double>((*this)() >> 12) + 0.5) * 0x1.0p-52;
    }

    /// Unit-mean exponential as -ln(1 - u); 1 - u is exact for 53-bit u.
    double exponential() noexcept { return -std::log(1.0 - uniform()); }

    /// Standard normal via Boost's ziggurat sampler.
    double normal() noexcept { return boost::random::normal_distribution<double>{}(*this); }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4]{};
};

}  // namespace tontine
