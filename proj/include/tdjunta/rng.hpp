#pragma once

#include <cmath>
#include <cstdint>

namespace tdj {

/// Independent sub-streams drawn from one experiment seed.
enum class Stream : std::uint64_t {
    InitialPoint = 1,
    Coordinate = 2,
    Flip = 3,
    NetInit = 4,
    BiasRedraw = 5,
    TestSet = 6,
    Estimator = 7,
    Replica = 8,
};

/// SplitMix64 finaliser; used as the block function of the counter RNG.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives a child seed; distinct (seed, index) pairs give unrelated streams.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Counter-based generator: output n is a pure function of (key, n).
///
/// All distributions are implemented here rather than via <random> so that
/// sample sequences are identical across standard library implementations.
/// The full state is (key, counter), which makes checkpointing trivial.
class CounterRng {
public:
    CounterRng() = default;
    CounterRng(std::uint64_t seed, Stream stream)
        : key_(derive_seed(seed, static_cast<std::uint64_t>(stream))) {}
    CounterRng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

    std::uint64_t next_u64() noexcept { return mix64(key_ ^ mix64(counter_++)); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }

    /// Uniform on {0, ..., n-1}; Lemire's nearly-divisionless rejection method.
    std::uint64_t uniform_index(std::uint64_t n) noexcept {
        auto m = static_cast<unsigned __int128>(next_u64()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool bernoulli(double p) noexcept { return uniform01() < p; }

    /// Uniform random sign in {-1, +1}.
    int sign() noexcept { return (next_u64() >> 63) ? 1 : -1; }

    /// Standard normal via Box-Muller (one output per call, no caching).
    double normal() noexcept {
        const double u1 = 1.0 - uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

    friend bool operator==(const CounterRng&, const CounterRng&) = default;

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace tdj
