#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace qssep {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

/// Counter-based generator: output n is splitmix64(key + n * gamma).
/// Satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng() = default;
    explicit CounterRng(std::uint64_t key) : key_(key) {}
    CounterRng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) : key_(stream_key(seed, a, b)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return splitmix64(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL); }

    double uniform() { return ((*this)() >> 11) * 0x1.0p-53; }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

class NormalStream {
public:
    NormalStream() = default;
    explicit NormalStream(CounterRng rng) : rng_(rng) {}
    double operator()() { return dist_(rng_); }
    CounterRng& engine() { return rng_; }

private:
    CounterRng rng_;
    std::normal_distribution<double> dist_;
};

} // namespace qssep
