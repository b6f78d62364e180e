#pragma once

// Seed derivation. One master seed per run; each stochastic module gets its
// own engine seeded from (master, stream id) so a module can be replayed in
// isolation without consuming draws from any other.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace ablatron {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

enum class Stream : std::uint64_t {
    Ablation = 1,
    Transport = 2,
    Ionization = 3,
    Trap = 4,
    Fluorescence = 5,
    Test = 99,
};

using Engine = std::mt19937_64;

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream * 0xd1b54a32d192ed03ULL));
}

inline Engine make_stream(std::uint64_t master, Stream s) {
    return Engine(derive_seed(master, static_cast<std::uint64_t>(s)));
}

inline Engine make_stream(std::uint64_t master, Stream s, std::uint64_t sub) {
    return Engine(derive_seed(derive_seed(master, static_cast<std::uint64_t>(s)), sub));
}

inline double uniform01(Engine& rng) {
    return std::generate_canonical<double, 53>(rng);
}

inline std::uint64_t sample_poisson(Engine& rng, double mean) {
    if (!(mean > 0.0)) return 0;
    return static_cast<std::uint64_t>(std::poisson_distribution<long long>(mean)(rng));
}

inline std::uint64_t sample_binomial(Engine& rng, std::uint64_t n, double p) {
    if (n == 0 || !(p > 0.0)) return 0;
    if (p >= 1.0) return n;
    return static_cast<std::uint64_t>(std::binomial_distribution<long long>(static_cast<long long>(n), p)(rng));
}

/// Integer counts in mean-field mode: the fractional remainder is carried to
/// the next draw so cumulative totals track the expectation to within one.
class CarryCounter {
public:
    std::uint64_t take(double expected) {
        carry_ += expected;
        const double whole = std::floor(carry_ + 1e-9);
        carry_ -= whole;
        return static_cast<std::uint64_t>(whole);
    }

private:
    double carry_ = 0.0;
};

}  // namespace ablatron
