#pragma once

// Seed derivation and seeded shuffles. std::uniform_int_distribution is
// implementation-defined, so bounded draws are done here to keep every
// permutation identical across standard libraries.

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <random>
#include <string_view>
#include <vector>

namespace irrbench {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Mixes a base seed with string labels (question id, stage name, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::string_view> labels) {
    std::uint64_t h = splitmix64(base);
    for (auto label : labels) h = splitmix64(h ^ fnv1a64(label));
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

private:
    std::mt19937_64 engine_;
};

template <class T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t i = v.size(); i > 1; --i) {
        auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    seeded_shuffle(p, seed);
    return p;
}

}  // namespace irrbench
