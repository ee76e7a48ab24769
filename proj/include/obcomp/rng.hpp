#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace obc {

// FNV-1a over an arbitrary label, folded with a base seed. Every component
// that needs randomness derives its own stream from the one run seed this
// way, so any piece of the pipeline is reproducible in isolation.
inline uint64_t sub_seed(uint64_t base, std::string_view label) {
    uint64_t h = 14695981039346656037ull ^ base;
    for (unsigned char c : label) {
        h ^= c;
        h *= 1099511628211ull;
    }
    h ^= base >> 32;
    h *= 1099511628211ull;
    return h;
}

inline std::mt19937_64 make_rng(uint64_t seed) { return std::mt19937_64(seed); }

// Box-Muller on top of mt19937_64; stable across standard libraries, unlike
// std::normal_distribution.
class GaussianRng {
public:
    explicit GaussianRng(uint64_t seed) : rng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    std::vector<double> sample(size_t n) {
        std::vector<double> out(n);
        for (auto& v : out) v = next();
        return out;
    }

    double uniform() {  // [0,1)
        return (rng_() >> 11) * (1.0 / 9007199254740992.0);
    }

    uint64_t raw() { return rng_(); }

private:
    std::mt19937_64 rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Deterministic Fisher-Yates (std::shuffle is implementation-defined).
template <typename T>
void seeded_shuffle(std::vector<T>& items, uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (size_t i = items.size(); i > 1; --i) {
        const size_t j = rng() % i;
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace obc
