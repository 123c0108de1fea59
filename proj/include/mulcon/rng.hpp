#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace mulcon {

// SplitMix64-based generator. Fixed bit-level algorithm so every stream is
// identical across compilers and platforms; std::mt19937 distributions are
// implementation-defined and would break run-for-run reproducibility.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive range [lo, hi]
    int uniform_int(int lo, int hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; one value per call, two uniform draws consumed
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_u64() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
};

namespace detail {
inline uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

// Seed-derivation rule used everywhere randomness is needed: successive
// absorb-and-mix of the parts. Per-sample augmentation seeds are
// derive_seed(master, epoch, sample_index, copy_index); shuffles use
// derive_seed(master, tag, epoch); parameter init uses
// derive_seed(master, name_hash(param_name)).
inline uint64_t derive_seed(uint64_t a, uint64_t b = 0, uint64_t c = 0, uint64_t d = 0,
                            uint64_t e = 0) {
    uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (uint64_t part : {a, b, c, d, e}) {
        h = detail::mix64(h + 0x9e3779b97f4a7c15ULL + part);
    }
    return h;
}

// FNV-1a, for deriving per-parameter init streams from parameter names
inline uint64_t name_hash(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char ch : s) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace mulcon
