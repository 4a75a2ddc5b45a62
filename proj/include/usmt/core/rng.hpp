#ifndef USMT_CORE_RNG_HPP
#define USMT_CORE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "usmt/core/tensor.hpp"

namespace usmt {

// Deterministic RNG. Distributions are hand-rolled on top of mt19937_64 so a
// given seed yields the same stream regardless of standard library.
class Rng {
  public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [lo, hi] inclusive
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(eng_() % span);
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        // Box-Muller, one value per draw
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    template <class S>
    void fill_normal(TensorT<S>& t, double mean, double stddev) {
        for (auto& v : t.data) v = static_cast<S>(normal(mean, stddev));
    }

    template <class S>
    void fill_uniform(TensorT<S>& t, double lo, double hi) {
        for (auto& v : t.data) v = static_cast<S>(uniform(lo, hi));
    }

    // Fisher-Yates
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 eng_;
};

// FNV-1a, used for config hashes and for deriving per-task sub-seeds.
inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t mix_seed(uint64_t seed, const std::string& tag) {
    uint64_t h = fnv1a(tag);
    return seed ^ (h + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2));
}

}  // namespace usmt

#endif
