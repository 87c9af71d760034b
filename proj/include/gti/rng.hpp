#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace gti {

/// Counter-based pseudo-random generator: the SplitMix64 output function
/// applied to key + i * golden-gamma for i = 1, 2, ...
///
/// Properties this project relies on:
///  - fully deterministic and platform independent (no libc distributions),
///  - O(1) substream derivation via derive(), so every (seed, purpose, index)
///    tuple names an independent stream,
///  - trivially reproducible from a (seed, stream) pair recorded in a manifest.
class CounterRng {
public:
    explicit CounterRng(uint64_t key) : key_(key), counter_(0) {}

    static uint64_t mix(uint64_t z) {
        z += 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Derive an independent stream key from a seed and a path of indices.
    /// derive(s, {a, b}) != derive(s, {b, a}) by construction.
    static uint64_t derive(uint64_t seed, std::initializer_list<uint64_t> path) {
        uint64_t k = mix(seed);
        for (uint64_t p : path) k = mix(k ^ mix(p + 0xD1B54A32D192ED03ull));
        return k;
    }

    uint64_t next_u64() { return mix(key_ + 0x9E3779B97F4A7C15ull * (++counter_)); }

    /// Uniform in [0, 1), 53-bit mantissa.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    bool bernoulli(double p) { return next_double() < p; }

    /// Box-Muller; consumes two uniforms per call.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586 * u2);
    }

    /// Unbiased integer in [0, n) via rejection.
    uint64_t next_below(uint64_t n) {
        if (n == 0) return 0;
        uint64_t threshold = (0 - n) % n;  // 2^64 mod n
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_below(static_cast<uint64_t>(hi - lo + 1)));
    }

    /// k distinct values from {0, ..., n-1} via partial Fisher-Yates.
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        for (int i = 0; i < k; ++i) {
            int j = i + static_cast<int>(next_below(static_cast<uint64_t>(n - i)));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        return pool;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t key_;
    uint64_t counter_;
};

}  // namespace gti
