#pragma once

#include <cmath>
#include <cstdint>

namespace gti {

/// log(n!), exact table up to n = 170 (beyond double factorial range anyway).
inline double log_factorial(int n) {
    static const auto table = [] {
        struct T {
            double v[171];
        } t{};
        t.v[0] = 0.0;
        for (int i = 1; i <= 170; ++i) t.v[i] = t.v[i - 1] + std::log(static_cast<double>(i));
        return t;
    }();
    return table.v[n];
}

/// Exact binomial coefficient in 64-bit integers; valid for n <= 62.
inline int64_t binom_i64(int n, int k) {
    if (k < 0 || k > n) return 0;
    if (k > n - k) k = n - k;
    int64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

inline double binom(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    if (n <= 62) return static_cast<double>(binom_i64(n, k));
    return std::exp(log_factorial(n) - log_factorial(k) - log_factorial(n - k));
}

/// P_Shapley(S | M) = (|M| - |S|)! |S|! / (|M| + 1)!  for S drawn from a pool
/// of m = |M| players. Computed in log space so m > 20 does not overflow.
inline double shapley_weight(int subset_size, int pool_size) {
    return std::exp(log_factorial(subset_size) + log_factorial(pool_size - subset_size) -
                    log_factorial(pool_size + 1));
}

/// Visit every subset of `mask` (including 0 and mask itself).
template <typename F>
void for_each_submask(uint64_t mask, F&& f) {
    uint64_t sub = mask;
    for (;;) {
        f(sub);
        if (sub == 0) break;
        sub = (sub - 1) & mask;
    }
}

/// Visit every proper subset of `mask` (everything except mask itself).
template <typename F>
void for_each_proper_submask(uint64_t mask, F&& f) {
    if (mask == 0) return;
    uint64_t sub = (mask - 1) & mask;
    for (;;) {
        f(sub);
        if (sub == 0) break;
        sub = (sub - 1) & mask;
    }
}

/// Visit every k-bit value below 2^n in increasing order (Gosper's hack).
/// Requires n <= 62.
template <typename F>
void for_each_sized_mask(int n, int k, F&& f) {
    if (k == 0) {
        f(uint64_t{0});
        return;
    }
    if (k > n) return;
    const uint64_t limit = uint64_t{1} << n;
    uint64_t v = (uint64_t{1} << k) - 1;
    while (v < limit) {
        f(v);
        uint64_t c = v & (0 - v);
        uint64_t r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
}

}  // namespace gti
