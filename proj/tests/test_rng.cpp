#include <doctest.h>

#include <vector>

#include "gti/rng.hpp"

using namespace gti;

TEST_SUITE_BEGIN("rng");

TEST_CASE("same key gives identical streams") {
    CounterRng a(42), b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("derive separates streams and is order sensitive") {
    CHECK(CounterRng::derive(1, {2, 3}) != CounterRng::derive(1, {3, 2}));
    CHECK(CounterRng::derive(1, {2}) != CounterRng::derive(2, {2}));
    CHECK(CounterRng::derive(7, {0}) != CounterRng::derive(7, {1}));
}

TEST_CASE("doubles live in [0,1) and look uniform") {
    CounterRng rng(7);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double x = rng.next_double();
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
        sum += x;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("next_below covers the range without bias") {
    CounterRng rng(9);
    std::vector<int> counts(5, 0);
    const int n = 50000;
    for (int i = 0; i < n; ++i) ++counts[rng.next_below(5)];
    for (int c : counts) CHECK(std::abs(c - n / 5) < 600);
}

TEST_CASE("sample_without_replacement yields distinct in-range values") {
    CounterRng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        auto picked = rng.sample_without_replacement(20, 8);
        REQUIRE(picked.size() == 8);
        std::vector<bool> seen(20, false);
        for (int v : picked) {
            REQUIRE(v >= 0);
            REQUIRE(v < 20);
            REQUIRE(!seen[v]);
            seen[v] = true;
        }
    }
}

TEST_SUITE_END();
