#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "hbac/rng.hpp"

using hbac::RngStream;

TEST_CASE("identical (seed, stream) reproduce the same draws") {
    RngStream a(42, 7);
    RngStream b(42, 7);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    RngStream c(42, 7);
    RngStream d(42, 7);
    for (int i = 0; i < 100; ++i) {
        CHECK(c.next_gaussian() == d.next_gaussian());
    }
}

TEST_CASE("distinct streams differ") {
    RngStream a(42, 0);
    RngStream b(42, 1);
    int same = 0;
    for (int i = 0; i < 64; ++i) {
        if (a.next_u32() == b.next_u32()) ++same;
    }
    CHECK(same < 4);
}

TEST_CASE("next_below stays in range and covers it") {
    RngStream rng(1);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto v = rng.next_below(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("next_double lies in [0,1) and has sane mean") {
    RngStream rng(3);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.next_double();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        sum += v;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("gaussian moments") {
    RngStream rng(5);
    const int n = 50000;
    double sum = 0.0, ss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rng.next_gaussian();
        sum += v;
        ss += v * v;
    }
    const double mean = sum / n;
    CHECK(mean == doctest::Approx(0.0).epsilon(1.0).scale(0.02));
    CHECK(ss / n - mean * mean == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("shuffle is a permutation and deterministic") {
    std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<int> w = v;
    RngStream a(9, 2);
    RngStream b(9, 2);
    a.shuffle(v);
    b.shuffle(w);
    CHECK(v == w);
    std::multiset<int> sorted(v.begin(), v.end());
    CHECK(sorted == std::multiset<int>{1, 2, 3, 4, 5, 6, 7, 8});
}

TEST_CASE("derive_stream spreads nearby inputs") {
    std::set<std::uint64_t> ids;
    for (std::uint64_t i = 0; i < 100; ++i) {
        ids.insert(hbac::derive_stream(1, i));
        ids.insert(hbac::derive_stream(2, i));
    }
    CHECK(ids.size() == 200);
}
