#include <doctest.h>

#include <cmath>
#include <set>

#include "mtd/rng.hpp"

using namespace mtd;

TEST_CASE("fixed seed reproduces the stream") {
    Rng a(123), b(123);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(124);
    int same = 0;
    Rng a2(123);
    for (int i = 0; i < 100; ++i) same += a2.next_u64() == c.next_u64();
    CHECK(same == 0);
}

TEST_CASE("below stays in range and covers small ranges") {
    Rng r(5);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto v = r.below(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("uniform01 lies in [0,1) with sane mean") {
    Rng r(9);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = r.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / 100000 - 0.5) < 0.01);
}

TEST_CASE("normal moments") {
    Rng r(11);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        s += z;
        s2 += z * z;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("derive_seed separates tag streams") {
    const auto a = derive_seed(1, {2, 3});
    const auto b = derive_seed(1, {3, 2});
    const auto c = derive_seed(2, {2, 3});
    CHECK(a != b);
    CHECK(a != c);
    CHECK(derive_seed(1, {2, 3}) == a);
}
