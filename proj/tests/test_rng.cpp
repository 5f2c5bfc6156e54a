#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "expfun/parallel.hpp"
#include "expfun/rng.hpp"

using namespace expfun;

TEST_CASE("philox4x32-10 known-answer vectors") {
    // Reference vectors for the Random123 Philox 4x32, 10 rounds.
    auto r1 = philox4x32_10({0u, 0u, 0u, 0u}, {0u, 0u});
    CHECK(r1[0] == 0x6627e8d5u);
    CHECK(r1[1] == 0xe169c58du);
    CHECK(r1[2] == 0xbc57ac4cu);
    CHECK(r1[3] == 0x9b00dbd8u);

    auto r2 = philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                            {0xffffffffu, 0xffffffffu});
    CHECK(r2[0] == 0x408f276du);
    CHECK(r2[1] == 0x41c83b0eu);
    CHECK(r2[2] == 0xa20bc7c6u);
    CHECK(r2[3] == 0x6d5451fdu);

    auto r3 = philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                            {0xa4093822u, 0x299f31d0u});
    CHECK(r3[0] == 0xd16cfe09u);
    CHECK(r3[1] == 0x94fdccebu);
    CHECK(r3[2] == 0x5001e420u);
    CHECK(r3[3] == 0x24126ea1u);
}

TEST_CASE("philox engine: determinism and stream independence") {
    Philox a(42, 7), b(42, 7);
    for (int i = 0; i < 1000; ++i) REQUIRE(a() == b());

    Philox c(42, 8);
    Philox d(43, 7);
    int diff_c = 0, diff_d = 0;
    Philox a2(42, 7);
    for (int i = 0; i < 64; ++i) {
        auto v = a2();
        if (v != c()) ++diff_c;
        if (v != d()) ++diff_d;
    }
    CHECK(diff_c > 60);
    CHECK(diff_d > 60);
}

TEST_CASE("philox engine feeds std distributions") {
    Philox g(123, 0);
    std::normal_distribution<double> n01(0.0, 1.0);
    double sum = 0.0, sumsq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double z = n01(g);
        sum += z;
        sumsq += z * z;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(double(n)));
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("ordered reduction is independent of worker count") {
    auto map_batch = [](std::uint64_t lo, std::uint64_t hi) {
        double s = 0.0;
        for (std::uint64_t i = lo; i < hi; ++i) {
            Philox g(9, i);
            std::normal_distribution<double> n01;
            s += n01(g);
        }
        return s;
    };
    auto comb = [](double x, double y) { return x + y; };
    const double r1 = parallel_reduce_ordered<double>(5000, 256, 1, 0.0, map_batch, comb);
    const double r4 = parallel_reduce_ordered<double>(5000, 256, 4, 0.0, map_batch, comb);
    CHECK(r1 == r4);
}
