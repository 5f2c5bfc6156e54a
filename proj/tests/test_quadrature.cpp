#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "expfun/quadrature.hpp"

using namespace expfun;

TEST_CASE("finite-interval adaptive Simpson against closed forms") {
    CHECK(integrate([](double x) { return x * x; }, 0.0, 3.0) == Catch::Approx(9.0).epsilon(1e-12));
    CHECK(integrate([](double x) { return std::sin(x); }, 0.0, M_PI) ==
          Catch::Approx(2.0).margin(1e-10));
    CHECK(integrate([](double x) { return std::exp(-x); }, 0.0, 40.0) ==
          Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("semi-infinite transforms") {
    // Gaussian integral and gamma-type tails.
    CHECK(integrate_upper([](double x) { return std::exp(-x * x / 2.0); }, 0.0) ==
          Catch::Approx(std::sqrt(M_PI / 2.0)).margin(1e-9));
    CHECK(integrate_upper([](double x) { return x * std::exp(-2.0 * x); }, 0.0) ==
          Catch::Approx(0.25).margin(1e-9));
    CHECK(integrate_lower([](double x) { return std::exp(x); }, 0.0) ==
          Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("line integral splits at zero") {
    const double v = integrate_line([](double x) { return std::exp(-std::fabs(x)); },
                                    -std::numeric_limits<double>::infinity(),
                                    std::numeric_limits<double>::infinity());
    CHECK(v == Catch::Approx(2.0).margin(1e-9));
    // Kinked at zero: each side is smooth after the split.
    CHECK(integrate_line([](double x) { return x < 0 ? std::exp(2.0 * x) : std::exp(-x); }, -1.0,
                         1.0) == Catch::Approx(0.5 - 0.5 * std::exp(-2.0) + 1.0 - std::exp(-1.0))
                                     .margin(1e-9));
}

TEST_CASE("flattened endpoint singularity") {
    // int_0^1 x^{-1/2} dx = 2, p = 1/2.
    const double v = integrate_singular0([](double x) { return 1.0 / std::sqrt(x); }, 1.0, 0.5);
    CHECK(v == Catch::Approx(2.0).margin(1e-8));
    // int_0^2 x^{-0.8} dx = 2^{0.2}/0.2.
    const double w = integrate_singular0([](double x) { return std::pow(x, -0.8); }, 2.0, 0.8);
    CHECK(w == Catch::Approx(std::pow(2.0, 0.2) / 0.2).margin(1e-7));
}

TEST_CASE("quadrature failure is an error, not a degraded value") {
    CHECK_THROWS_AS(integrate([](double x) { return 1.0 / x; }, 0.0, 1.0), QuadratureError);
}
