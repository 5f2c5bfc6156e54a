#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "expfun/levy.hpp"
#include "expfun/quadrature.hpp"

using namespace expfun;
using Catch::Approx;

namespace {

const LevyTriplet brownian{1.0, std::sqrt(2.0), NoJumps{}};
const LevyTriplet unit_atom{0.0, 0.0, PointMassJumps{1.0, 1.0}};
const LevyTriplet two_sided{0.1, 0.5, TwoSidedExpJumps{2.0, 0.6, 3.0, 2.0}};
const LevyTriplet gauss_cp{-0.4, 0.3, GaussianJumps{1.5, 0.2, 0.7}};
const LevyTriplet ts_low{0.2, 0.25, TemperedStableJumps{0.8, 0.6, 1.4, true}};
const LevyTriplet ts_high{0.2, 0.25, TemperedStableJumps{0.5, 1.5, 2.0, true}};
const LevyTriplet ts_one{0.0, 0.4, TemperedStableJumps{0.7, 1.0, 1.8, false}};

// Independent oracle: integrate (e^{lx} - 1 - lx) against the jump density by
// quadrature, with the small-x cancellation handled in series.
double kernel(double l, double x) {
    const double u = l * x;
    if (std::fabs(u) < 1e-5) return u * u * (0.5 + u / 6.0 + u * u / 24.0);
    return std::expm1(u) - u;
}

double jump_integral_oracle(const JumpSpec& jumps, double l) {
    if (std::holds_alternative<TwoSidedExpJumps>(jumps)) {
        const auto& j = std::get<TwoSidedExpJumps>(jumps);
        double v = 0.0;
        if (j.p_up > 0.0)
            v += j.p_up * integrate_upper(
                              [&](double x) {
                                  return kernel(l, x) * j.eta_plus * std::exp(-j.eta_plus * x);
                              },
                              0.0, 1e-13);
        if (j.p_up < 1.0)
            v += (1.0 - j.p_up) * integrate_upper(
                                      [&](double x) {
                                          return kernel(l, -x) * j.eta_minus *
                                                 std::exp(-j.eta_minus * x);
                                      },
                                      0.0, 1e-13);
        return j.rate * v;
    }
    if (std::holds_alternative<GaussianJumps>(jumps)) {
        const auto& j = std::get<GaussianJumps>(jumps);
        const double s = j.stddev;
        auto dens = [&](double x) {
            const double z = (x - j.mean) / s;
            return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * M_PI));
        };
        const double lo = j.mean - 14.0 * s - std::fabs(l) * s * s * 14.0;
        const double hi = j.mean + 14.0 * s + std::fabs(l) * s * s * 14.0;
        return j.rate * integrate([&](double x) { return kernel(l, x) * dens(x); }, lo, hi, 1e-13);
    }
    const auto& j = std::get<TemperedStableJumps>(jumps);
    const double le = j.positive ? l : -l;  // reflect to the positive half-line
    auto g = [&](double x) {
        return kernel(le, x) * std::pow(x, -1.0 - j.stability) * std::exp(-j.tempering * x);
    };
    // kernel ~ (le x)^2/2 near zero, so g ~ x^{1-b}; flattening with p = b-1
    // makes the transformed integrand linear at the origin for every b < 2
    const double v = integrate_singular0(g, 1.0, j.stability - 1.0, 1e-12) +
                     integrate_upper(g, 1.0, 1e-12);
    return j.scale * v;
}

}  // namespace

TEST_CASE("closed forms: Brownian and single-atom exponents") {
    for (double l : {-3.0, -1.5, -0.5, 0.0, 0.25, 1.0, 2.0, 3.0}) {
        const double phi = laplace_exponent(brownian, l);
        const double expect = -l + l * l;
        if (expect == 0.0)
            CHECK(std::fabs(phi) < 1e-14);
        else
            CHECK(phi == Approx(expect).epsilon(1e-12));
        CHECK(laplace_exponent(unit_atom, l) ==
              Approx(std::exp(l) - 1.0 - l).margin(1e-12 * std::exp(std::fabs(l))));
    }
    CHECK(std::fabs(laplace_exponent(brownian, 1.0)) < 1e-15);
    CHECK(laplace_exponent(unit_atom, 1.0) == Approx(std::exp(1.0) - 2.0).epsilon(1e-14));

    const auto psi = characteristic_exponent(unit_atom, M_PI);
    CHECK(psi.real() == Approx(2.0).epsilon(1e-12));
    CHECK(psi.imag() == Approx(M_PI).epsilon(1e-12));

    const auto psib = characteristic_exponent(brownian, 2.0);
    CHECK(psib.real() == Approx(4.0).epsilon(1e-12));
    CHECK(psib.imag() == Approx(2.0).epsilon(1e-12));
}

TEST_CASE("jump exponents agree with density quadrature") {
    for (double l : {-1.2, -0.3, 0.4, 1.1}) {
        CHECK(detail::jump_J(two_sided.jumps, l) ==
              Approx(jump_integral_oracle(two_sided.jumps, l)).epsilon(1e-9));
        CHECK(detail::jump_J(gauss_cp.jumps, l) ==
              Approx(jump_integral_oracle(gauss_cp.jumps, l)).epsilon(1e-9));
        CHECK(detail::jump_J(ts_low.jumps, l) ==
              Approx(jump_integral_oracle(ts_low.jumps, l)).epsilon(1e-8));
        CHECK(detail::jump_J(ts_high.jumps, l) ==
              Approx(jump_integral_oracle(ts_high.jumps, l)).epsilon(1e-8));
        CHECK(detail::jump_J(ts_one.jumps, l) ==
              Approx(jump_integral_oracle(ts_one.jumps, l)).epsilon(1e-8));
    }
}

TEST_CASE("exponent domains") {
    const auto d1 = exponent_domain(two_sided);
    CHECK(d1.lower == -2.0);
    CHECK(d1.upper == 3.0);
    CHECK_FALSE(d1.lower_closed);
    CHECK_FALSE(d1.upper_closed);
    CHECK(laplace_exponent(two_sided, 3.0) == inf);
    CHECK(laplace_exponent(two_sided, -2.0) == inf);

    LevyTriplet ts{0.0, 0.0, TemperedStableJumps{1.0, 0.5, 1.0, true}};
    const auto d2 = exponent_domain(ts);
    CHECK(d2.upper == 1.0);
    CHECK(d2.upper_closed);
    CHECK(std::isfinite(laplace_exponent(ts, 1.0)));
    CHECK(laplace_exponent(ts, 1.0 + 1e-9) == inf);
    CHECK(exponent_domain(dual(ts)).lower == -1.0);
    CHECK(exponent_domain(dual(ts)).lower_closed);

    CHECK(exponent_domain(brownian).lower == -inf);
    CHECK(exponent_domain(brownian).upper == inf);
}

TEST_CASE("derivatives match finite differences") {
    auto fd_check = [](const LevyTriplet& t, double l) {
        const double h = 1e-6 * std::max(1.0, std::fabs(l));
        const double d1 = laplace_exponent_d1(t, l);
        const double fd1 =
            (laplace_exponent(t, l + h) - laplace_exponent(t, l - h)) / (2.0 * h);
        CHECK(d1 == Approx(fd1).epsilon(1e-5).margin(1e-7));
        const double h2 = 1e-4 * std::max(1.0, std::fabs(l));  // wider step: 2nd differences amplify roundoff
        const double d2 = laplace_exponent_d2(t, l);
        const double fd2 = (laplace_exponent(t, l + h2) - 2.0 * laplace_exponent(t, l) +
                            laplace_exponent(t, l - h2)) /
                           (h2 * h2);
        CHECK(d2 == Approx(fd2).epsilon(1e-4).margin(1e-6));
    };
    for (double l : {-0.8, -0.2, 0.0, 0.3, 0.9}) {
        fd_check(brownian, l);
        fd_check(unit_atom, l);
        fd_check(two_sided, l);
        fd_check(gauss_cp, l);
        fd_check(ts_low, l);
        fd_check(ts_one, l);
    }
}

TEST_CASE("exponent basics: zero at zero, convex, compensated mean") {
    for (const auto* t : {&brownian, &unit_atom, &two_sided, &gauss_cp, &ts_low, &ts_high, &ts_one}) {
        CHECK(laplace_exponent(*t, 0.0) == 0.0);
        for (double l : {-0.5, 0.0, 0.8}) {
            if (!exponent_domain(*t).interior(l)) continue;
            CHECK(laplace_exponent_d2(*t, l) >= 0.0);
        }
        CHECK(mean_increment(*t) == Approx(-t->drift_a).margin(1e-14));
    }
    // compensated jumps contribute nothing to the mean
    LevyTriplet cp{0.0, 0.0, PointMassJumps{2.0, 0.5}};
    CHECK(mean_increment(cp) == 0.0);
}

TEST_CASE("esscher transform: family closure and exponent identity") {
    // canonical example: tilt by 1/2 removes the unit drift
    const LevyTriplet tilted = esscher(brownian, 0.5);
    CHECK(tilted.drift_a == Approx(0.0).margin(1e-15));
    CHECK(tilted.sigma == brownian.sigma);

    const LevyTriplet atom_tilted = esscher(unit_atom, 1.0);
    CHECK(std::get<PointMassJumps>(atom_tilted.jumps).rate == Approx(std::exp(1.0)));
    CHECK(std::get<PointMassJumps>(atom_tilted.jumps).size == 1.0);

    const auto tse = std::get<TwoSidedExpJumps>(esscher(two_sided, 0.5).jumps);
    CHECK(tse.eta_plus == Approx(2.5));
    CHECK(tse.eta_minus == Approx(2.5));

    const auto tst = std::get<TemperedStableJumps>(esscher(ts_low, 0.3).jumps);
    CHECK(tst.tempering == Approx(1.1));
    const auto tsn = std::get<TemperedStableJumps>(esscher(ts_one, -0.3).jumps);
    CHECK(tsn.tempering == Approx(1.5));

    auto identity_check = [](const LevyTriplet& t, double theta) {
        const LevyTriplet tt = esscher(t, theta);
        const double phi_theta = laplace_exponent(t, theta);
        for (double l : {-0.4, -0.1, 0.2, 0.6}) {
            if (!exponent_domain(t).interior(l + theta)) continue;
            const double lhs = laplace_exponent(tt, l);
            const double rhs = laplace_exponent(t, l + theta) - phi_theta;
            CHECK(lhs == Approx(rhs).margin(1e-10).epsilon(1e-10));
        }
        // tilted mean equals the slope at the tilt point
        CHECK(mean_increment(tt) ==
              Approx(laplace_exponent_d1(t, theta)).margin(1e-10).epsilon(1e-10));
    };
    for (double th : {-0.5, -0.2, 0.3, 0.7}) {
        identity_check(brownian, th);
        identity_check(unit_atom, th);
        identity_check(gauss_cp, th);
        if (th > -2.0 && th < 3.0) identity_check(two_sided, th);
        if (th < 1.4) identity_check(ts_low, th);
        if (th > -1.8) identity_check(ts_one, th);
    }

    CHECK_THROWS_AS(esscher(two_sided, 3.0), DomainError);
    CHECK_THROWS_AS(esscher(ts_low, 1.4), DomainError);  // boundary is not interior
}

TEST_CASE("dual process reflects the exponent") {
    for (const auto* t : {&brownian, &unit_atom, &two_sided, &gauss_cp, &ts_low, &ts_one}) {
        const LevyTriplet d = dual(*t);
        for (double l : {-1.0, -0.3, 0.2, 0.8}) {
            const double lhs = laplace_exponent(d, l);
            const double rhs = laplace_exponent(*t, -l);
            if (std::isinf(lhs) || std::isinf(rhs)) {
                CHECK(std::isinf(lhs));
                CHECK(std::isinf(rhs));
            } else {
                CHECK(lhs == Approx(rhs).margin(1e-12).epsilon(1e-12));
            }
        }
        CHECK(mean_increment(d) == Approx(-mean_increment(*t)).margin(1e-14));
    }
}

TEST_CASE("find_rho on the canonical drifting Brownian configuration") {
    const double rho = find_rho(brownian, 1.0);
    CHECK(rho == Approx(0.5).epsilon(1e-12));
    CHECK(laplace_exponent(brownian, rho) == Approx(-0.25).epsilon(1e-12));
    CHECK_THROWS_AS(find_rho(LevyTriplet{-1.0, std::sqrt(2.0), NoJumps{}}, 1.0), DomainError);
}

TEST_CASE("regime classification over the canonical Brownian ladder") {
    auto mk = [](double a) { return LevyTriplet{a, std::sqrt(2.0), NoJumps{}}; };

    const Regime r1 = classify_regime(mk(-1.0), 1.0);
    CHECK(r1.kind == RegimeKind::Supercritical);
    CHECK(r1.mean == Approx(1.0));
    CHECK(r1.decay_rate == 0.0);
    CHECK(r1.poly_exponent == 0.0);

    const Regime r2 = classify_regime(mk(0.0), 1.0);
    CHECK(r2.kind == RegimeKind::Critical);
    CHECK(r2.poly_exponent == -0.5);
    CHECK(r2.curvature == Approx(2.0));

    const Regime r3 = classify_regime(mk(1.0), 1.0);
    CHECK(r3.kind == RegimeKind::WeaklySubcritical);
    REQUIRE(r3.rho.has_value());
    CHECK(*r3.rho == Approx(0.5).epsilon(1e-10));
    CHECK(r3.decay_rate == Approx(-0.25));
    CHECK(r3.poly_exponent == -1.5);
    CHECK(r3.curvature == Approx(2.0));

    const Regime r4 = classify_regime(mk(2.0), 1.0);
    CHECK(r4.kind == RegimeKind::IntermediatelySubcritical);
    CHECK(r4.decay_rate == Approx(-1.0));
    CHECK(r4.poly_exponent == -0.5);

    const Regime r5 = classify_regime(mk(3.0), 1.0);
    CHECK(r5.kind == RegimeKind::StronglySubcritical);
    CHECK(r5.decay_rate == Approx(-2.0));
    CHECK(r5.poly_exponent == 0.0);

    // tolerance band around the critical boundary
    CHECK(classify_regime(mk(1e-9), 1.0).kind == RegimeKind::Critical);
    CHECK(classify_regime(mk(-1e-9), 1.0).kind == RegimeKind::Critical);
    CHECK(classify_regime(mk(-1e-7), 1.0).kind == RegimeKind::Supercritical);

    // classification is invariant under time rescaling of the exponent
    auto scale = [](const LevyTriplet& t, double c) {
        LevyTriplet s = t;
        s.drift_a *= c;
        s.sigma *= std::sqrt(c);
        return s;
    };
    for (double a : {-1.0, 0.0, 1.0, 2.0, 3.0}) {
        const Regime base = classify_regime(mk(a), 1.0);
        const Regime scaled = classify_regime(scale(mk(a), 3.5), 1.0);
        CHECK(scaled.kind == base.kind);
    }

    CHECK_THROWS_AS(classify_regime(two_sided, 4.0), DomainError);
    CHECK_THROWS_AS(classify_regime(brownian, -1.0), ValidationError);
}

TEST_CASE("a jump-bearing configuration classifies consistently") {
    // two-sided exponential jumps with a strong downward drift
    LevyTriplet t{1.5, 0.5, TwoSidedExpJumps{1.0, 0.5, 4.0, 4.0}};
    const Regime r = classify_regime(t, 1.0);
    CHECK(r.mean == Approx(-1.5));
    const double d1 = laplace_exponent_d1(t, 1.0);
    if (d1 > 1e-8)
        CHECK(r.kind == RegimeKind::WeaklySubcritical);
    else if (d1 < -1e-8)
        CHECK(r.kind == RegimeKind::StronglySubcritical);

    if (r.rho) {
        CHECK(std::fabs(laplace_exponent_d1(t, *r.rho)) < 1e-9);
        CHECK(laplace_exponent(t, *r.rho) < 0.0);
    }
}

TEST_CASE("validation rejects malformed specifications") {
    CHECK_THROWS_AS(validate(LevyTriplet{0.0, -1.0, NoJumps{}}), ValidationError);
    CHECK_THROWS_AS(validate(JumpSpec{PointMassJumps{1.0, 0.0}}), ValidationError);
    CHECK_THROWS_AS(validate(JumpSpec{TwoSidedExpJumps{1.0, 1.5, 1.0, 1.0}}), ValidationError);
    CHECK_THROWS_AS(validate(JumpSpec{GaussianJumps{1.0, 0.0, 0.0}}), ValidationError);
    CHECK_THROWS_AS(validate(JumpSpec{TemperedStableJumps{1.0, 2.0, 1.0, true}}), ValidationError);
    CHECK_THROWS_AS(validate(JumpSpec{TemperedStableJumps{1.0, 0.5, -1.0, true}}), ValidationError);
}
