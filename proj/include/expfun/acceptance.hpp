#pragma once

// Acceptance suite: one runner per numbered criterion, each returning a
// pass/fail verdict with a one-line summary. Every tolerance is pinned here,
// next to the check that uses it.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "expfun/asymptotics.hpp"
#include "expfun/cbre.hpp"
#include "expfun/fit.hpp"
#include "expfun/levy.hpp"
#include "expfun/quadrature.hpp"
#include "expfun/rng.hpp"
#include "expfun/simulate.hpp"

namespace expfun::acceptance {

struct CriterionResult {
    int id = 0;
    bool pass = true;
    std::string detail;
    double seconds = 0.0;
};

namespace detail {

// Collects sub-check outcomes into one line; any failure fails the criterion.
struct Checker {
    bool pass = true;
    std::string notes;

    void req(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            append("FAIL " + what);
        }
    }
    void note(const std::string& what) { append(what); }
    void append(const std::string& s) {
        if (!notes.empty()) notes += "; ";
        notes += s;
    }
};

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

inline LevyTriplet brownian(double a, double sigma) {
    LevyTriplet t;
    t.drift_a = a;
    t.sigma = sigma;
    return t;
}

inline SimConfig sim(double h, double horizon, std::uint64_t n, std::uint64_t seed) {
    SimConfig c;
    c.step_h = h;
    c.horizon_t = horizon;
    c.n_paths = n;
    c.seed = seed;
    return c;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

// Mean and standard error of g over n sampled paths of the walk at step h,
// where g sees the full increment stream of one path.
template <class G>
MeanSe sample_paths(const LevyTriplet& t, double h, double cutoff, std::size_t steps,
                    std::uint64_t n, std::uint64_t seed, G&& g) {
    IncrementSampler inc(t, h, cutoff);
    double sum = 0.0, sumsq = 0.0;
    for (std::uint64_t p = 0; p < n; ++p) {
        Philox eng(seed, streams::main_paths + p);
        const double v = g(inc, eng, steps);
        sum += v;
        sumsq += v * v;
    }
    const double nn = static_cast<double>(n);
    MeanSe r;
    r.mean = sum / nn;
    r.se = std::sqrt(std::max(0.0, (sumsq - nn * r.mean * r.mean) / (nn - 1.0)) / nn);
    return r;
}

// Inverse-gamma oracle with unit scale: density z^{-gamma-1} e^{-1/z} / Gamma(gamma).
inline double inverse_gamma_integral(double gamma, const std::function<double(double)>& g) {
    const double norm = std::tgamma(gamma);
    const auto f = [&](double z) {
        if (z <= 0.0) return 0.0;
        return g(z) * std::pow(z, -gamma - 1.0) * std::exp(-1.0 / z) / norm;
    };
    return integrate(f, 0.0, 2.0, 1e-12) + integrate_upper(f, 2.0, 1e-12);
}

}  // namespace detail

// Criterion 1: Phi, Phi', Phi'' match closed forms on Brownian and single-atom
// compound Poisson families to mixed relative error 1e-12 over a lambda grid.
inline CriterionResult criterion_01() {
    using namespace detail;
    Checker ck;
    const std::vector<double> lambdas{-3.0, -2.2, -1.5, -0.8, -0.3, 0.4, 1.1, 1.9, 2.6, 3.0};
    constexpr double tol = 1e-12;
    double worst = 0.0;
    const auto relerr = [](double got, double want) {
        return std::fabs(got - want) / std::max(1.0, std::fabs(want));
    };
    struct Cfg {
        double a, sigma, rate, size;  // rate = 0: pure Brownian
    };
    const std::vector<Cfg> cfgs{{0.0, 1.0, 0.0, 0.0},
                                {1.0, std::sqrt(2.0), 0.0, 0.0},
                                {-2.0, 0.5, 0.0, 0.0},
                                {3.0, 2.0, 0.0, 0.0},
                                {1.0, 1.0, 1.0, std::log(2.0)},
                                {-0.5, std::sqrt(2.0), 2.5, -0.7}};
    for (const auto& c : cfgs) {
        LevyTriplet t = brownian(c.a, c.sigma);
        if (c.rate > 0.0) t.jumps = PointMassJumps{c.rate, c.size};
        for (double l : lambdas) {
            const double e = std::exp(l * c.size);
            const double phi = -c.a * l + 0.5 * c.sigma * c.sigma * l * l +
                               c.rate * (e - 1.0 - l * c.size);
            const double d1 = -c.a + c.sigma * c.sigma * l + c.rate * c.size * (e - 1.0);
            const double d2 = c.sigma * c.sigma + c.rate * c.size * c.size * e;
            worst = std::max(worst, relerr(laplace_exponent(t, l), phi));
            worst = std::max(worst, relerr(laplace_exponent_d1(t, l), d1));
            worst = std::max(worst, relerr(laplace_exponent_d2(t, l), d2));
        }
    }
    ck.req(worst <= tol, "closed-form mismatch " + num(worst) + " > " + num(tol));
    ck.note("max relative error " + num(worst));
    return {1, ck.pass, ck.notes, 0.0};
}

// Criterion 2: the Esscher identity to 1e-10 on a (theta, lambda) grid for all
// families, and the exponential martingale mean within 3 se of 1 at n = 1e5.
inline CriterionResult criterion_02() {
    using namespace detail;
    Checker ck;
    struct Fam {
        const char* name;
        LevyTriplet t;
        double theta;
        double cutoff;
    };
    std::vector<Fam> fams;
    fams.push_back({"brownian", brownian(1.0, std::sqrt(2.0)), 0.7, 0.0});
    {
        LevyTriplet t = brownian(0.5, 0.5);
        t.jumps = PointMassJumps{1.0, std::log(2.0)};
        fams.push_back({"point_mass", t, 0.6, 0.0});
    }
    {
        LevyTriplet t = brownian(-0.2, 0.3);
        t.jumps = TwoSidedExpJumps{2.0, 0.4, 3.0, 2.5};
        fams.push_back({"two_sided_exp", t, 1.2, 0.0});
    }
    {
        LevyTriplet t = brownian(0.3, 0.0);
        t.jumps = GaussianJumps{1.0, 0.1, 0.4};
        fams.push_back({"gaussian", t, 0.5, 0.0});
    }
    {
        LevyTriplet t = brownian(0.1, 0.2);
        t.jumps = TemperedStableJumps{0.3, 0.5, 2.0, true};
        fams.push_back({"tempered_stable", t, 0.8, 1e-3});
    }

    constexpr double id_tol = 1e-10;
    double worst = 0.0;
    const std::vector<double> dl{-0.5, -0.2, 0.3, 0.6, 1.0};
    for (const auto& f : fams) {
        for (double theta : {f.theta, -0.3}) {
            const LevyTriplet tilted = esscher(f.t, theta);
            const double phi_theta = laplace_exponent(f.t, theta);
            for (double l : dl) {
                if (!exponent_domain(f.t).interior(l + theta)) continue;
                const double lhs = laplace_exponent(tilted, l);
                const double rhs = laplace_exponent(f.t, l + theta) - phi_theta;
                worst = std::max(worst, std::fabs(lhs - rhs));
            }
        }
    }
    ck.req(worst <= id_tol, "Esscher identity error " + num(worst) + " > " + num(id_tol));
    ck.note("identity error " + num(worst));

    const double h = 0.005;
    const std::size_t steps = 200;  // horizon 1
    for (std::size_t i = 0; i < fams.size(); ++i) {
        const auto& f = fams[i];
        const double phi_theta = laplace_exponent(f.t, f.theta);
        const auto r = sample_paths(f.t, h, f.cutoff, steps, 100000, 92000 + i,
                                    [&](IncrementSampler& inc, Philox& eng, std::size_t n) {
                                        double pos = 0.0;
                                        for (std::size_t k = 0; k < n; ++k) pos += inc(eng);
                                        return std::exp(f.theta * pos - phi_theta);
                                    });
        ck.req(std::fabs(r.mean - 1.0) <= 3.0 * r.se,
               std::string(f.name) + " martingale mean " + num(r.mean) + " +- " + num(r.se));
    }
    return {2, ck.pass, ck.notes, 0.0};
}

// Criterion 3: Dufresne law. Brownian xi with mean 5, sigma^2 = 2 gives
// A_inf ~ inverse-gamma(5); MC mean and variance within 3 se of quadrature,
// E[F(A_inf)] for the branching tail F within 2%.
inline CriterionResult criterion_03() {
    using namespace detail;
    Checker ck;
    const LevyTriplet t = brownian(-5.0, std::sqrt(2.0));  // mean +5
    const double gamma = 2.0 * 5.0 / 2.0;
    const double or_mean = inverse_gamma_integral(gamma, [](double z) { return z; });
    const double or_m2 = inverse_gamma_integral(gamma, [](double z) { return z * z; });
    const double or_var = or_m2 - or_mean * or_mean;
    const FSpec f = CbreTailF{1.0, 1.0, 1.0};
    const double or_ef = inverse_gamma_integral(gamma, [&](double z) { return eval_f(f, z); });

    const SimConfig c = sim(0.001, 1.0, 100000, 93001);
    double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0, sf = 0.0, sf2 = 0.0;
    for (std::uint64_t i = 0; i < c.n_paths; ++i) {
        const double a = exp_functional_inf(t, 1.0, c, i).value;
        s1 += a;
        s2 += a * a;
        s3 += a * a * a;
        s4 += a * a * a * a;
        const double v = eval_f(f, a);
        sf += v;
        sf2 += v * v;
    }
    const double n = static_cast<double>(c.n_paths);
    const double mean = s1 / n;
    const double var = (s2 - n * mean * mean) / (n - 1.0);
    const double se_mean = std::sqrt(var / n);
    // Fourth central moment for the variance's standard error.
    const double m2 = s2 / n, m3 = s3 / n, m4 = s4 / n;
    const double c4 = m4 - 4.0 * mean * m3 + 6.0 * mean * mean * m2 - 3.0 * std::pow(mean, 4);
    const double se_var = std::sqrt(std::max(0.0, c4 - var * var) / n);
    const double ef = sf / n;
    const double se_ef = std::sqrt(std::max(0.0, (sf2 - n * ef * ef) / (n - 1.0)) / n);

    ck.req(std::fabs(mean - or_mean) <= 3.0 * se_mean,
           "mean " + num(mean) + " vs oracle " + num(or_mean) + " (3se " + num(3 * se_mean) + ")");
    ck.req(std::fabs(var - or_var) <= 3.0 * se_var,
           "variance " + num(var) + " vs oracle " + num(or_var) + " (3se " + num(3 * se_var) + ")");
    ck.req(std::fabs(ef - or_ef) <= 0.02 * or_ef,
           "E[F] " + num(ef) + " vs oracle " + num(or_ef) + " (2%)");
    ck.note("mean " + num(mean) + "/" + num(or_mean) + ", var " + num(var) + "/" + num(or_var) +
            ", E[F] " + num(ef) + "/" + num(or_ef) + " (se " + num(se_ef) + ")");
    return {3, ck.pass, ck.notes, 0.0};
}

// Criterion 4: supercritical curve decreases monotonically (within 2 se) to
// the Dufresne-oracle plateau, agreeing within 3 se at t = 50.
inline CriterionResult criterion_04(unsigned workers) {
    using namespace detail;
    Checker ck;
    const LevyTriplet t = brownian(-1.0, std::sqrt(2.0));  // mean +1, gamma = 1
    const FSpec f = PowerTailF{1.0, 1.0, 1.0, 0.0, {}};
    const double or_ef =
        inverse_gamma_integral(1.0, [&](double z) { return eval_f(f, z); });
    const std::vector<double> grid{5.0, 10.0, 15.0, 20.0, 30.0, 40.0, 50.0};
    const auto curve =
        estimate_expectation_curve(t, f, 1.0, grid, sim(0.01, 0.0, 100000, 94001), {}, workers);
    for (std::size_t k = 0; k + 1 < curve.points.size(); ++k) {
        const auto& a = curve.points[k];
        const auto& b = curve.points[k + 1];
        ck.req(b.value <= a.value + 2.0 * std::hypot(a.se, b.se),
               "not monotone at t " + num(b.t));
    }
    const auto& last = curve.points.back();
    ck.req(std::fabs(last.value - or_ef) <= 3.0 * last.se,
           "plateau " + num(last.value) + " vs oracle " + num(or_ef) + " (3se " +
               num(3 * last.se) + ")");
    ck.note("plateau " + num(last.value) + " vs oracle " + num(or_ef));
    return {4, ck.pass, ck.notes, 0.0};
}

// Criterion 5: critical config, free-fit polynomial exponent of E[F(A_t)] is
// -0.5 +- 0.1 over t in [10, 200] at n = 1e6; the first-passage tail
// P(tau_{-1} > t) exponent is -0.5 +- 0.1 as well.
inline CriterionResult criterion_05(unsigned workers) {
    using namespace detail;
    Checker ck;
    const LevyTriplet t = brownian(0.0, std::sqrt(2.0));
    const FSpec f = PowerTailF{1.0, 1.0, 1.0, 0.0, {}};
    const std::vector<double> grid{10.0, 14.0, 20.0, 28.0, 40.0, 57.0, 80.0, 113.0, 160.0, 200.0};
    const auto curve =
        estimate_expectation_curve(t, f, 1.0, grid, sim(0.02, 0.0, 1000000, 95001), {}, workers);
    const auto fit = fit_decay(curve);
    ck.req(std::fabs(fit.poly_exponent + 0.5) <= 0.1,
           "curve exponent " + num(fit.poly_exponent) + " not in -0.5 +- 0.1");
    ck.note("curve exponent " + num(fit.poly_exponent) + " +- " + num(fit.poly_se));

    const auto fp =
        first_passage_asymptotics(t, 1.0, grid, sim(0.02, 0.0, 1000000, 95002), workers);
    ck.req(std::fabs(fp.fit.poly_exponent + 0.5) <= 0.1,
           "first-passage exponent " + num(fp.fit.poly_exponent) + " not in -0.5 +- 0.1");
    ck.note("first-passage exponent " + num(fp.fit.poly_exponent) + " +- " +
            num(fp.fit.poly_se));
    return {5, ck.pass, ck.notes, 0.0};
}

// Criterion 6: weakly subcritical config under the saddle tilt: fitted rate
// -0.25 within 5% relative and polynomial exponent -1.5 +- 0.3 over [10, 100].
inline CriterionResult criterion_06(unsigned workers) {
    using namespace detail;
    Checker ck;
    const LevyTriplet t = brownian(1.0, std::sqrt(2.0));
    const FSpec f = PowerTailF{1.0, 1.0, 1.0, 0.0, {}};
    const std::vector<double> grid{10.0, 14.0, 19.0, 26.0, 36.0, 50.0, 69.0, 100.0};
    const auto curve = estimate_expectation_curve(t, f, 1.0, grid,
                                                  sim(0.01, 0.0, 1000000, 96001), 0.5, workers);
    const auto fit = fit_decay(curve);
    ck.req(std::fabs(fit.rate + 0.25) <= 0.05 * 0.25,
           "rate " + num(fit.rate) + " not within 5% of -0.25");
    ck.req(std::fabs(fit.poly_exponent + 1.5) <= 0.3,
           "exponent " + num(fit.poly_exponent) + " not in -1.5 +- 0.3");
    ck.note("rate " + num(fit.rate) + " +- " + num(fit.rate_se) + ", exponent " +
            num(fit.poly_exponent) + " +- " + num(fit.poly_se));
    return {6, ck.pass, ck.notes, 0.0};
}

// Criterion 7: intermediately subcritical config: after removing e^{-t} the
// fitted exponent is -0.5 +- 0.15.
inline CriterionResult criterion_07(unsigned workers) {
    using namespace detail;
    Checker ck;
    const LevyTriplet t = brownian(2.0, std::sqrt(2.0));
    const FSpec f = PowerTailF{1.0, 1.0, 1.0, 0.0, {}};
    const std::vector<double> grid{10.0, 14.0, 19.0, 26.0, 36.0, 50.0, 69.0, 100.0};
    const auto curve = estimate_expectation_curve(t, f, 1.0, grid,
                                                  sim(0.01, 0.0, 200000, 97001), 1.0, workers);
    const auto fit = fit_decay(curve, -1.0);
    ck.req(std::fabs(fit.poly_exponent + 0.5) <= 0.15,
           "exponent " + num(fit.poly_exponent) + " not in -0.5 +- 0.15");
    ck.note("exponent with rate pinned to -1: " + num(fit.poly_exponent) + " +- " +
            num(fit.poly_se));
    return {7, ck.pass, ck.notes, 0.0};
}

// Criterion 8: strongly subcritical config: free-fit rate -2 within 5% and
// exponent 0 +- 0.2; e^{2t} E[F(A_t)] plateau matches K x (direct MC of the
// regime-5 constant) within 15%.
inline CriterionResult criterion_08(unsigned workers) {
    using namespace detail;
    Checker ck;
    const LevyTriplet t = brownian(3.0, std::sqrt(2.0));
    const FSpec f = PowerTailF{1.0, 1.0, 1.0, 0.0, {}};
    const std::vector<double> grid{3.0, 5.0, 8.0, 12.0, 17.0, 23.0, 30.0};
    const auto curve = estimate_expectation_curve(t, f, 1.0, grid,
                                                  sim(0.01, 0.0, 100000, 98001), 1.0, workers);
    const auto fit = fit_decay(curve);
    ck.req(std::fabs(fit.rate + 2.0) <= 0.05 * 2.0, "rate " + num(fit.rate) + " not within 5% of -2");
    ck.req(std::fabs(fit.poly_exponent) <= 0.2,
           "exponent " + num(fit.poly_exponent) + " not in 0 +- 0.2");

    const auto r5 = coeff_regime5(t, 1.0, 1.0, sim(0.005, 0.0, 100000, 98002), tail_K(f), workers);
    const auto& last = curve.points.back();
    const double plateau = std::exp(2.0 * last.t) * last.value;
    ck.req(std::fabs(plateau - r5.value) <= 0.15 * std::fabs(r5.value),
           "plateau " + num(plateau) + " vs K*MC " + num(r5.value) + " (15%)");
    ck.note("rate " + num(fit.rate) + ", exponent " + num(fit.poly_exponent) + ", plateau " +
            num(plateau) + " vs " + num(r5.value));
    return {8, ck.pass, ck.notes, 0.0};
}

// Criterion 9: moment bounds and the time-reversal identity on every canonical
// config at 3 combined standard errors, n = 1e5, alpha = beta = 1.
inline CriterionResult criterion_09() {
    using namespace detail;
    Checker ck;
    const double h = 0.01;
    const std::uint64_t n = 100000;
    int cfg_idx = 0;
    for (double a : {-1.0, 0.0, 1.0, 2.0, 3.0}) {
        const LevyTriplet t = brownian(a, std::sqrt(2.0));
        const std::uint64_t seed = 99000 + 10 * cfg_idx++;
        // Drift coefficient of the triplet: xi(t) + a t is a martingale, which
        // is what the Doob step of the sup bound uses.
        const double ap = t.drift_a;
        const double phi1 = laplace_exponent(t, 1.0);
        const std::string tag = "a=" + num(a) + ": ";

        // Shared t = 2 ensemble: A (left sum), sup, and the tilted reversal.
        const double t2 = 2.0;
        const std::size_t n2 = grid_steps(t2, h);
        double sA = 0.0, sA2 = 0.0, sS = 0.0, sS2 = 0.0;
        {
            IncrementSampler inc(t, h, 0.0);
            for (std::uint64_t p = 0; p < n; ++p) {
                Philox eng(seed, streams::main_paths + p);
                double pos = 0.0, acc = 0.0, sup = 0.0;
                for (std::size_t k = 0; k < n2; ++k) {
                    acc += h * std::exp(-pos);
                    pos += inc(eng);
                    sup = std::max(sup, pos);
                }
                const double ia = 1.0 / acc;
                const double es = std::exp(sup);
                sA += ia;
                sA2 += ia * ia;
                sS += es;
                sS2 += es * es;
            }
        }
        const double nn = static_cast<double>(n);
        const double mA = sA / nn, seA = std::sqrt((sA2 - nn * mA * mA) / (nn - 1.0) / nn);
        const double mS = sS / nn, seS = std::sqrt((sS2 - nn * mS * mS) / (nn - 1.0) / nn);

        // Doob bound: P[A_t^{-1}] <= t^{-1} P[e^{S(t)}] <= 4 t^{-1} e^{(a+|a|)t} e^{Phi(1)t}.
        ck.req(mA <= mS / t2 + 3.0 * std::hypot(seA, seS / t2), tag + "sup bound violated");
        const double doob = 4.0 * std::exp((ap + std::fabs(ap)) * t2) * std::exp(phi1 * t2) / t2;
        ck.req(mS / t2 <= doob + 3.0 * seS / t2, tag + "Doob bound violated");

        // Time reversal: e^{-Phi(1)t} P[A_t^{-1}] = P^{(1)}[B_t^{-1}] with B the
        // right-endpoint sum of e^{+xi} under the tilted law (the discrete
        // reversal maps the left sum to exactly that index set).
        const auto rhs = sample_paths(
            esscher(t, 1.0), h, 0.0, n2, n, seed + 1,
            [&](IncrementSampler& inc, Philox& eng, std::size_t m) {
                double pos = 0.0, acc = 0.0;
                for (std::size_t k = 0; k < m; ++k) {
                    pos += inc(eng);
                    acc += h * std::exp(pos);
                }
                return 1.0 / acc;
            });
        const double lhs = std::exp(-phi1 * t2) * mA;
        const double lhs_se = std::exp(-phi1 * t2) * seA;
        ck.req(std::fabs(lhs - rhs.mean) <= 3.0 * std::hypot(lhs_se, rhs.se),
               tag + "reversal identity: " + num(lhs) + " vs " + num(rhs.mean));

        // Block bound at t = 4: P[A_t^{-1}] <= P[e^{min_k xi(k)}] P[e^{S(1)}].
        const double t4 = 4.0;
        const std::size_t n4 = grid_steps(t4, h);
        const std::size_t per_unit = grid_steps(1.0, h);
        const auto blk = sample_paths(t, h, 0.0, n4, n, seed + 2,
                                      [&](IncrementSampler& inc, Philox& eng, std::size_t m) {
                                          double pos = 0.0, acc = 0.0, mink = 0.0;
                                          for (std::size_t k = 0; k < m; ++k) {
                                              acc += h * std::exp(-pos);
                                              pos += inc(eng);
                                              if ((k + 1) % per_unit == 0 && k + 1 < m)
                                                  mink = std::min(mink, pos);
                                          }
                                          return 1.0 / acc;
                                      });
        // Means of the two independent factors.
        const auto emin = sample_paths(t, h, 0.0, n4, n, seed + 3,
                                       [&](IncrementSampler& inc, Philox& eng, std::size_t m) {
                                           double pos = 0.0, mink = 0.0;
                                           for (std::size_t k = 0; k < m; ++k) {
                                               pos += inc(eng);
                                               if ((k + 1) % per_unit == 0 && k + 1 < m)
                                                   mink = std::min(mink, pos);
                                           }
                                           return std::exp(mink);
                                       });
        const auto es1 = sample_paths(t, h, 0.0, per_unit, n, seed + 4,
                                      [&](IncrementSampler& inc, Philox& eng, std::size_t m) {
                                          double pos = 0.0, sup = 0.0;
                                          for (std::size_t k = 0; k < m; ++k) {
                                              pos += inc(eng);
                                              sup = std::max(sup, pos);
                                          }
                                          return std::exp(sup);
                                      });
        const double prod = emin.mean * es1.mean;
        const double prod_se = std::hypot(emin.se * es1.mean, es1.se * emin.mean);
        ck.req(blk.mean <= prod + 3.0 * std::hypot(blk.se, prod_se),
               tag + "block bound violated: " + num(blk.mean) + " vs " + num(prod));
    }
    ck.note("bounds and reversal identity hold on all five canonical configs");
    return {9, ck.pass, ck.notes, 0.0};
}

// Criterion 10: D2/D4 pre-limit sequences strictly positive, increasing within
// error bands and bounded; coefficient constants agree with fitted curve
// plateaus at 15% (D2, regime 5) and 25% (D3, D4). Absolute D values have no
// independent reference, so all checks are two-sided consistency checks.
inline CriterionResult criterion_10(unsigned workers) {
    using namespace detail;
    Checker ck;
    const FSpec f = PowerTailF{1.0, 1.0, 1.0, 0.0, {}};
    const std::vector<double> xg{1.0, 2.0, 3.0, 4.5};

    const auto shape = [&](const CoefficientEstimate& e, const std::string& tag) {
        for (std::size_t i = 0; i < e.pre_limit.size(); ++i)
            ck.req(e.pre_limit[i] > 0.0, tag + " not strictly positive at x " + num(e.x_grid[i]));
        for (std::size_t i = 0; i + 1 < e.pre_limit.size(); ++i)
            ck.req(e.pre_limit[i + 1] >=
                       e.pre_limit[i] - 2.0 * std::hypot(e.pre_limit_se[i], e.pre_limit_se[i + 1]),
                   tag + " not increasing within bands at x " + num(e.x_grid[i + 1]));
        const std::size_t m = e.pre_limit.size();
        const double inc = e.pre_limit[m - 1] - e.pre_limit[m - 2];
        ck.req(inc <= 0.25 * e.pre_limit[m - 1],
               tag + " unbounded: last increment " + num(inc) + " vs value " +
                   num(e.pre_limit[m - 1]));
    };

    // D2 on the critical config, cross-checked against the pinned-fit plateau.
    {
        const LevyTriplet t = brownian(0.0, std::sqrt(2.0));
        const auto d2 = coeff_D2(t, f, 1.0, xg, 1200.0, sim(0.01, 0.0, 6000, 90101), workers);
        shape(d2, "D2");
        const std::vector<double> grid{10.0, 15.0, 25.0, 40.0, 60.0, 90.0, 130.0, 180.0};
        const auto curve = estimate_expectation_curve(t, f, 1.0, grid,
                                                      sim(0.02, 0.0, 200000, 90102), {}, workers);
        const auto fit = fit_decay(curve, 0.0, -0.5);
        const double plateau = std::exp(fit.intercept);
        ck.req(std::fabs(d2.value - plateau) <= 0.15 * plateau,
               "D2 " + num(d2.value) + " vs plateau " + num(plateau) + " (15%)");
        ck.note("D2 " + num(d2.value) + " vs plateau " + num(plateau));
    }
    // D3 on the weakly subcritical config, 25%.
    {
        const LevyTriplet t = brownian(1.0, std::sqrt(2.0));
        std::vector<double> yg;
        // The y-integrand saturates near y = x + ln(10)/alpha and then decays
        // like e^{-rho y} V(y), so the grid covers saturation for the largest x
        // with decay room to keep the tail share below the 5% refinement gate.
        for (int j = 1; j <= 14; ++j) yg.push_back(1.25 * j);
        const auto d3 = coeff_D3(t, f, 1.0, 0.5, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0}, yg, 1800.0,
                                 sim(0.01, 0.0, 3000, 90201), workers);
        ck.req(!d3.tail_refinement, "D3 spatial-integral tail not resolved");
        const std::vector<double> grid{10.0, 14.0, 19.0, 26.0, 36.0, 50.0, 69.0, 100.0};
        const auto curve = estimate_expectation_curve(t, f, 1.0, grid,
                                                      sim(0.01, 0.0, 200000, 90202), 0.5, workers);
        const auto fit = fit_decay(curve, -0.25, -1.5);
        const double plateau = std::exp(fit.intercept);
        ck.req(std::fabs(d3.value - plateau) <= 0.25 * plateau,
               "D3 " + num(d3.value) + " vs plateau " + num(plateau) + " (25%)");
        ck.note("D3 " + num(d3.value) + " vs plateau " + num(plateau));
    }
    // D4 on the intermediately subcritical config, 25%; the estimator is
    // K-free and K = 1 for this payoff.
    {
        const LevyTriplet t = brownian(2.0, std::sqrt(2.0));
        const auto d4 = coeff_D4(t, 1.0, 1.0, xg, 1200.0, sim(0.01, 0.0, 6000, 90301), workers);
        shape(d4, "D4");
        const std::vector<double> grid{10.0, 14.0, 19.0, 26.0, 36.0, 50.0, 69.0, 100.0};
        const auto curve = estimate_expectation_curve(t, f, 1.0, grid,
                                                      sim(0.01, 0.0, 200000, 90302), 1.0, workers);
        const auto fit = fit_decay(curve, -1.0, -0.5);
        const double plateau = std::exp(fit.intercept);
        const double kd4 = tail_K(f) * d4.value;
        ck.req(std::fabs(kd4 - plateau) <= 0.25 * plateau,
               "K*D4 " + num(kd4) + " vs plateau " + num(plateau) + " (25%)");
        ck.note("K*D4 " + num(kd4) + " vs plateau " + num(plateau));
    }
    // Regime-5 constant on the strongly subcritical config, 15%.
    {
        const LevyTriplet t = brownian(3.0, std::sqrt(2.0));
        const auto r5 = coeff_regime5(t, 1.0, 1.0, sim(0.005, 0.0, 50000, 90401), tail_K(f),
                                      workers);
        const std::vector<double> grid{3.0, 5.0, 8.0, 12.0, 17.0, 23.0, 30.0};
        const auto curve = estimate_expectation_curve(t, f, 1.0, grid,
                                                      sim(0.01, 0.0, 100000, 90402), 1.0, workers);
        const auto fit = fit_decay(curve, -2.0, 0.0);
        const double plateau = std::exp(fit.intercept);
        ck.req(std::fabs(r5.value - plateau) <= 0.15 * plateau,
               "regime-5 constant " + num(r5.value) + " vs plateau " + num(plateau) + " (15%)");
        ck.note("regime5 " + num(r5.value) + " vs plateau " + num(plateau));
    }
    return {10, ck.pass, ck.notes, 0.0};
}

// Criterion 11: CBRE closed form to 1e-6 on the zero environment, flow
// property to 1e-12 relative, ODE residual of first order under refinement.
inline CriterionResult criterion_11(unsigned workers) {
    using namespace detail;
    Checker ck;
    {
        CbreParams p;
        p.x0 = 1.5;
        p.c = 0.8;
        p.alpha = 0.5;
        const std::vector<double> grid{0.5, 1.0, 2.0, 4.0, 8.0};
        const auto sc = survival_probability(p, grid, sim(0.005, 0.0, 64, 91101), workers);
        double worst = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double exact =
                1.0 - std::exp(-p.x0 * std::pow(p.c * p.alpha * grid[k], -1.0 / p.alpha));
            worst = std::max(worst, std::fabs(sc.curve.points[k].value - exact));
        }
        ck.req(worst <= 1e-6, "zero-environment closed form error " + num(worst));
        ck.note("closed-form error " + num(worst));
    }
    {
        LevyTriplet t = brownian(0.5, 1.2);
        const auto path = simulate_path(t, sim(0.01, 2.0, 1, 91102), 0.0, 7);
        double worst = 0.0;
        for (double lambda : {0.5, 2.0, inf}) {
            const double direct = u_transform(path, 0.25, 1.75, lambda, 1.3, 0.8);
            const double inner = u_transform(path, 0.75, 1.75, lambda, 1.3, 0.8);
            const double composed = u_transform(path, 0.25, 0.75, inner, 1.3, 0.8);
            worst = std::max(worst, std::fabs(composed - direct) / direct);
        }
        ck.req(worst <= 1e-12, "flow property error " + num(worst));
        ck.note("flow error " + num(worst));
    }
    {
        LevyTriplet drift;
        drift.drift_a = -1.0;  // deterministic xi(s) = s
        const double c = 1.2, alpha = 0.7, tt = 2.0;
        const auto residual = [&](double h) {
            const auto path = simulate_path(drift, sim(h, tt, 1, 1), 0.0);
            double worst = 0.0;
            const std::size_t m = path.times.size() - 1;
            for (std::size_t i = 0; i + 1 < m; ++i) {
                const double r = path.times[i];
                const double u0 = u_transform(path, r, tt, 2.0, c, alpha);
                const double u1 = u_transform(path, r + h, tt, 2.0, c, alpha);
                const double lhs = (u1 - u0) / h;
                const double rhs =
                    c * std::exp(-alpha * path.values[i]) * std::pow(u0, 1.0 + alpha);
                worst = std::max(worst, std::fabs(lhs - rhs));
            }
            return worst;
        };
        const double r1 = residual(0.02), r2 = residual(0.01);
        const double order = std::log2(r1 / r2);
        ck.req(order >= 0.9, "ODE residual order " + num(order) + " < 0.9");
        ck.note("ODE residual order " + num(order));
    }
    return {11, ck.pass, ck.notes, 0.0};
}

// Criterion 12: five engineered Brownian environments produce the five regime
// labels, and the tilted survival-curve fits reproduce the matching rates at
// the tolerances of criteria 5-8.
inline CriterionResult criterion_12(unsigned workers) {
    using namespace detail;
    Checker ck;
    const double s2 = std::sqrt(2.0);
    const auto params = [&](double a0) {
        CbreParams p;
        p.env.beta_drift = a0 + 1.0;  // sigma^2/2 = 1
        p.env.sigma = s2;
        return p;
    };
    const RegimeKind want[5] = {RegimeKind::Supercritical, RegimeKind::Critical,
                                RegimeKind::WeaklySubcritical,
                                RegimeKind::IntermediatelySubcritical,
                                RegimeKind::StronglySubcritical};
    const double a0s[5] = {1.0, 0.0, -1.0, -2.0, -3.0};
    for (int i = 0; i < 5; ++i) {
        const auto r = classify_cbre(params(a0s[i]));
        ck.req(r.kind == want[i],
               "a0 " + num(a0s[i]) + " classified as " + regime_name(r.kind));
    }

    // Supercritical: survival flattens out at a positive level.
    {
        const auto sc = survival_curve_tilted(params(1.0), {5.0, 10.0, 15.0, 20.0, 35.0, 50.0},
                                              sim(0.01, 0.0, 100000, 92101), workers);
        const auto fit = fit_decay(sc.curve);
        ck.req(std::fabs(fit.rate) <= 0.01, "supercritical rate " + num(fit.rate));
        ck.req(sc.curve.points.back().value > 0.05,
               "supercritical survival vanished: " + num(sc.curve.points.back().value));
        ck.note("supercritical rate " + num(fit.rate));
    }
    // Critical: polynomial exponent -0.5 +- 0.1 (criterion 5 tolerance).
    {
        const std::vector<double> grid{10.0, 14.0, 20.0, 28.0, 40.0, 57.0, 80.0, 113.0, 160.0,
                                       200.0};
        const auto sc =
            survival_curve_tilted(params(0.0), grid, sim(0.02, 0.0, 400000, 92201), workers);
        const auto fit = fit_decay(sc.curve);
        ck.req(std::fabs(fit.poly_exponent + 0.5) <= 0.1,
               "critical exponent " + num(fit.poly_exponent) + " not in -0.5 +- 0.1");
        ck.note("critical exponent " + num(fit.poly_exponent));
    }
    // Weakly subcritical: rate -0.25 within 5%, exponent -1.5 +- 0.3
    // (criterion 6 tolerances); the tilt is applied by the survival runner.
    {
        const std::vector<double> grid{10.0, 14.0, 19.0, 26.0, 36.0, 50.0, 69.0, 100.0};
        const auto sc =
            survival_curve_tilted(params(-1.0), grid, sim(0.01, 0.0, 400000, 92301), workers);
        ck.req(sc.curve.tilt.has_value() && std::fabs(*sc.curve.tilt - 0.5) < 1e-9,
               "weakly subcritical tilt not applied");
        const auto fit = fit_decay(sc.curve);
        ck.req(std::fabs(fit.rate + 0.25) <= 0.05 * 0.25,
               "weak rate " + num(fit.rate) + " not within 5% of -0.25");
        ck.req(std::fabs(fit.poly_exponent + 1.5) <= 0.3,
               "weak exponent " + num(fit.poly_exponent) + " not in -1.5 +- 0.3");
        ck.note("weak rate " + num(fit.rate) + ", exponent " + num(fit.poly_exponent));
    }
    // Intermediately subcritical: exponent -0.5 +- 0.15 after removing e^{-t}
    // (criterion 7 tolerance).
    {
        const std::vector<double> grid{10.0, 14.0, 19.0, 26.0, 36.0, 50.0, 69.0, 100.0};
        const auto sc =
            survival_curve_tilted(params(-2.0), grid, sim(0.01, 0.0, 200000, 92401), workers);
        const auto fit = fit_decay(sc.curve, -1.0);
        ck.req(std::fabs(fit.poly_exponent + 0.5) <= 0.15,
               "intermediate exponent " + num(fit.poly_exponent) + " not in -0.5 +- 0.15");
        ck.note("intermediate exponent " + num(fit.poly_exponent));
    }
    // Strongly subcritical: rate -2 within 5%, exponent 0 +- 0.2
    // (criterion 8 tolerances).
    {
        const std::vector<double> grid{3.0, 5.0, 8.0, 12.0, 17.0, 23.0, 30.0};
        const auto sc =
            survival_curve_tilted(params(-3.0), grid, sim(0.01, 0.0, 100000, 92501), workers);
        const auto fit = fit_decay(sc.curve);
        ck.req(std::fabs(fit.rate + 2.0) <= 0.05 * 2.0,
               "strong rate " + num(fit.rate) + " not within 5% of -2");
        ck.req(std::fabs(fit.poly_exponent) <= 0.2,
               "strong exponent " + num(fit.poly_exponent) + " not in 0 +- 0.2");
        ck.note("strong rate " + num(fit.rate) + ", exponent " + num(fit.poly_exponent));
    }
    return {12, ck.pass, ck.notes, 0.0};
}

inline CriterionResult run_criterion(int id, unsigned workers) {
    const auto start = std::chrono::steady_clock::now();
    CriterionResult r;
    switch (id) {
        case 1: r = criterion_01(); break;
        case 2: r = criterion_02(); break;
        case 3: r = criterion_03(); break;
        case 4: r = criterion_04(workers); break;
        case 5: r = criterion_05(workers); break;
        case 6: r = criterion_06(workers); break;
        case 7: r = criterion_07(workers); break;
        case 8: r = criterion_08(workers); break;
        case 9: r = criterion_09(); break;
        case 10: r = criterion_10(workers); break;
        case 11: r = criterion_11(workers); break;
        case 12: r = criterion_12(workers); break;
        default: throw ValidationError("criterion id must be in 1..12");
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

// Runs the given criteria (all twelve when empty), printing one line each.
// Returns the number of failures.
inline int run(std::vector<int> ids, unsigned workers, std::ostream& os) {
    if (ids.empty())
        for (int i = 1; i <= 12; ++i) ids.push_back(i);
    int failures = 0;
    for (int id : ids) {
        const auto r = run_criterion(id, workers);
        char head[64];
        std::snprintf(head, sizeof(head), "%s criterion %02d", r.pass ? "PASS" : "FAIL", r.id);
        os << head << " — " << r.detail << " [" << detail::num(r.seconds) << " s]\n";
        os.flush();
        if (!r.pass) ++failures;
    }
    return failures;
}

}  // namespace expfun::acceptance
