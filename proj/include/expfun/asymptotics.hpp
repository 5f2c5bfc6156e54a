#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <type_traits>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "fit.hpp"
#include "ladder.hpp"
#include "levy.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "simulate.hpp"

namespace expfun {

// Decreasing positive payoff functions F with a power tail F(z) ~ K z^{-beta/alpha}.

// F(z) = K z^{-beta/alpha} for z >= 1, capped as C0 z^{-beta0/alpha} below 1
// (the defaults beta0 = 0, C0 = K keep F continuous and bounded by K there).
struct PowerTailF {
    double K = 1.0;
    double beta = 1.0;
    double alpha = 1.0;
    double beta0 = 0.0;
    std::optional<double> C0;  // empty means K
};

// F(z) = 1 - exp{-x0 (c alpha z)^{-1/alpha}}: tail constant K = x0 (c alpha)^{-1/alpha},
// tail exponent z^{-1/alpha} (beta = 1).
struct CbreTailF {
    double x0 = 1.0;
    double c = 1.0;
    double alpha = 1.0;
};

using FSpec = std::variant<PowerTailF, CbreTailF>;

inline void validate(const FSpec& f) {
    if (const auto* p = std::get_if<PowerTailF>(&f)) {
        if (!(p->K > 0.0) || !(p->beta > 0.0) || !(p->alpha > 0.0))
            throw ValidationError("PowerTailF: K, beta, alpha must be positive");
        if (!(p->beta0 >= 0.0) || !(p->beta0 <= p->beta))
            throw ValidationError("PowerTailF: beta0 must lie in [0, beta]");
        if (p->C0 && !(*p->C0 > 0.0)) throw ValidationError("PowerTailF: C0 must be positive");
    } else {
        const auto& q = std::get<CbreTailF>(f);
        if (!(q.x0 > 0.0) || !(q.c > 0.0) || !(q.alpha > 0.0))
            throw ValidationError("CbreTailF: x0, c, alpha must be positive");
    }
}

inline double eval_f(const FSpec& f, double z) {
    if (!(z > 0.0)) throw DomainError("eval_f: argument must be positive");
    if (const auto* p = std::get_if<PowerTailF>(&f)) {
        if (z >= 1.0) return p->K * std::pow(z, -p->beta / p->alpha);
        return p->C0.value_or(p->K) * std::pow(z, -p->beta0 / p->alpha);
    }
    const auto& q = std::get<CbreTailF>(f);
    return -std::expm1(-q.x0 * std::pow(q.c * q.alpha * z, -1.0 / q.alpha));
}

// Condition 2.6/2.7 tail constant and exponent: F(z) ~ tail_K * z^{-tail_beta/alpha}.
inline double tail_K(const FSpec& f) {
    if (const auto* p = std::get_if<PowerTailF>(&f)) return p->K;
    const auto& q = std::get<CbreTailF>(f);
    return q.x0 * std::pow(q.c * q.alpha, -1.0 / q.alpha);
}

inline double tail_beta(const FSpec& f) {
    if (const auto* p = std::get_if<PowerTailF>(&f)) return p->beta;
    return 1.0;
}

inline double tail_alpha(const FSpec& f) {
    if (const auto* p = std::get_if<PowerTailF>(&f)) return p->alpha;
    return std::get<CbreTailF>(f).alpha;
}

// Grid verification of the payoff/exponent conditions a regime estimator needs.
struct ConditionReport {
    bool lipschitz_away_from_zero = false;   // difference quotients bounded on [delta, inf)
    bool tail_bound = false;                 // F(z) <= K z^{-beta/alpha} for z >= 1
    bool tail_ratio = false;                 // F(z) z^{beta/alpha} -> K
    bool nonlattice = false;                 // sigma > 0 or diffuse jump family
    double K = 0.0;
    double lipschitz_constant = 0.0;
};

inline ConditionReport check_conditions(const FSpec& f, const LevyTriplet& t, double beta) {
    validate(f);
    validate(t);
    if (!(beta > 0.0)) throw ValidationError("check_conditions: beta must be positive");
    ConditionReport rep;
    rep.K = tail_K(f);
    const double a = tail_alpha(f);

    double max_quot = 0.0;
    double prev_z = 1e-3, prev_f = eval_f(f, prev_z);
    bool finite = std::isfinite(prev_f);
    for (double z = 1.2e-3; z < 1e3; z *= 1.2) {
        const double fz = eval_f(f, z);
        finite = finite && std::isfinite(fz);
        max_quot = std::max(max_quot, std::fabs(fz - prev_f) / (z - prev_z));
        prev_z = z;
        prev_f = fz;
    }
    rep.lipschitz_constant = max_quot;
    rep.lipschitz_away_from_zero = finite && std::isfinite(max_quot);

    bool bound = true;
    double last_ratio = 0.0, prev_ratio = 0.0;
    for (double z = 1.0; z <= 1.1e6; z *= 4.0) {
        const double ratio = eval_f(f, z) * std::pow(z, beta / a);
        bound = bound && ratio <= rep.K * (1.0 + 1e-9);
        prev_ratio = last_ratio;
        last_ratio = ratio;
    }
    rep.tail_bound = bound;
    rep.tail_ratio = std::fabs(last_ratio / rep.K - 1.0) < 0.05 &&
                     std::fabs(last_ratio - prev_ratio) <= 0.05 * rep.K + 1e-12;

    if (t.sigma > 0.0) {
        rep.nonlattice = true;
    } else {
        rep.nonlattice = std::visit(
            [](const auto& j) -> bool {
                using J = std::decay_t<decltype(j)>;
                return std::is_same_v<J, TwoSidedExpJumps> || std::is_same_v<J, GaussianJumps> ||
                       std::is_same_v<J, TemperedStableJumps>;
            },
            t.jumps);
    }
    return rep;
}

namespace detail {

// Shared-grid curve estimator: one simulated path serves every t in t_grid.
// Payload maps (running exponential functional, current position) to the
// estimated quantity at that grid time; with a tilt the path is simulated
// under the Esscher measure and each point carries weight e^{-theta xi + Phi(theta) t}.
template <class Payload>
ExpectationCurve run_curve(const LevyTriplet& base, const std::vector<double>& t_grid,
                           double alpha, const SimConfig& config, std::optional<double> tilt,
                           std::optional<double> absorb_at, Payload payload, unsigned workers,
                           std::uint64_t stream_base) {
    validate(base);
    if (t_grid.empty()) throw ValidationError("curve estimation: empty time grid");
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        if (!(t_grid[k] > 0.0)) throw ValidationError("curve estimation: times must be positive");
        if (k && !(t_grid[k] > t_grid[k - 1]))
            throw ValidationError("curve estimation: time grid must be strictly increasing");
    }
    SimConfig probe = config;
    probe.horizon_t = t_grid.back();
    validate(probe);

    const double theta = tilt.value_or(0.0);
    const bool tilted = theta != 0.0;  // tilt 0 reproduces the plain paths bitwise
    const LevyTriplet sim_t = tilted ? esscher(base, theta) : base;
    const double phi_theta = tilted ? laplace_exponent(base, theta) : 0.0;
    const double h = config.step_h;
    const std::size_t n_t = t_grid.size();
    std::vector<std::uint64_t> steps(n_t);
    for (std::size_t k = 0; k < n_t; ++k) steps[k] = grid_steps(t_grid[k], h);

    struct Partial {
        std::vector<double> sv, sv2, sw, sw2;
    };
    Partial init;
    init.sv.assign(n_t, 0.0);
    init.sv2.assign(n_t, 0.0);
    init.sw.assign(n_t, 0.0);
    init.sw2.assign(n_t, 0.0);

    auto map_batch = [&](std::uint64_t lo, std::uint64_t hi) {
        Partial part = init;
        IncrementSampler inc(sim_t, h, config.small_jump_cutoff);
        for (std::uint64_t p = lo; p < hi; ++p) {
            Philox eng(config.seed, stream_base + p);
            double pos = 0.0, acc = 0.0;
            std::size_t k = 0;
            for (std::uint64_t n = 0; k < n_t; ++n) {
                while (k < n_t && steps[k] == n) {
                    const double w =
                        tilted ? std::exp(-theta * pos + phi_theta * t_grid[k]) : 1.0;
                    const double v = w * payload(acc, pos);
                    part.sv[k] += v;
                    part.sv2[k] += v * v;
                    // Degeneracy is measured on the actual contributions: under
                    // a tilt the payoff cancels the weight tail, so raw-weight
                    // ESS would misreport healthy estimates as degenerate.
                    part.sw[k] += std::fabs(v);
                    part.sw2[k] += v * v;
                    ++k;
                }
                if (k >= n_t) break;
                acc += h * std::exp(-alpha * pos);
                pos += inc(eng);
                if (absorb_at && pos <= *absorb_at) break;  // later points contribute zero
            }
        }
        return part;
    };
    auto combine = [n_t](Partial a, const Partial& b) {
        for (std::size_t k = 0; k < n_t; ++k) {
            a.sv[k] += b.sv[k];
            a.sv2[k] += b.sv2[k];
            a.sw[k] += b.sw[k];
            a.sw2[k] += b.sw2[k];
        }
        return a;
    };
    const Partial total =
        parallel_reduce_ordered(config.n_paths, 64, workers, init, map_batch, combine);

    ExpectationCurve curve;
    curve.n_paths = config.n_paths;
    curve.seed = config.seed;
    curve.tilt = tilted ? tilt : std::optional<double>{};
    const double n = static_cast<double>(config.n_paths);
    for (std::size_t k = 0; k < n_t; ++k) {
        CurvePoint pt;
        pt.t = t_grid[k];
        pt.value = total.sv[k] / n;
        pt.se = std::sqrt(
            std::max(0.0, (total.sv2[k] - n * pt.value * pt.value) / (n - 1.0)) / n);
        const double ess =
            total.sw2[k] > 0.0 ? total.sw[k] * total.sw[k] / total.sw2[k] : 0.0;
        pt.flagged = ess < 100.0;
        curve.points.push_back(pt);
    }
    return curve;
}

// Mean, stderr and weight-ESS of (1/n) sum_i w_i g(a_i) over a conditioned
// survivor sample (absorbed paths contribute zero).
template <class G>
void unnormalized_mean(const ConditionedSample& s, G&& g, double& value, double& se,
                       double& ess) {
    const double n = static_cast<double>(s.n_total);
    double sum = 0.0, sumsq = 0.0, wsum = 0.0, wsumsq = 0.0;
    for (std::size_t i = 0; i < s.a.size(); ++i) {
        const double z = s.w[i] * g(s.a[i]);
        sum += z;
        sumsq += z * z;
        wsum += s.w[i];
        wsumsq += s.w[i] * s.w[i];
    }
    value = sum / n;
    se = std::sqrt(std::max(0.0, (sumsq - n * value * value) / (n - 1.0)) / n);
    ess = wsumsq > 0.0 ? wsum * wsum / wsumsq : 0.0;
}

// Internal renewal-table defaults for the coefficient estimators. The grid
// only needs to reach the linear regime (the weights beyond it come from the
// slope extrapolation, and the renewal function is asymptotically linear), so
// the top sits a few diffusive units above the largest conditioning level.
// The horizon keeps the first-passage truncation bias of the slope below the
// Monte Carlo noise: the relative undercount at level x scales like
// x / sqrt(Phi'' T), so T = 400 top^2 / Phi'' pins the slope bias near 3%,
// and most of it cancels against the matching bias of the weights.
// Escape stopping level for the conditioned functionals: beyond it a path's
// remaining per-step contribution h e^{-alpha eta} sits below e^{-25}, so the
// stopped functional equals the infinite-horizon one to floating-point noise
// and the horizon parameter only plays the role of a step-budget cap.
inline double escape_level(double alpha) { return 25.0 / alpha; }

inline RenewalTable coeff_table(const LevyTriplet& walk, double x_top, const SimConfig& config,
                                unsigned workers, std::uint64_t stream_base) {
    const double phi2 = laplace_exponent_d2(walk, 0.0);
    // Beyond the grid the slope extrapolation is exact up to slope noise, so
    // large conditioning levels do not need correspondingly large tables.
    const double unit = 6.0 * std::max(1.0, std::sqrt(phi2));
    const double top = unit + std::min(x_top, unit);
    std::vector<double> grid;
    const int n_pts = 64;
    for (int i = 1; i <= n_pts; ++i) grid.push_back(top * i / n_pts);
    SimConfig tcfg = config;
    tcfg.n_paths = std::min<std::uint64_t>(config.n_paths, 4000);
    tcfg.horizon_t =
        std::ceil(400.0 * top * top / phi2 / config.step_h) * config.step_h;
    return renewal_function(walk, grid, tcfg, workers, stream_base);
}

}  // namespace detail

// Monte Carlo estimate of t -> E[F(A_t^alpha(xi))]; with a tilt theta the
// paths are simulated under the Esscher measure and reweighted by
// e^{-theta xi(t) + Phi(theta) t}, which keeps subcritical tails estimable.
inline ExpectationCurve estimate_expectation_curve(const LevyTriplet& t, const FSpec& f,
                                                   double alpha,
                                                   const std::vector<double>& t_grid,
                                                   const SimConfig& config,
                                                   std::optional<double> tilt = {},
                                                   unsigned workers = 0,
                                                   std::uint64_t stream_base = streams::main_paths) {
    validate(f);
    if (!(alpha > 0.0)) throw ValidationError("estimate_expectation_curve: alpha must be positive");
    if (tilt) {
        const ExponentDomain dom = exponent_domain(t);
        if (*tilt != 0.0 && !dom.interior(*tilt))
            throw DomainError("estimate_expectation_curve: tilt outside the exponent domain");
    }
    return detail::run_curve(
        t, t_grid, alpha, config, tilt, std::nullopt,
        [&f](double acc, double) { return eval_f(f, acc); }, workers, stream_base);
}

// Monte Carlo coefficient estimate with the x-grid of pre-limit values used
// for the x -> infinity extrapolation.
enum class CoeffKind { D2, D3, D4, c_rho, regime5 };

struct CoefficientEstimate {
    CoeffKind which{};
    double value = 0.0;
    double se = 0.0;
    std::vector<double> x_grid;
    std::vector<double> pre_limit;
    std::vector<double> pre_limit_se;
    double ess = 0.0;
    bool flagged = false;
    bool tail_refinement = false;  // D3 only: y-grid tail contribution > 5%
};

// c(rho) of the first-passage constant: 1 whenever the marginal laws are
// atomless (sigma > 0 or infinite-activity jumps), because P(xi(t) = 0) = 0
// kills the defining integral. Compound-Poisson-only triplets keep an atom at
// zero and are rejected rather than silently mis-scaled.
inline CoefficientEstimate coeff_c_rho(const LevyTriplet& t, double rho) {
    validate(t);
    if (!std::isfinite(rho)) throw ValidationError("coeff_c_rho: rho must be finite");
    const bool atomless =
        t.sigma > 0.0 || std::holds_alternative<TemperedStableJumps>(t.jumps);
    if (!atomless) {
        if (std::holds_alternative<PointMassJumps>(t.jumps))
            throw DomainError(
                "coeff_c_rho: lattice-supported triplet (point-mass jumps without "
                "diffusion) is unsupported");
        throw DomainError(
            "coeff_c_rho: the marginal keeps an atom at zero (finite jump activity "
            "without diffusion), so c(rho) < 1 and the estimator is rejected");
    }
    CoefficientEstimate est;
    est.which = CoeffKind::c_rho;
    est.value = 1.0;
    est.se = 0.0;
    est.ess = inf;
    return est;
}

// D2 (critical regime): for each x, the un-normalized h-transform mean
// E[Vhat(x + eta) 1{min eta > -x} F(A(eta))] over rebased paths eta from 0,
// stopped when eta clears the escape level (the functional is then complete up
// to an e^{-25} tail), divided by the dual table's asymptotic slope, and scaled
// by the Theorem constant sqrt(2/(pi Phi''(0))). horizon_t caps the per-path
// step budget; survivors that hit the cap mid-flight flag the estimate. The
// x-sequence is increasing and bounded; the last x is reported as the value.
inline CoefficientEstimate coeff_D2(const LevyTriplet& t, const FSpec& f, double alpha,
                                    const std::vector<double>& x_grid, double horizon_t,
                                    const SimConfig& config, unsigned workers = 0) {
    validate(t);
    validate(f);
    if (x_grid.empty()) throw ValidationError("coeff_D2: empty x grid");
    const double phi2 = laplace_exponent_d2(t, 0.0);
    if (std::fabs(mean_increment(t)) > 1e-8 * std::max(1.0, phi2))
        throw DomainError("coeff_D2: needs the critical regime (zero mean)");
    const ConditionReport rep = check_conditions(f, t, tail_beta(f));
    if (!rep.lipschitz_away_from_zero || !rep.tail_bound || !rep.nonlattice)
        throw DomainError("coeff_D2: payoff/exponent conditions fail");

    const RenewalTable vhat =
        detail::coeff_table(dual(t), x_grid.back(), config, workers, streams::aux_paths);
    const double s_hat = vhat.slope();
    const double scale = std::sqrt(2.0 / (3.14159265358979323846 * phi2)) / s_hat;

    CoefficientEstimate est;
    est.which = CoeffKind::D2;
    est.x_grid = x_grid;
    est.ess = inf;
    std::uint64_t capped = 0;
    for (double x : x_grid) {
        const auto sample =
            conditioned_sample(t, vhat, x, horizon_t, alpha, config, workers,
                               streams::front_paths, detail::escape_level(alpha));
        capped += sample.capped;
        double v, se, ess;
        detail::unnormalized_mean(sample, [&f](double a) { return eval_f(f, a); }, v, se, ess);
        est.pre_limit.push_back(scale * v);
        est.pre_limit_se.push_back(scale * se);
        est.ess = std::min(est.ess, ess);
    }
    est.value = est.pre_limit.back();
    const double rel_slope = vhat.slope_se() / s_hat;
    est.se = std::sqrt(est.pre_limit_se.back() * est.pre_limit_se.back() +
                       est.value * est.value * rel_slope * rel_slope);
    est.flagged = est.ess < 100.0 || capped * 1000 > config.n_paths * x_grid.size();
    return est;
}

// D3 (weakly subcritical): independent coupling of a rho-tilted path (from x,
// weighted by the tilted dual table) and a rho-tilted dual path (from y,
// weighted by the tilted table); G pairs path i with path i. The y-integral
// of e^{-rho y} times the un-normalized pair mean is taken by trapezoid over
// y_grid (anchored at 0), the x factor is e^{rho x}, and the slope/curvature
// pair s*shat*Phi''(rho) converts table normalization to the k=1 convention.
inline CoefficientEstimate coeff_D3(const LevyTriplet& t, const FSpec& f, double alpha,
                                    double rho, const std::vector<double>& x_grid,
                                    const std::vector<double>& y_grid, double horizon_t,
                                    const SimConfig& config, unsigned workers = 0) {
    validate(t);
    validate(f);
    if (x_grid.empty() || y_grid.empty()) throw ValidationError("coeff_D3: empty grid");
    for (std::size_t j = 0; j < y_grid.size(); ++j) {
        if (!(y_grid[j] > 0.0)) throw ValidationError("coeff_D3: y grid must be positive");
        if (j && !(y_grid[j] > y_grid[j - 1]))
            throw ValidationError("coeff_D3: y grid must be increasing");
    }
    if (std::fabs(laplace_exponent_d1(t, rho)) > 1e-6)
        throw DomainError("coeff_D3: rho must be the zero of Phi' (weakly subcritical saddle)");
    const ConditionReport rep = check_conditions(f, t, tail_beta(f));
    if (!rep.lipschitz_away_from_zero || !rep.tail_bound || !rep.nonlattice)
        throw DomainError("coeff_D3: payoff/exponent conditions fail");

    const LevyTriplet tilted = esscher(t, rho);
    const LevyTriplet tilted_dual = dual(tilted);
    const double phi2 = laplace_exponent_d2(t, rho);

    const RenewalTable vhat = detail::coeff_table(tilted_dual, x_grid.back(), config, workers,
                                                  streams::aux_paths);
    const RenewalTable v =
        detail::coeff_table(tilted, y_grid.back(), config, workers, streams::aux_paths2);

    // Dense back ensembles, one per y, aligned by path index.
    const std::size_t n = static_cast<std::size_t>(config.n_paths);
    const std::size_t m = y_grid.size();
    std::vector<std::vector<double>> back_a(m), back_w(m);
    double min_ess = inf;
    std::uint64_t capped = 0;
    for (std::size_t j = 0; j < m; ++j) {
        const auto b = conditioned_sample(tilted_dual, v, y_grid[j], horizon_t, alpha, config,
                                          workers, streams::back_paths + (std::uint64_t(j) << 32),
                                          detail::escape_level(alpha));
        capped += b.capped;
        back_a[j].assign(n, 0.0);
        back_w[j].assign(n, 0.0);
        double wsum = 0.0, wsumsq = 0.0;
        for (std::size_t k = 0; k < b.idx.size(); ++k) {
            back_a[j][static_cast<std::size_t>(b.idx[k])] = b.a[k];
            back_w[j][static_cast<std::size_t>(b.idx[k])] = b.w[k];
            wsum += b.w[k];
            wsumsq += b.w[k] * b.w[k];
        }
        min_ess = std::min(min_ess, wsumsq > 0.0 ? wsum * wsum / wsumsq : 0.0);
    }

    // Trapezoid weights on [0, y_max] with an implicit zero anchor at y = 0.
    std::vector<double> trap(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double lo = j == 0 ? 0.0 : y_grid[j - 1];
        const double hi = j + 1 < m ? y_grid[j + 1] : y_grid[j];
        trap[j] = 0.5 * (hi - lo);
    }

    CoefficientEstimate est;
    est.which = CoeffKind::D3;
    est.x_grid = x_grid;
    std::vector<double> tail_integrand(m, 0.0);
    for (double x : x_grid) {
        const auto front = conditioned_sample(tilted, vhat, x, horizon_t, alpha, config, workers,
                                              streams::front_paths, detail::escape_level(alpha));
        capped += front.capped;
        double wsum = 0.0, wsumsq = 0.0;
        double sum = 0.0, sumsq = 0.0;
        std::vector<double> yterm(m, 0.0);
        for (std::size_t k = 0; k < front.idx.size(); ++k) {
            const std::size_t i = static_cast<std::size_t>(front.idx[k]);
            double z = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                const double wb = back_w[j][i];
                if (wb == 0.0) continue;
                const double term = trap[j] * std::exp(-rho * y_grid[j]) * wb *
                                    eval_f(f, front.a[k] +
                                                  std::exp(alpha * (x - y_grid[j])) * back_a[j][i]);
                z += term;
                yterm[j] += front.w[k] * term;
            }
            z *= front.w[k];
            sum += z;
            sumsq += z * z;
            wsum += front.w[k];
            wsumsq += front.w[k] * front.w[k];
        }
        min_ess = std::min(min_ess, wsumsq > 0.0 ? wsum * wsum / wsumsq : 0.0);
        const double nn = static_cast<double>(n);
        const double mean = sum / nn;
        const double se =
            std::sqrt(std::max(0.0, (sumsq - nn * mean * mean) / (nn - 1.0)) / nn);
        const double pre = std::exp(rho * x) * mean;
        est.pre_limit.push_back(pre);
        est.pre_limit_se.push_back(std::exp(rho * x) * se);
        if (x == x_grid.back())
            for (std::size_t j = 0; j < m; ++j) tail_integrand[j] = yterm[j] / nn;
    }

    // Tail-of-integral diagnostic at the largest x: extrapolate the decay of
    // the per-y integrand beyond y_max and demand it stays below 5%.
    double integral = 0.0;
    for (std::size_t j = 0; j < m; ++j) integral += tail_integrand[j];
    if (m >= 2 && tail_integrand[m - 1] > 0.0 && tail_integrand[m - 2] > 0.0) {
        const double f1 = tail_integrand[m - 2] / trap[m - 2];
        const double f2 = tail_integrand[m - 1] / trap[m - 1];
        const double lam = std::log(f1 / f2) / (y_grid[m - 1] - y_grid[m - 2]);
        const double tail = lam > 0.0 ? f2 / lam : inf;
        est.tail_refinement = !(tail <= 0.05 * integral);
    } else {
        est.tail_refinement = true;
    }

    // Normalization: V * Vhat pairs convert via the product of the measured
    // slopes and Phi''(rho) (unit-local-time ladder calibration).
    const double s = v.slope(), s_hat = vhat.slope();
    const double conv = 1.0 / (s * s_hat * phi2);
    const double c_rho = coeff_c_rho(t, rho).value;
    const double theorem = c_rho / std::sqrt(2.0 * 3.14159265358979323846 * phi2);
    for (std::size_t i = 0; i < est.pre_limit.size(); ++i) {
        est.pre_limit[i] *= conv * theorem;
        est.pre_limit_se[i] *= conv * theorem;
    }
    est.value = est.pre_limit.back();
    const double rel_slopes = std::sqrt(std::pow(v.slope_se() / s, 2) +
                                        std::pow(vhat.slope_se() / s_hat, 2));
    est.se = std::sqrt(std::pow(est.pre_limit_se.back(), 2) +
                       std::pow(est.value * rel_slopes, 2));
    est.ess = min_ess;
    est.flagged = est.ess < 100.0 || est.tail_refinement ||
                  capped * 1000 > config.n_paths * (x_grid.size() + m);
    return est;
}

// D4 (intermediately subcritical): rebased h-transform estimate under the
// beta-tilted dual walk, weighted by the tilted walk's renewal table, of the
// escape-stopped dual-path functional A^{-beta/alpha}; slope-normalized and
// capped-path-flagged like D2.
inline CoefficientEstimate coeff_D4(const LevyTriplet& t, double alpha, double beta,
                                    const std::vector<double>& x_grid, double horizon_t,
                                    const SimConfig& config, unsigned workers = 0) {
    validate(t);
    if (x_grid.empty()) throw ValidationError("coeff_D4: empty x grid");
    if (!(alpha > 0.0) || !(beta > 0.0))
        throw ValidationError("coeff_D4: alpha and beta must be positive");
    const Regime regime = classify_regime(t, beta);
    if (regime.kind != RegimeKind::IntermediatelySubcritical)
        throw DomainError("coeff_D4: needs the intermediately subcritical regime (Phi'(beta)=0)");
    if (t.sigma == 0.0 && !std::holds_alternative<TemperedStableJumps>(t.jumps) &&
        !std::holds_alternative<GaussianJumps>(t.jumps) &&
        !std::holds_alternative<TwoSidedExpJumps>(t.jumps))
        throw DomainError("coeff_D4: lattice triplet unsupported");

    const LevyTriplet tilted = esscher(t, beta);
    const LevyTriplet walk = dual(tilted);  // mean zero
    const double phi2 = laplace_exponent_d2(t, beta);
    const RenewalTable v_beta =
        detail::coeff_table(tilted, x_grid.back(), config, workers, streams::aux_paths);
    const double s_beta = v_beta.slope();
    const double scale = std::sqrt(2.0 / (3.14159265358979323846 * phi2)) / s_beta;

    CoefficientEstimate est;
    est.which = CoeffKind::D4;
    est.x_grid = x_grid;
    est.ess = inf;
    std::uint64_t capped = 0;
    const double power = -beta / alpha;
    for (double x : x_grid) {
        const auto sample = conditioned_sample(walk, v_beta, x, horizon_t, alpha, config, workers,
                                               streams::front_paths, detail::escape_level(alpha));
        capped += sample.capped;
        double v, se, ess;
        detail::unnormalized_mean(sample, [power](double a) { return std::pow(a, power); }, v, se,
                                  ess);
        est.pre_limit.push_back(scale * v);
        est.pre_limit_se.push_back(scale * se);
        est.ess = std::min(est.ess, ess);
    }
    est.value = est.pre_limit.back();
    const double rel_slope = v_beta.slope_se() / s_beta;
    est.se = std::sqrt(est.pre_limit_se.back() * est.pre_limit_se.back() +
                       est.value * est.value * rel_slope * rel_slope);
    est.flagged = est.ess < 100.0 || capped * 1000 > config.n_paths * x_grid.size();
    return est;
}

// Strongly subcritical limit constant: K * E^{(beta)}[A_infinity^alpha(-xi)^{-beta/alpha}]
// by direct adaptive simulation of the tilted dual (which drifts upward).
// K is Condition 2.7's tail constant of the payoff under study (1 for the bare
// coefficient, since the operation does not receive the payoff itself).
inline CoefficientEstimate coeff_regime5(const LevyTriplet& t, double alpha, double beta,
                                         const SimConfig& config, double K = 1.0,
                                         unsigned workers = 0) {
    validate(t);
    if (!(alpha > 0.0) || !(beta > 0.0))
        throw ValidationError("coeff_regime5: alpha and beta must be positive");
    if (!(K > 0.0)) throw ValidationError("coeff_regime5: K must be positive");
    const LevyTriplet tilted = esscher(t, beta);
    if (!(mean_increment(tilted) < 0.0))
        throw DomainError("coeff_regime5: regime mismatch: the tilted mean Phi'(beta) must be "
                          "negative (strongly subcritical)");
    const LevyTriplet walk = dual(tilted);
    SimConfig icfg = config;  // the adaptive functional ignores the horizon
    icfg.horizon_t = std::max(icfg.horizon_t, icfg.step_h);
    validate(icfg);

    struct Partial {
        double sum = 0.0, sumsq = 0.0;
        std::uint64_t capped = 0;
    };
    const double power = -beta / alpha;
    auto map_batch = [&](std::uint64_t lo, std::uint64_t hi) {
        Partial part;
        for (std::uint64_t p = lo; p < hi; ++p) {
            const auto a = exp_functional_inf(walk, alpha, icfg, p, 1e-6, streams::main_paths);
            if (!a.truncation_flag) ++part.capped;
            const double z = std::pow(a.value, power);
            part.sum += z;
            part.sumsq += z * z;
        }
        return part;
    };
    auto combine = [](Partial a, const Partial& b) {
        a.sum += b.sum;
        a.sumsq += b.sumsq;
        a.capped += b.capped;
        return a;
    };
    const Partial total =
        parallel_reduce_ordered(config.n_paths, 16, workers, Partial{}, map_batch, combine);
    const double n = static_cast<double>(config.n_paths);

    CoefficientEstimate est;
    est.which = CoeffKind::regime5;
    est.value = K * total.sum / n;
    est.se = K * std::sqrt(std::max(0.0, (total.sumsq - n * (total.sum / n) * (total.sum / n)) /
                                             (n - 1.0)) /
                           n);
    est.ess = n;
    est.flagged = total.capped > config.n_paths / 1000;
    return est;
}

// First-passage survival asymptotics: MC curve of P(tau_{-x} > t) with the
// regime-matched prediction. Negative-mean processes are estimated under the
// rho-tilt (weights bounded by e^{rho x} on survivors); otherwise plain MC.
struct FirstPassage {
    ExpectationCurve curve;
    DecayFit fit;
    double predicted_rate = 0.0;
    double predicted_poly = 0.0;
};

inline FirstPassage first_passage_asymptotics(const LevyTriplet& t, double x,
                                              const std::vector<double>& t_grid,
                                              const SimConfig& config, unsigned workers = 0) {
    validate(t);
    if (!(x > 0.0)) throw ValidationError("first_passage_asymptotics: x must be positive");
    const double m = mean_increment(t);
    const double scale = std::max(1.0, laplace_exponent_d2(t, 0.0));
    FirstPassage out;
    std::optional<double> tilt;
    if (m > 1e-8 * scale) {
        out.predicted_rate = 0.0;
        out.predicted_poly = 0.0;
    } else if (m >= -1e-8 * scale) {
        out.predicted_rate = 0.0;
        out.predicted_poly = -0.5;
    } else {
        // Weakly subcritical saddle: bracket Phi' upward until it turns positive.
        const ExponentDomain dom = exponent_domain(t);
        const double cap = dom.upper == inf ? 1e6 : dom.upper * (1.0 - 1e-9);
        double hi = std::min(1.0, 0.5 * cap);
        while (laplace_exponent_d1(t, hi) <= 0.0) {
            if (hi >= cap)
                throw DomainError(
                    "first_passage_asymptotics: Phi' never turns positive inside the domain; "
                    "no saddle for the survival asymptotics");
            hi = std::min(hi * 2.0, cap);
        }
        const double rho = find_rho(t, hi);
        tilt = rho;
        out.predicted_rate = laplace_exponent(t, rho);
        out.predicted_poly = -1.5;
    }
    out.curve = detail::run_curve(
        t, t_grid, 1.0, config, tilt, -x, [](double, double) { return 1.0; }, workers,
        streams::main_paths);
    out.fit = fit_decay(out.curve);
    return out;
}

}  // namespace expfun
