#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "asymptotics.hpp"
#include "errors.hpp"
#include "fit.hpp"
#include "levy.hpp"
#include "quadrature.hpp"
#include "simulate.hpp"

namespace expfun {

// Random environment in Levy-Ito form: the driving process L has drift
// beta_drift, diffusion sigma, and jumps e^z - 1 where z carries the measure
// nu; the associated exponent process is xi(t) = a0 t + sigma B(t) + (z jumps,
// compensated), with a0 given by the Ito correction below.
struct EnvironmentSpec {
    double beta_drift = 0.0;
    double sigma = 0.0;
    JumpSpec jumps = NoJumps{};
};

inline void validate(const EnvironmentSpec& e) {
    if (!std::isfinite(e.beta_drift))
        throw ValidationError("environment: beta_drift must be finite");
    if (!(e.sigma >= 0.0) || !std::isfinite(e.sigma))
        throw ValidationError("environment: sigma must be nonnegative and finite");
    validate(e.jumps);
}

// Stable-branching process state: initial mass x0, branching coefficient c,
// stability alpha in (0, 1].
struct CbreParams {
    double x0 = 1.0;
    double c = 1.0;
    double alpha = 1.0;
    EnvironmentSpec env;
};

inline void validate(const CbreParams& p) {
    if (!(p.x0 > 0.0) || !std::isfinite(p.x0))
        throw ValidationError("cbre: x0 must be positive and finite");
    if (!(p.c > 0.0) || !std::isfinite(p.c))
        throw ValidationError("cbre: c must be positive for nontrivial extinction");
    if (!(p.alpha > 0.0) || !(p.alpha <= 1.0))
        throw ValidationError("cbre: alpha must lie in (0, 1]");
    validate(p.env);
}

namespace detail {

// I1 = int_{[-1,1]} (e^z - 1 - z) nu(dz) and I2 = int_{|z|>1} z nu(dz).
inline void ito_correction(const JumpSpec& jumps, double& i1, double& i2) {
    i1 = 0.0;
    i2 = 0.0;
    const auto g = [](double z) { return std::expm1(z) - z; };
    if (std::holds_alternative<NoJumps>(jumps)) return;
    if (const auto* p = std::get_if<PointMassJumps>(&jumps)) {
        if (std::fabs(p->size) <= 1.0)
            i1 = p->rate * g(p->size);
        else
            i2 = p->rate * p->size;
        return;
    }
    if (const auto* p = std::get_if<TwoSidedExpJumps>(&jumps)) {
        const double up = p->rate * p->p_up, dn = p->rate * (1.0 - p->p_up);
        const double ep = p->eta_plus, em = p->eta_minus;
        i1 = integrate([&](double z) { return g(z) * up * ep * std::exp(-ep * z); }, 0.0, 1.0,
                       1e-12) +
             integrate([&](double z) { return g(z) * dn * em * std::exp(em * z); }, -1.0, 0.0,
                       1e-12);
        // int_1^inf z eta e^{-eta z} dz = e^{-eta} (1 + 1/eta), mirrored below.
        i2 = up * std::exp(-ep) * (1.0 + 1.0 / ep) - dn * std::exp(-em) * (1.0 + 1.0 / em);
        return;
    }
    if (const auto* p = std::get_if<GaussianJumps>(&jumps)) {
        const double s = p->stddev, mu = p->mean;
        const auto phi = [s, mu](double z) {
            const double u = (z - mu) / s;
            return std::exp(-0.5 * u * u) / (s * std::sqrt(2.0 * 3.14159265358979323846));
        };
        i1 = p->rate * integrate([&](double z) { return g(z) * phi(z); }, -1.0, 1.0, 1e-12);
        const double mid = integrate([&](double z) { return z * phi(z); }, -1.0, 1.0, 1e-12);
        i2 = p->rate * (mu - mid);
        return;
    }
    const auto& ts = std::get<TemperedStableJumps>(jumps);
    const double b = ts.stability, eta = ts.tempering, sc = ts.scale;
    const double sgn = ts.positive ? 1.0 : -1.0;
    // Density sc * y^{-1-b} e^{-eta y} on y > 0, mirrored to z = -y when
    // one-sided negative; g(sgn*y) ~ y^2/2 near 0 keeps the integrand ~ y^{1-b}.
    i1 = integrate_singular0(
        [&](double y) { return g(sgn * y) * sc * std::pow(y, -1.0 - b) * std::exp(-eta * y); },
        1.0, b - 1.0, 1e-12);
    i2 = sgn * integrate_upper(
                   [&](double y) { return sc * std::pow(y, -b) * std::exp(-eta * y); }, 1.0,
                   1e-12);
}

}  // namespace detail

// The exponent process of the environment: mean_increment(a0) with the Ito
// correction a0 = beta - sigma^2/2 - I1 + I2, Gaussian part sigma, and the
// z-measure itself as the (compensated) jump measure.
inline LevyTriplet xi_from_environment(const EnvironmentSpec& env) {
    validate(env);
    double i1 = 0.0, i2 = 0.0;
    detail::ito_correction(env.jumps, i1, i2);
    const double a0 = env.beta_drift - 0.5 * env.sigma * env.sigma - i1 + i2;
    LevyTriplet t;
    t.drift_a = -a0;  // mean_increment = a0
    t.sigma = env.sigma;
    t.jumps = env.jumps;
    validate(t);
    return t;
}

// Exact conditional Laplace transform of the branching process given the
// environment path: u_{r,t}(lambda) = (c alpha int_r^t e^{-alpha xi} ds +
// lambda^{-alpha})^{-1/alpha}, with the lambda = inf limit taken analytically.
inline double u_transform(const PathSample& path, double r, double t, double lambda, double c,
                          double alpha) {
    if (!(alpha > 0.0) || !(alpha <= 1.0))
        throw ValidationError("u_transform: alpha must lie in (0, 1]");
    if (!(c >= 0.0)) throw ValidationError("u_transform: c must be nonnegative");
    if (!(lambda > 0.0)) throw ValidationError("u_transform: lambda must be positive (or inf)");
    if (!(r <= t)) throw ValidationError("u_transform: needs r <= t");
    if (path.times.empty()) throw ValidationError("u_transform: empty path");
    const auto locate = [&](double s) -> std::size_t {
        const auto it = std::lower_bound(path.times.begin(), path.times.end(), s - 1e-9);
        if (it == path.times.end() || std::fabs(*it - s) > 1e-9)
            throw ValidationError("u_transform: time not on the path grid");
        return static_cast<std::size_t>(it - path.times.begin());
    };
    const std::size_t ir = locate(r), it = locate(t);
    double a = 0.0;
    for (std::size_t i = ir; i < it; ++i)
        a += std::exp(-alpha * path.values[i]) * (path.times[i + 1] - path.times[i]);
    const double base = c * alpha * a + (lambda == inf ? 0.0 : std::pow(lambda, -alpha));
    if (base <= 0.0) return inf;  // empty integral at lambda = inf: sure survival
    return std::pow(base, -1.0 / alpha);
}

// Survival curve with the regime attached when the exponent domain admits it.
struct SurvivalCurve {
    ExpectationCurve curve;
    std::optional<Regime> regime;
};

// Theorem-level classification of the survival decay: the exponent process
// regime at beta = 1, requiring {0, 1} interior to the exponent domain.
inline Regime classify_cbre(const CbreParams& params) {
    validate(params);
    const LevyTriplet t = xi_from_environment(params.env);
    const ExponentDomain dom = exponent_domain(t);
    if (!dom.interior(0.0) || !dom.interior(1.0))
        throw DomainError("classify_cbre: needs {0,1} interior to the exponent domain");
    return classify_regime(t, 1.0);
}

// Plain Monte Carlo of P(X(t) > 0) = E[F_x(A_t^alpha(xi))] with
// F_x(z) = 1 - exp{-x0 (c alpha z)^{-1/alpha}}, one path set shared across the
// whole time grid. Zero times contribute the exact value 1.
inline SurvivalCurve survival_probability(const CbreParams& params,
                                          const std::vector<double>& t_grid,
                                          const SimConfig& config, unsigned workers = 0) {
    validate(params);
    const LevyTriplet t = xi_from_environment(params.env);
    std::vector<double> positive;
    std::size_t zeros = 0;
    for (double s : t_grid) {
        if (s == 0.0) {
            ++zeros;
            continue;
        }
        positive.push_back(s);
    }
    if (zeros > 1 || (zeros == 1 && (t_grid.empty() || t_grid.front() != 0.0)))
        throw ValidationError("survival_probability: at most one leading zero time");

    SurvivalCurve out;
    const FSpec f = CbreTailF{params.x0, params.c, params.alpha};
    if (!positive.empty()) {
        out.curve = estimate_expectation_curve(t, f, params.alpha, positive, config, {}, workers);
    } else {
        out.curve.n_paths = config.n_paths;
        out.curve.seed = config.seed;
    }
    if (zeros == 1) {
        CurvePoint p0;
        p0.t = 0.0;
        p0.value = 1.0;
        p0.se = 0.0;
        out.curve.points.insert(out.curve.points.begin(), p0);
    }
    try {
        out.regime = classify_cbre(params);
    } catch (const DomainError&) {
        out.regime.reset();
    }
    return out;
}

// Tilted estimate of the same curve for decay-rate fitting: subcritical
// regimes reweight by the saddle (weakly) or beta = 1 (intermediate/strong)
// Esscher tilt; otherwise plain.
inline SurvivalCurve survival_curve_tilted(const CbreParams& params,
                                           const std::vector<double>& t_grid,
                                           const SimConfig& config, unsigned workers = 0) {
    validate(params);
    const LevyTriplet t = xi_from_environment(params.env);
    const Regime regime = classify_cbre(params);
    std::optional<double> tilt;
    switch (regime.kind) {
        case RegimeKind::WeaklySubcritical:
            tilt = regime.rho;
            break;
        case RegimeKind::IntermediatelySubcritical:
        case RegimeKind::StronglySubcritical:
            tilt = 1.0;
            break;
        default:
            break;
    }
    SurvivalCurve out;
    const FSpec f = CbreTailF{params.x0, params.c, params.alpha};
    out.curve = estimate_expectation_curve(t, f, params.alpha, t_grid, config, tilt, workers);
    out.regime = regime;
    return out;
}

}  // namespace expfun
