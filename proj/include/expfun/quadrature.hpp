#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace expfun {

struct QuadratureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

template <class F>
double simpson_adapt(const F& f, double a, double b, double fa, double fm, double fb, double s,
                     double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    if (!std::isfinite(flm) || !std::isfinite(frm))
        throw QuadratureError("integrand is not finite inside the interval");
    const double h12 = (b - a) / 12.0;
    const double sl = h12 * (fa + 4.0 * flm + fm);
    const double sr = h12 * (fm + 4.0 * frm + fb);
    const double s2 = sl + sr;
    if (std::fabs(s2 - s) <= 15.0 * tol) return s2 + (s2 - s) / 15.0;
    if (depth <= 0) throw QuadratureError("adaptive refinement failed to reach tolerance");
    return simpson_adapt(f, a, m, fa, flm, fm, sl, 0.5 * tol, depth - 1) +
           simpson_adapt(f, m, b, fm, frm, fb, sr, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson on a finite interval; absolute-error target, throws on
// failure instead of returning a silently degraded value.
template <class F>
double integrate(const F& f, double a, double b, double abs_tol = 1e-10, int max_depth = 52) {
    if (a == b) return 0.0;
    if (!(a < b)) throw QuadratureError("integration interval is reversed");
    const double m = 0.5 * (a + b);
    const double fa = f(a);
    const double fm = f(m);
    const double fb = f(b);
    if (!std::isfinite(fa) || !std::isfinite(fm) || !std::isfinite(fb))
        throw QuadratureError("integrand is not finite at an initial node");
    const double s = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_adapt(f, a, b, fa, fm, fb, s, abs_tol, max_depth);
}

// Integral over (a, +inf) through x = a + u/(1-u); f must decay at +inf.
template <class F>
double integrate_upper(const F& f, double a, double abs_tol = 1e-10) {
    auto g = [&f, a](double u) {
        if (u >= 1.0) return 0.0;
        const double w = 1.0 - u;
        const double v = f(a + u / w) / (w * w);
        return v;
    };
    return integrate(g, 0.0, 1.0, abs_tol);
}

// Integral over (-inf, b), mirrored onto integrate_upper.
template <class F>
double integrate_lower(const F& f, double b, double abs_tol = 1e-10) {
    return integrate_upper([&f](double y) { return f(-y); }, -b, abs_tol);
}

// Integral over a possibly unbounded interval, split at 0 when 0 is interior.
template <class F>
double integrate_line(const F& f, double lo, double hi, double abs_tol = 1e-10) {
    const bool lo_inf = std::isinf(lo);
    const bool hi_inf = std::isinf(hi);
    auto piece = [&](double a, double b, bool ainf, bool binf) {
        if (ainf && binf) throw QuadratureError("doubly infinite piece after split");
        if (ainf) return integrate_lower(f, b, abs_tol);
        if (binf) return integrate_upper(f, a, abs_tol);
        return integrate(f, a, b, abs_tol);
    };
    if ((lo_inf || lo < 0.0) && (hi_inf || hi > 0.0))
        return piece(lo, 0.0, lo_inf, false) + piece(0.0, hi, false, hi_inf);
    return piece(lo, hi, lo_inf, hi_inf);
}

// Integral of f over (0, b] where f(x) ~ x^{-p} near zero with p < 1:
// substitute x = y^q with q = 2/(1-p) so the transformed integrand vanishes
// linearly at the origin.
template <class F>
double integrate_singular0(const F& f, double b, double p, double abs_tol = 1e-10) {
    if (!(p < 1.0)) throw QuadratureError("non-integrable endpoint singularity");
    const double q = 2.0 / (1.0 - p);
    auto g = [&f, q](double y) {
        if (y <= 0.0) return 0.0;
        const double x = std::pow(y, q);
        return f(x) * q * std::pow(y, q - 1.0);
    };
    return integrate(g, 0.0, std::pow(b, 1.0 / q), abs_tol);
}

}  // namespace expfun
