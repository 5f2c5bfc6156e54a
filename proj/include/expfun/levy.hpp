#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>

#include "expfun/errors.hpp"

namespace expfun {

inline constexpr double inf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Jump measure families. All are closed under exponential tilting and under
// spatial reflection, which keeps the transform algebra exact.
// ---------------------------------------------------------------------------

struct NoJumps {};

// rate * delta_{size}
struct PointMassJumps {
    double rate = 1.0;
    double size = 1.0;
};

// rate * [ p_up Exp(eta_plus) on x>0  +  (1-p_up) Exp(eta_minus) mirrored to x<0 ]
struct TwoSidedExpJumps {
    double rate = 1.0;
    double p_up = 0.5;
    double eta_plus = 1.0;
    double eta_minus = 1.0;
};

// rate * Normal(mean, stddev^2) jump sizes
struct GaussianJumps {
    double rate = 1.0;
    double mean = 0.0;
    double stddev = 1.0;
};

// scale * x^{-1-stability} e^{-tempering x} dx on x>0 (mirrored when !positive)
struct TemperedStableJumps {
    double scale = 1.0;
    double stability = 0.5;
    double tempering = 1.0;
    bool positive = true;
};

using JumpSpec =
    std::variant<NoJumps, PointMassJumps, TwoSidedExpJumps, GaussianJumps, TemperedStableJumps>;

// Characteristics (a, sigma, nu) with all jumps compensated, so the mean of
// the time-one marginal is -a regardless of the jump family.
struct LevyTriplet {
    double drift_a = 0.0;
    double sigma = 0.0;
    JumpSpec jumps = NoJumps{};
};

struct ExponentDomain {
    double lower = -inf;
    double upper = inf;
    bool lower_closed = false;
    bool upper_closed = false;

    bool interior(double x) const { return x > lower && x < upper; }
    bool contains(double x) const {
        if (x > lower && x < upper) return true;
        if (x == lower && lower_closed) return true;
        if (x == upper && upper_closed) return true;
        return false;
    }
};

inline void validate(const JumpSpec& jumps) {
    std::visit(
        [](const auto& j) {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, NoJumps>) {
                return;
            } else if constexpr (std::is_same_v<T, PointMassJumps>) {
                if (!(j.rate > 0.0) || !std::isfinite(j.rate))
                    throw ValidationError("point-mass jumps: rate must be positive");
                if (j.size == 0.0 || !std::isfinite(j.size))
                    throw ValidationError("point-mass jumps: size must be nonzero");
            } else if constexpr (std::is_same_v<T, TwoSidedExpJumps>) {
                if (!(j.rate > 0.0) || !std::isfinite(j.rate))
                    throw ValidationError("two-sided-exponential jumps: rate must be positive");
                if (!(j.p_up >= 0.0 && j.p_up <= 1.0))
                    throw ValidationError("two-sided-exponential jumps: p_up must be in [0,1]");
                if (!(j.eta_plus > 0.0) || !(j.eta_minus > 0.0))
                    throw ValidationError("two-sided-exponential jumps: rates must be positive");
            } else if constexpr (std::is_same_v<T, GaussianJumps>) {
                if (!(j.rate > 0.0) || !std::isfinite(j.rate))
                    throw ValidationError("gaussian jumps: rate must be positive");
                if (!(j.stddev > 0.0))
                    throw ValidationError("gaussian jumps: stddev must be positive");
                if (!std::isfinite(j.mean)) throw ValidationError("gaussian jumps: bad mean");
            } else if constexpr (std::is_same_v<T, TemperedStableJumps>) {
                if (!(j.scale > 0.0)) throw ValidationError("tempered-stable jumps: scale must be positive");
                if (!(j.stability > 0.0 && j.stability < 2.0))
                    throw ValidationError("tempered-stable jumps: stability must lie in (0,2)");
                if (!(j.tempering > 0.0))
                    throw ValidationError("tempered-stable jumps: tempering must be positive");
            }
        },
        jumps);
}

inline void validate(const LevyTriplet& t) {
    if (!std::isfinite(t.drift_a)) throw ValidationError("triplet: drift_a must be finite");
    if (!(t.sigma >= 0.0) || !std::isfinite(t.sigma))
        throw ValidationError("triplet: sigma must be nonnegative and finite");
    validate(t.jumps);
}

// ---------------------------------------------------------------------------
// Jump parts of the exponents: J(l) = int (e^{lx} - 1 - lx) nu(dx) and its
// first two l-derivatives, plus the characteristic counterpart.
// ---------------------------------------------------------------------------

namespace detail {

// (theta - l) with the one-sided tempered-stable orientation folded in.
inline double ts_signed(double l, const TemperedStableJumps& j) {
    return j.positive ? l : -l;
}

inline double ts_jump_J(const TemperedStableJumps& j, double l) {
    const double u = ts_signed(l, j);  // effective argument on the positive-side form
    const double th = j.tempering;
    if (u > th) return inf;
    const double b = j.stability;
    if (b == 1.0) {
        if (u == th) return j.scale * th;  // (th-u)log((th-u)/th) -> 0
        return j.scale * ((th - u) * std::log((th - u) / th) + u);
    }
    const double g = std::tgamma(-b);
    return j.scale * g *
           (std::pow(th - u, b) - std::pow(th, b) + b * u * std::pow(th, b - 1.0));
}

inline double ts_jump_J1(const TemperedStableJumps& j, double l) {
    const double u = ts_signed(l, j);
    const double th = j.tempering;
    if (u >= th) {
        if (u > th) return inf;
        // finite one-sided limit only when stability > 1
        if (!(j.stability > 1.0)) return inf;
    }
    const double b = j.stability;
    double d;
    if (b == 1.0) {
        d = j.scale * std::log(th / (th - u));
    } else {
        d = j.scale * std::tgamma(1.0 - b) *
            (std::pow(th - u, b - 1.0) - std::pow(th, b - 1.0));
    }
    return j.positive ? d : -d;
}

inline double ts_jump_J2(const TemperedStableJumps& j, double l) {
    const double u = ts_signed(l, j);
    const double th = j.tempering;
    if (u >= th) return inf;
    const double b = j.stability;
    if (b == 1.0) return j.scale / (th - u);
    return j.scale * std::tgamma(2.0 - b) * std::pow(th - u, b - 2.0);
}

inline std::complex<double> ts_jump_psi(const TemperedStableJumps& j, double l) {
    // -J(i l) continued analytically; principal branch is fine since Re(th)>0.
    const std::complex<double> iu(0.0, j.positive ? l : -l);
    const double th = j.tempering;
    const double b = j.stability;
    std::complex<double> Jc;
    if (b == 1.0) {
        Jc = (th - iu) * std::log((th - iu) / th) + iu;
        Jc *= j.scale;
    } else {
        Jc = std::tgamma(-b) *
             (std::pow(std::complex<double>(th, 0.0) - iu, b) - std::pow(th, b) +
              b * iu * std::pow(th, b - 1.0));
        Jc *= j.scale;
    }
    return -Jc;
}

}  // namespace detail

inline ExponentDomain exponent_domain(const LevyTriplet& t) {
    return std::visit(
        [](const auto& j) -> ExponentDomain {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, TwoSidedExpJumps>) {
                ExponentDomain d;
                if (j.p_up > 0.0) d.upper = j.eta_plus;
                if (j.p_up < 1.0) d.lower = -j.eta_minus;
                return d;
            } else if constexpr (std::is_same_v<T, TemperedStableJumps>) {
                ExponentDomain d;
                if (j.positive) {
                    d.upper = j.tempering;
                    d.upper_closed = true;
                } else {
                    d.lower = -j.tempering;
                    d.lower_closed = true;
                }
                return d;
            } else {
                return ExponentDomain{};
            }
        },
        t.jumps);
}

namespace detail {

inline double jump_J(const JumpSpec& jumps, double l) {
    return std::visit(
        [l](const auto& j) -> double {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, NoJumps>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, PointMassJumps>) {
                return j.rate * (std::expm1(l * j.size) - l * j.size);
            } else if constexpr (std::is_same_v<T, TwoSidedExpJumps>) {
                const double p = j.p_up, q = 1.0 - j.p_up;
                double v = 0.0;
                if (p > 0.0) {
                    if (l >= j.eta_plus) return inf;
                    v += p * l * l / (j.eta_plus * (j.eta_plus - l));
                }
                if (q > 0.0) {
                    if (l <= -j.eta_minus) return inf;
                    v += q * l * l / (j.eta_minus * (j.eta_minus + l));
                }
                return j.rate * v;
            } else if constexpr (std::is_same_v<T, GaussianJumps>) {
                const double e = l * j.mean + 0.5 * l * l * j.stddev * j.stddev;
                return j.rate * (std::exp(e) - 1.0 - l * j.mean);
            } else {
                return ts_jump_J(j, l);
            }
        },
        jumps);
}

inline double jump_J1(const JumpSpec& jumps, double l) {
    return std::visit(
        [l](const auto& j) -> double {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, NoJumps>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, PointMassJumps>) {
                return j.rate * j.size * std::expm1(l * j.size);
            } else if constexpr (std::is_same_v<T, TwoSidedExpJumps>) {
                const double p = j.p_up, q = 1.0 - j.p_up;
                double v = 0.0;
                if (p > 0.0) {
                    const double d = j.eta_plus - l;
                    if (d <= 0.0) return inf;
                    v += p * (j.eta_plus / (d * d) - 1.0 / j.eta_plus);
                }
                if (q > 0.0) {
                    const double d = j.eta_minus + l;
                    if (d <= 0.0) return -inf;
                    v += q * (1.0 / j.eta_minus - j.eta_minus / (d * d));
                }
                return j.rate * v;
            } else if constexpr (std::is_same_v<T, GaussianJumps>) {
                const double s2 = j.stddev * j.stddev;
                const double e = l * j.mean + 0.5 * l * l * s2;
                return j.rate * ((j.mean + l * s2) * std::exp(e) - j.mean);
            } else {
                return ts_jump_J1(j, l);
            }
        },
        jumps);
}

inline double jump_J2(const JumpSpec& jumps, double l) {
    return std::visit(
        [l](const auto& j) -> double {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, NoJumps>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, PointMassJumps>) {
                return j.rate * j.size * j.size * std::exp(l * j.size);
            } else if constexpr (std::is_same_v<T, TwoSidedExpJumps>) {
                const double p = j.p_up, q = 1.0 - j.p_up;
                double v = 0.0;
                if (p > 0.0) {
                    const double d = j.eta_plus - l;
                    if (d <= 0.0) return inf;
                    v += p * 2.0 * j.eta_plus / (d * d * d);
                }
                if (q > 0.0) {
                    const double d = j.eta_minus + l;
                    if (d <= 0.0) return inf;
                    v += q * 2.0 * j.eta_minus / (d * d * d);
                }
                return j.rate * v;
            } else if constexpr (std::is_same_v<T, GaussianJumps>) {
                const double s2 = j.stddev * j.stddev;
                const double e = l * j.mean + 0.5 * l * l * s2;
                const double m1 = j.mean + l * s2;
                return j.rate * (m1 * m1 + s2) * std::exp(e);
            } else {
                return ts_jump_J2(j, l);
            }
        },
        jumps);
}

inline std::complex<double> jump_psi(const JumpSpec& jumps, double l) {
    using C = std::complex<double>;
    return std::visit(
        [l](const auto& j) -> C {
            using T = std::decay_t<decltype(j)>;
            const C il(0.0, l);
            if constexpr (std::is_same_v<T, NoJumps>) {
                return C(0.0, 0.0);
            } else if constexpr (std::is_same_v<T, PointMassJumps>) {
                return j.rate * (1.0 - std::exp(il * j.size) + il * j.size);
            } else if constexpr (std::is_same_v<T, TwoSidedExpJumps>) {
                const double p = j.p_up, q = 1.0 - j.p_up;
                C ft(0.0, 0.0);
                double m = 0.0;
                if (p > 0.0) {
                    ft += p * j.eta_plus / (j.eta_plus - il);
                    m += p / j.eta_plus;
                }
                if (q > 0.0) {
                    ft += q * j.eta_minus / (j.eta_minus + il);
                    m -= q / j.eta_minus;
                }
                return j.rate * (1.0 - ft + il * m);
            } else if constexpr (std::is_same_v<T, GaussianJumps>) {
                const C e = il * j.mean - 0.5 * l * l * j.stddev * j.stddev;
                return j.rate * (1.0 - std::exp(e) + il * j.mean);
            } else {
                return ts_jump_psi(j, l);
            }
        },
        jumps);
}

}  // namespace detail

// Laplace exponent: E[e^{l xi(t)}] = e^{t Phi(l)}; +inf outside the domain.
inline double laplace_exponent(const LevyTriplet& t, double l) {
    if (!exponent_domain(t).contains(l)) return inf;
    return -t.drift_a * l + 0.5 * t.sigma * t.sigma * l * l + detail::jump_J(t.jumps, l);
}

inline double laplace_exponent_d1(const LevyTriplet& t, double l) {
    if (!exponent_domain(t).interior(l))
        throw DomainError("laplace_exponent_d1: argument outside the domain interior");
    return -t.drift_a + t.sigma * t.sigma * l + detail::jump_J1(t.jumps, l);
}

inline double laplace_exponent_d2(const LevyTriplet& t, double l) {
    if (!exponent_domain(t).interior(l))
        throw DomainError("laplace_exponent_d2: argument outside the domain interior");
    return t.sigma * t.sigma + detail::jump_J2(t.jumps, l);
}

// Characteristic exponent: E[e^{i l xi(t)}] = e^{-t Psi(l)}.
inline std::complex<double> characteristic_exponent(const LevyTriplet& t, double l) {
    const std::complex<double> il(0.0, l);
    return t.drift_a * il + 0.5 * t.sigma * t.sigma * l * l + detail::jump_psi(t.jumps, l);
}

// First moment of the time-one marginal (equals -drift_a by compensation).
inline double mean_increment(const LevyTriplet& t) { return laplace_exponent_d1(t, 0.0); }

// Exponential tilt by theta: the tilted process has exponent
// Phi_theta(l) = Phi(l + theta) - Phi(theta) and stays inside the family.
inline LevyTriplet esscher(const LevyTriplet& t, double theta) {
    if (theta == 0.0) return t;
    if (!exponent_domain(t).interior(theta))
        throw DomainError("esscher: tilt parameter outside the domain interior");
    LevyTriplet out = t;
    out.drift_a = t.drift_a - t.sigma * t.sigma * theta - detail::jump_J1(t.jumps, theta);
    out.jumps = std::visit(
        [theta](const auto& j) -> JumpSpec {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, NoJumps>) {
                return j;
            } else if constexpr (std::is_same_v<T, PointMassJumps>) {
                PointMassJumps o = j;
                o.rate = j.rate * std::exp(theta * j.size);
                return o;
            } else if constexpr (std::is_same_v<T, TwoSidedExpJumps>) {
                const double p = j.p_up, q = 1.0 - j.p_up;
                const double wp = p > 0.0 ? p * j.eta_plus / (j.eta_plus - theta) : 0.0;
                const double wq = q > 0.0 ? q * j.eta_minus / (j.eta_minus + theta) : 0.0;
                TwoSidedExpJumps o = j;
                o.rate = j.rate * (wp + wq);
                o.p_up = wp / (wp + wq);
                if (p > 0.0) o.eta_plus = j.eta_plus - theta;
                if (q > 0.0) o.eta_minus = j.eta_minus + theta;
                return o;
            } else if constexpr (std::is_same_v<T, GaussianJumps>) {
                GaussianJumps o = j;
                const double s2 = j.stddev * j.stddev;
                o.rate = j.rate * std::exp(theta * j.mean + 0.5 * theta * theta * s2);
                o.mean = j.mean + theta * s2;
                return o;
            } else {
                TemperedStableJumps o = j;
                o.tempering = j.tempering - (j.positive ? theta : -theta);
                return o;
            }
        },
        t.jumps);
    return out;
}

// Spatial reflection: the exponent of the reflected process is l -> Phi(-l).
inline LevyTriplet dual(const LevyTriplet& t) {
    LevyTriplet out = t;
    out.drift_a = -t.drift_a;
    out.jumps = std::visit(
        [](const auto& j) -> JumpSpec {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, NoJumps>) {
                return j;
            } else if constexpr (std::is_same_v<T, PointMassJumps>) {
                PointMassJumps o = j;
                o.size = -j.size;
                return o;
            } else if constexpr (std::is_same_v<T, TwoSidedExpJumps>) {
                TwoSidedExpJumps o = j;
                o.p_up = 1.0 - j.p_up;
                o.eta_plus = j.eta_minus;
                o.eta_minus = j.eta_plus;
                return o;
            } else if constexpr (std::is_same_v<T, GaussianJumps>) {
                GaussianJumps o = j;
                o.mean = -j.mean;
                return o;
            } else {
                TemperedStableJumps o = j;
                o.positive = !j.positive;
                return o;
            }
        },
        t.jumps);
    return out;
}

// Interior zero of Phi' between 0 and beta (requires a sign change).
inline double find_rho(const LevyTriplet& t, double beta) {
    const double d0 = laplace_exponent_d1(t, 0.0);
    const double db = laplace_exponent_d1(t, beta);
    if (!(d0 < 0.0) || !(db > 0.0))
        throw DomainError(
            "find_rho: needs a negative mean at 0 and a positive slope at beta "
            "(slope signs: " +
            std::to_string(d0) + ", " + std::to_string(db) + ")");
    double lo = 0.0, hi = beta;
    double mid = 0.5 * beta;
    for (int i = 0; i < 200; ++i) {
        mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const double d = laplace_exponent_d1(t, mid);
        if (d < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    // Safeguarded Newton polish inside the bracket.
    double x = mid;
    for (int i = 0; i < 4; ++i) {
        const double d1 = laplace_exponent_d1(t, x);
        const double d2 = laplace_exponent_d2(t, x);
        if (!(d2 > 0.0)) break;
        double nx = x - d1 / d2;
        if (!(nx > lo && nx < hi)) break;
        x = nx;
    }
    const double resid = std::fabs(laplace_exponent_d1(t, x));
    const double scale = std::max(1.0, std::fabs(laplace_exponent_d2(t, x)));
    if (!(resid <= 1e-10 * scale))
        throw EstimationError("find_rho: residual " + std::to_string(resid) +
                              " did not reach tolerance");
    return x;
}

enum class RegimeKind {
    Supercritical,
    Critical,
    WeaklySubcritical,
    IntermediatelySubcritical,
    StronglySubcritical
};

inline const char* regime_name(RegimeKind k) {
    switch (k) {
        case RegimeKind::Supercritical: return "supercritical";
        case RegimeKind::Critical: return "critical";
        case RegimeKind::WeaklySubcritical: return "weakly_subcritical";
        case RegimeKind::IntermediatelySubcritical: return "intermediately_subcritical";
        case RegimeKind::StronglySubcritical: return "strongly_subcritical";
    }
    return "?";
}

// Long-run decay shape of E[F(A_t)]: value ~ const * t^{poly} * e^{rate * t}.
struct Regime {
    RegimeKind kind{};
    double beta = 1.0;
    double mean = 0.0;       // Phi'(0)
    double phi_beta = 0.0;   // Phi(beta)
    double dphi_beta = 0.0;  // Phi'(beta)
    std::optional<double> rho;
    double decay_rate = 0.0;
    double poly_exponent = 0.0;
    double curvature = 0.0;  // Phi'' at the regime's saddle point
};

inline Regime classify_regime(const LevyTriplet& t, double beta, double tol = 1e-8) {
    validate(t);
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw ValidationError("classify_regime: beta must be positive and finite");
    const ExponentDomain dom = exponent_domain(t);
    if (!dom.interior(beta))
        throw DomainError("classify_regime: beta is not interior to the exponent domain");
    Regime r;
    r.beta = beta;
    r.mean = laplace_exponent_d1(t, 0.0);
    r.phi_beta = laplace_exponent(t, beta);
    r.dphi_beta = laplace_exponent_d1(t, beta);
    if (r.mean > tol) {
        r.kind = RegimeKind::Supercritical;
        r.decay_rate = 0.0;
        r.poly_exponent = 0.0;
        r.curvature = laplace_exponent_d2(t, 0.0);
    } else if (r.mean >= -tol) {
        r.kind = RegimeKind::Critical;
        r.decay_rate = 0.0;
        r.poly_exponent = -0.5;
        r.curvature = laplace_exponent_d2(t, 0.0);
    } else if (r.dphi_beta > tol) {
        r.kind = RegimeKind::WeaklySubcritical;
        r.rho = find_rho(t, beta);
        r.decay_rate = laplace_exponent(t, *r.rho);
        r.poly_exponent = -1.5;
        r.curvature = laplace_exponent_d2(t, *r.rho);
    } else if (r.dphi_beta >= -tol) {
        r.kind = RegimeKind::IntermediatelySubcritical;
        r.decay_rate = r.phi_beta;
        r.poly_exponent = -0.5;
        r.curvature = laplace_exponent_d2(t, beta);
    } else {
        r.kind = RegimeKind::StronglySubcritical;
        r.decay_rate = r.phi_beta;
        r.poly_exponent = 0.0;
        r.curvature = laplace_exponent_d2(t, beta);
    }
    return r;
}

}  // namespace expfun
