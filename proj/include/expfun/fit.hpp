#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <vector>

#include "errors.hpp"

namespace expfun {

// One time-grid point of an estimated expectation curve.
struct CurvePoint {
    double t = 0.0;
    double value = 0.0;
    double se = 0.0;
    bool flagged = false;  // low effective sample size or other diagnostic failure
};

// Monte Carlo estimates of t -> E[F(A_t)] plus sampling metadata.
struct ExpectationCurve {
    std::vector<CurvePoint> points;
    std::uint64_t n_paths = 0;
    std::uint64_t seed = 0;
    std::optional<double> tilt;  // Esscher parameter when importance sampling was used
};

// Weighted least-squares fit of log E = intercept + rate*t + poly_exponent*log t.
struct DecayFit {
    double intercept = 0.0;
    double rate = 0.0;
    double poly_exponent = 0.0;
    double intercept_se = 0.0;
    double rate_se = 0.0;
    double poly_se = 0.0;
    double chi2 = 0.0;
    std::size_t n_used = 0;
    std::size_t n_dropped = 0;
};

namespace detail {

// Solves the symmetric positive-definite system M z = r in place, returning
// the solution and the inverse of M (for parameter covariances). Dimension d <= 3.
template <std::size_t d>
void solve_spd(std::array<std::array<double, d>, d> m, std::array<double, d> r,
               std::array<double, d>& z, std::array<std::array<double, d>, d>& inv) {
    // Augment with the identity and run Gauss-Jordan with partial pivoting.
    std::array<std::array<double, 2 * d>, d> a{};
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) a[i][j] = m[i][j];
        a[i][d + i] = 1.0;
    }
    for (std::size_t c = 0; c < d; ++c) {
        std::size_t p = c;
        for (std::size_t i = c + 1; i < d; ++i)
            if (std::fabs(a[i][c]) > std::fabs(a[p][c])) p = i;
        if (std::fabs(a[p][c]) < 1e-300) throw EstimationError("fit_decay: singular normal equations");
        std::swap(a[c], a[p]);
        const double piv = a[c][c];
        for (std::size_t j = 0; j < 2 * d; ++j) a[c][j] /= piv;
        for (std::size_t i = 0; i < d; ++i) {
            if (i == c) continue;
            const double f = a[i][c];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < 2 * d; ++j) a[i][j] -= f * a[c][j];
        }
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) inv[i][j] = a[i][d + j];
    for (std::size_t i = 0; i < d; ++i) {
        z[i] = 0.0;
        for (std::size_t j = 0; j < d; ++j) z[i] += inv[i][j] * r[j];
    }
}

}  // namespace detail

// Fits log E = intercept + rate*t + poly_exponent*log t by weighted least squares.
// Weights are (value/se)^2 (delta method for the log transform); points with
// non-positive value, non-positive t, or a diagnostic flag are dropped. Either
// coefficient can be pinned to a theoretical value, in which case only the
// remaining parameters are fitted and the pinned one reports zero stderr.
inline DecayFit fit_decay(const ExpectationCurve& curve,
                          std::optional<double> pin_rate = std::nullopt,
                          std::optional<double> pin_poly = std::nullopt) {
    struct Row {
        double y, t, lt, w;
    };
    std::vector<Row> rows;
    rows.reserve(curve.points.size());
    std::size_t dropped = 0;
    for (const auto& p : curve.points) {
        if (!(p.value > 0.0) || !(p.t > 0.0) || p.flagged) {
            ++dropped;
            continue;
        }
        const double rel = p.se > 0.0 ? p.se / p.value : 0.0;
        rows.push_back({std::log(p.value), p.t, std::log(p.t), rel > 0.0 ? 1.0 / (rel * rel) : 1.0});
    }
    if (rows.size() < 6) {
        std::ostringstream os;
        os << "fit_decay: needs >= 6 usable points, got " << rows.size() << " (" << dropped
           << " dropped)";
        throw EstimationError(os.str());
    }

    // Column layout: 0 -> intercept (always fitted), 1 -> t, 2 -> log t.
    std::vector<std::size_t> free_cols{0};
    if (!pin_rate) free_cols.push_back(1);
    if (!pin_poly) free_cols.push_back(2);
    const std::size_t d = free_cols.size();

    auto basis = [](const Row& r, std::size_t col) {
        return col == 0 ? 1.0 : (col == 1 ? r.t : r.lt);
    };
    auto target = [&](const Row& r) {
        double y = r.y;
        if (pin_rate) y -= *pin_rate * r.t;
        if (pin_poly) y -= *pin_poly * r.lt;
        return y;
    };

    std::array<std::array<double, 3>, 3> m{};
    std::array<double, 3> rhs{};
    for (const auto& r : rows) {
        const double y = target(r);
        for (std::size_t i = 0; i < d; ++i) {
            const double xi = basis(r, free_cols[i]);
            rhs[i] += r.w * xi * y;
            for (std::size_t j = 0; j < d; ++j) m[i][j] += r.w * xi * basis(r, free_cols[j]);
        }
    }

    std::array<double, 3> z{};
    std::array<std::array<double, 3>, 3> inv{};
    if (d == 1) {
        std::array<std::array<double, 1>, 1> m1{{{m[0][0]}}};
        std::array<double, 1> r1{rhs[0]}, z1{};
        std::array<std::array<double, 1>, 1> i1{};
        detail::solve_spd<1>(m1, r1, z1, i1);
        z[0] = z1[0];
        inv[0][0] = i1[0][0];
    } else if (d == 2) {
        std::array<std::array<double, 2>, 2> m2{{{m[0][0], m[0][1]}, {m[1][0], m[1][1]}}};
        std::array<double, 2> r2{rhs[0], rhs[1]}, z2{};
        std::array<std::array<double, 2>, 2> i2{};
        detail::solve_spd<2>(m2, r2, z2, i2);
        for (std::size_t i = 0; i < 2; ++i) {
            z[i] = z2[i];
            for (std::size_t j = 0; j < 2; ++j) inv[i][j] = i2[i][j];
        }
    } else {
        detail::solve_spd<3>(m, rhs, z, inv);
    }

    DecayFit fit;
    fit.n_used = rows.size();
    fit.n_dropped = dropped;
    std::array<double, 3> coef{0.0, pin_rate.value_or(0.0), pin_poly.value_or(0.0)};
    std::array<double, 3> ses{};
    for (std::size_t i = 0; i < d; ++i) {
        coef[free_cols[i]] = z[i];
        ses[free_cols[i]] = std::sqrt(std::max(0.0, inv[i][i]));
    }
    fit.intercept = coef[0];
    fit.rate = coef[1];
    fit.poly_exponent = coef[2];
    fit.intercept_se = ses[0];
    fit.rate_se = ses[1];
    fit.poly_se = ses[2];
    for (const auto& r : rows) {
        const double res = r.y - (fit.intercept + fit.rate * r.t + fit.poly_exponent * r.lt);
        fit.chi2 += r.w * res * res;
    }
    return fit;
}

}  // namespace expfun
