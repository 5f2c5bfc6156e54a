#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "errors.hpp"
#include "levy.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "simulate.hpp"

namespace expfun {

// Monte Carlo table of the ascending-ladder renewal function on a spatial grid.
// The step-delta skeleton fixes the local-time normalization only up to an
// unknown per-delta constant, so downstream formulas combine tables and slopes
// in normalization-cancelling products; value_at interpolates linearly and
// extrapolates with the asymptotic slope (renewal functions grow linearly).
struct RenewalTable {
    std::vector<double> grid;
    std::vector<double> values;
    std::vector<double> ses;
    double skeleton_step = 0.0;
    std::uint64_t n_paths = 0;
    std::uint64_t seed = 0;
    bool max_iteration_warning = false;

    // Secant slope over the last half of the grid, where the boundary layer
    // near 0 has died out and growth is linear.
    double slope() const {
        const std::size_t n = grid.size();
        if (n < 2) throw EstimationError("RenewalTable::slope: needs at least 2 grid points");
        const std::size_t i = n / 2;
        return (values[n - 1] - values[i - 1]) / (grid[n - 1] - grid[i - 1]);
    }
    double slope_se() const {
        const std::size_t n = grid.size();
        if (n < 2) throw EstimationError("RenewalTable::slope_se: needs at least 2 grid points");
        const std::size_t i = n / 2;
        return std::sqrt(ses[n - 1] * ses[n - 1] + ses[i - 1] * ses[i - 1]) /
               (grid[n - 1] - grid[i - 1]);
    }

    double value_at(double x) const {
        if (grid.empty()) throw EstimationError("RenewalTable::value_at: empty table");
        if (x <= 0.0) return x == 0.0 ? 1.0 : 0.0;
        // Epoch zero contributes exactly one ladder point at height 0.
        if (x <= grid.front())
            return 1.0 + (values.front() - 1.0) * (x / grid.front());
        if (x >= grid.back())
            return values.back() + slope() * (x - grid.back());
        const auto it = std::upper_bound(grid.begin(), grid.end(), x);
        const std::size_t j = static_cast<std::size_t>(it - grid.begin());
        const double f = (x - grid[j - 1]) / (grid[j] - grid[j - 1]);
        return values[j - 1] + f * (values[j] - values[j - 1]);
    }
};

namespace detail {

// Positive root of Phi (Lundberg exponent) for a process drifting to -infinity;
// falls back to the Gaussian-approximation rate when the domain truncates Phi
// before it returns to zero.
inline double lundberg_exponent(const LevyTriplet& t) {
    const double m = mean_increment(t);
    if (!(m < 0.0)) throw ValidationError("lundberg_exponent: needs negative mean");
    const ExponentDomain dom = exponent_domain(t);
    double hi = 1.0;
    const double cap = dom.upper == inf ? 1e8 : dom.upper;
    bool bracketed = false;
    while (hi < cap) {
        hi = std::min(cap, hi * 2.0);
        const double margin = dom.upper == inf ? 0.0 : 1e-12 * std::max(1.0, std::fabs(cap));
        const double probe = std::min(hi, cap - margin);
        if (probe <= 0.0) break;
        if (laplace_exponent(t, probe) > 0.0) {
            hi = probe;
            bracketed = true;
            break;
        }
        if (hi >= cap) break;
    }
    if (!bracketed) return 2.0 * std::fabs(m) / laplace_exponent_d2(t, 0.0);
    double lo = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (laplace_exponent(t, mid) > 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

// Estimates V(x) = expected number of weak ascending ladder points of the
// skeleton walk with height <= x (epoch 0 included). Paths stop once the
// running maximum clears the grid; for negative-mean processes they also stop
// after dropping 40/gamma below the running maximum, where gamma is the
// Lundberg exponent (the chance of a later new maximum is then e^{-40}).
// Paths hitting the step cap (horizon_t / step_h) set the warning flag.
inline RenewalTable renewal_function(const LevyTriplet& t, const std::vector<double>& grid,
                                     const SimConfig& config, unsigned workers = 0,
                                     std::uint64_t stream_base = streams::aux_paths) {
    validate(t);
    validate(config);
    if (grid.empty()) throw ValidationError("renewal_function: empty grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0)) throw ValidationError("renewal_function: grid must be positive");
        if (i && !(grid[i] > grid[i - 1]))
            throw ValidationError("renewal_function: grid must be strictly increasing");
    }
    const std::uint64_t n_max = grid_steps(config.horizon_t, config.step_h);
    const double x_max = grid.back();
    const double m = mean_increment(t);
    const double drop = m < 0.0 ? 40.0 / detail::lundberg_exponent(t) : inf;

    struct Partial {
        std::vector<double> sum, sumsq;
        std::uint64_t warnings = 0;
    };
    const std::size_t g = grid.size();
    Partial init;
    init.sum.assign(g, 0.0);
    init.sumsq.assign(g, 0.0);

    auto map_batch = [&](std::uint64_t lo, std::uint64_t hi) {
        Partial part = init;
        IncrementSampler inc(t, config.step_h, config.small_jump_cutoff);
        std::vector<std::uint32_t> tally(g);
        for (std::uint64_t p = lo; p < hi; ++p) {
            Philox eng(config.seed, stream_base + p);
            std::fill(tally.begin(), tally.end(), 0);
            double pos = 0.0, runmax = 0.0;
            for (std::uint64_t n = 0;; ++n) {
                if (n == n_max) {
                    ++part.warnings;
                    break;
                }
                pos += inc(eng);
                if (pos > runmax) {
                    runmax = pos;
                    if (pos > x_max) break;
                    const auto it = std::lower_bound(grid.begin(), grid.end(), pos);
                    ++tally[static_cast<std::size_t>(it - grid.begin())];
                } else if (pos < runmax - drop) {
                    break;
                }
            }
            double count = 1.0;  // epoch 0 at height 0
            for (std::size_t j = 0; j < g; ++j) {
                count += tally[j];
                part.sum[j] += count;
                part.sumsq[j] += count * count;
            }
        }
        return part;
    };
    auto combine = [g](Partial a, const Partial& b) {
        for (std::size_t j = 0; j < g; ++j) {
            a.sum[j] += b.sum[j];
            a.sumsq[j] += b.sumsq[j];
        }
        a.warnings += b.warnings;
        return a;
    };
    const Partial total =
        parallel_reduce_ordered(config.n_paths, 64, workers, init, map_batch, combine);

    RenewalTable table;
    table.grid = grid;
    table.skeleton_step = config.step_h;
    table.n_paths = config.n_paths;
    table.seed = config.seed;
    table.max_iteration_warning = total.warnings > 0;
    const double n = static_cast<double>(config.n_paths);
    for (std::size_t j = 0; j < g; ++j) {
        const double mean = total.sum[j] / n;
        const double var = std::max(0.0, (total.sumsq[j] - n * mean * mean) / (n - 1.0));
        table.values.push_back(mean);
        table.ses.push_back(std::sqrt(var / n));
    }
    return table;
}

// Weighted Monte Carlo estimate with an effective-sample-size diagnostic.
struct WeightedEstimate {
    double value = 0.0;
    double se = 0.0;
    double ess = 0.0;
    bool flagged = false;
    std::uint64_t n_paths = 0;
};

// Survivor sample for h-transform estimation: per surviving path the rebased
// exponential functional a = sum_k h e^{-alpha eta_k} (left endpoints, eta from
// 0) and the renewal weight w = Vhat(x + eta) at the stopping step, over paths
// whose running minimum stays strictly above -x until stopped. Paths stop at
// the horizon; with a finite escape_level they stop as soon as eta clears it,
// where the functional's remaining per-step tail is below e^{-alpha level}.
// The weight process is a martingale, so the weighted mean stays unbiased at
// any of these stopping times; capped counts survivors that exhausted the step
// budget before escaping (their functional is still mid-flight, so the caller
// should treat a non-negligible count as an unresolved-horizon diagnostic).
struct ConditionedSample {
    std::vector<double> a;
    std::vector<double> w;
    std::vector<std::uint64_t> idx;  // surviving path indices, ascending
    std::uint64_t n_total = 0;
    std::uint64_t capped = 0;  // survivors stopped by the step budget, not escape
    double vhat_x = 0.0;
};

inline ConditionedSample conditioned_sample(const LevyTriplet& t, const RenewalTable& vhat,
                                            double x, double horizon_t, double alpha,
                                            const SimConfig& config, unsigned workers = 0,
                                            std::uint64_t stream_base = streams::front_paths,
                                            double escape_level = inf) {
    validate(t);
    SimConfig probe = config;  // the horizon comes from the separate parameter
    probe.horizon_t = horizon_t;
    validate(probe);
    if (!(x > 0.0)) throw ValidationError("conditioned_sample: x must be positive");
    if (!(alpha > 0.0)) throw ValidationError("conditioned_sample: alpha must be positive");
    if (!(escape_level > 0.0))
        throw ValidationError("conditioned_sample: escape_level must be positive");
    const std::uint64_t n_steps = grid_steps(horizon_t, config.step_h);
    const double h = config.step_h;

    struct Partial {
        std::vector<double> a, w;
        std::vector<std::uint64_t> idx;
        std::uint64_t capped = 0;
    };
    auto map_batch = [&](std::uint64_t lo, std::uint64_t hi) {
        Partial part;
        IncrementSampler inc(t, h, config.small_jump_cutoff);
        for (std::uint64_t p = lo; p < hi; ++p) {
            Philox eng(config.seed, stream_base + p);
            double pos = 0.0, acc = 0.0;
            bool alive = true, escaped = false;
            for (std::uint64_t n = 0; n < n_steps; ++n) {
                acc += h * std::exp(-alpha * pos);
                pos += inc(eng);
                if (pos <= -x) {
                    alive = false;
                    break;
                }
                if (pos >= escape_level) {
                    escaped = true;
                    break;
                }
            }
            if (alive) {
                part.a.push_back(acc);
                part.w.push_back(vhat.value_at(x + pos));
                part.idx.push_back(p);
                if (!escaped && escape_level < inf) ++part.capped;
            }
        }
        return part;
    };
    auto combine = [](Partial a, const Partial& b) {
        a.a.insert(a.a.end(), b.a.begin(), b.a.end());
        a.w.insert(a.w.end(), b.w.begin(), b.w.end());
        a.idx.insert(a.idx.end(), b.idx.begin(), b.idx.end());
        a.capped += b.capped;
        return a;
    };
    const Partial total =
        parallel_reduce_ordered(config.n_paths, 64, workers, Partial{}, map_batch, combine);

    ConditionedSample sample;
    sample.a = total.a;
    sample.w = total.w;
    sample.idx = total.idx;
    sample.n_total = config.n_paths;
    sample.capped = total.capped;
    sample.vhat_x = vhat.value_at(x);
    return sample;
}

// Estimates Q_x[g(A_T)] for the process conditioned to stay positive, as
// Vhat(x)^{-1} E[Vhat(x + eta_T) 1{min eta > -x} g(A_T(eta))]; the weight
// process is a martingale, so g == 1 estimates 1 exactly in expectation.
template <class G>
WeightedEstimate conditioned_estimate(const ConditionedSample& s, G&& g) {
    if (s.n_total < 2) throw ValidationError("conditioned_estimate: needs at least 2 paths");
    const double n = static_cast<double>(s.n_total);
    double sum = 0.0, sumsq = 0.0, wsum = 0.0, wsumsq = 0.0;
    for (std::size_t i = 0; i < s.a.size(); ++i) {
        const double z = s.w[i] * g(s.a[i]) / s.vhat_x;
        sum += z;
        sumsq += z * z;
        wsum += s.w[i];
        wsumsq += s.w[i] * s.w[i];
    }
    WeightedEstimate est;
    est.n_paths = s.n_total;
    est.value = sum / n;
    est.se = std::sqrt(std::max(0.0, (sumsq - n * (sum / n) * (sum / n)) / (n - 1.0)) / n);
    est.ess = wsumsq > 0.0 ? wsum * wsum / wsumsq : 0.0;
    est.flagged = est.ess < 100.0;
    return est;
}

template <class G>
WeightedEstimate conditioned_expectation(const LevyTriplet& t, const RenewalTable& vhat, double x,
                                         double horizon_t, double alpha, const SimConfig& config,
                                         G&& g, unsigned workers = 0,
                                         std::uint64_t stream_base = streams::front_paths) {
    return conditioned_estimate(
        conditioned_sample(t, vhat, x, horizon_t, alpha, config, workers, stream_base),
        std::forward<G>(g));
}

}  // namespace expfun
