#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "expfun/errors.hpp"
#include "expfun/levy.hpp"
#include "expfun/quadrature.hpp"
#include "expfun/rng.hpp"

namespace expfun {

struct SimConfig {
    double step_h = 0.0;
    double horizon_t = 0.0;
    double small_jump_cutoff = 0.0;  // 0 = automatic (tempered-stable only)
    std::uint64_t seed = 0;
    std::uint64_t n_paths = 1;
};

inline void validate(const SimConfig& c) {
    if (!(c.step_h > 0.0) || !std::isfinite(c.step_h))
        throw ValidationError("SimConfig: step_h must be positive");
    if (!(c.horizon_t > 0.0) || !std::isfinite(c.horizon_t))
        throw ValidationError("SimConfig: horizon_t must be positive");
    if (c.step_h > c.horizon_t) throw ValidationError("SimConfig: step_h exceeds horizon_t");
    if (c.small_jump_cutoff < 0.0 || !std::isfinite(c.small_jump_cutoff))
        throw ValidationError("SimConfig: small_jump_cutoff must be nonnegative");
    if (c.n_paths == 0) throw ValidationError("SimConfig: n_paths must be positive");
}

// Number of steps to cover the horizon; the grid must close exactly.
inline std::uint64_t grid_steps(double horizon_t, double step_h) {
    const auto n = static_cast<std::uint64_t>(std::llround(horizon_t / step_h));
    if (n < 1 || std::fabs(static_cast<double>(n) * step_h - horizon_t) >
                     1e-9 * std::max(1.0, horizon_t))
        throw ValidationError("horizon_t must be an integer multiple of step_h");
    return n;
}

struct PathSample {
    std::vector<double> times;
    std::vector<double> values;
    std::vector<double> sup;
    std::vector<double> inf;
};

struct ExpFunctionalSample {
    double alpha = 0.0;
    double t = 0.0;  // inf for adaptive evaluations
    double value = 0.0;
    bool truncation_flag = false;  // true when an adaptive run stopped by tail bound
};

class InfiniteFunctionalError : public SimulationError {
    using SimulationError::SimulationError;
};

// Draws one step-h increment of the process. The Gaussian part (diffusion plus
// the variance of replaced small jumps) is folded into a single normal draw;
// compound-Poisson jumps are sampled exactly; tempered-stable jumps >= cutoff
// use a Pareto proposal with exponential thinning. Compensation keeps the mean
// of every increment at -drift_a * h exactly.
class IncrementSampler {
  public:
    IncrementSampler(const LevyTriplet& t, double step_h, double cutoff = 0.0)
        : h_(step_h) {
        validate(t);
        if (!(step_h > 0.0)) throw ValidationError("IncrementSampler: step_h must be positive");
        double jump_mean_rate = 0.0;   // mean jump mass per unit time, large jumps only
        double small_var_rate = 0.0;   // variance per unit time of replaced small jumps
        double event_rate = 0.0;
        std::visit(
            [&](const auto& j) {
                using T = std::decay_t<decltype(j)>;
                if constexpr (std::is_same_v<T, NoJumps>) {
                    family_ = Family::None;
                } else if constexpr (std::is_same_v<T, PointMassJumps>) {
                    family_ = Family::PointMass;
                    size_ = j.size;
                    event_rate = j.rate;
                    jump_mean_rate = j.rate * j.size;
                } else if constexpr (std::is_same_v<T, TwoSidedExpJumps>) {
                    family_ = Family::TwoSidedExp;
                    p_up_ = j.p_up;
                    eta_plus_ = j.eta_plus;
                    eta_minus_ = j.eta_minus;
                    event_rate = j.rate;
                    jump_mean_rate =
                        j.rate * (j.p_up / j.eta_plus - (1.0 - j.p_up) / j.eta_minus);
                } else if constexpr (std::is_same_v<T, GaussianJumps>) {
                    family_ = Family::Gaussian;
                    jump_mean_ = j.mean;
                    jump_std_ = j.stddev;
                    event_rate = j.rate;
                    jump_mean_rate = j.rate * j.mean;
                } else {
                    family_ = Family::TemperedStable;
                    stability_ = j.stability;
                    tempering_ = j.tempering;
                    sign_ = j.positive ? 1.0 : -1.0;
                    eps_ = resolve_cutoff(t, j, cutoff);
                    // tail integrals of x^{-k-b} e^{-theta x}: the substitution
                    // u = (eps/x)^{k+b-1} turns each into a bounded, smooth
                    // integrand regardless of how small eps is
                    const double b = j.stability, th = j.tempering, e = eps_;
                    event_rate = j.scale * std::pow(e, -b) / b *
                                 integrate(
                                     [b, th, e](double u) {
                                         return std::exp(-th * e * std::pow(u, -1.0 / b));
                                     },
                                     0.0, 1.0, 1e-12);
                    double mean_tail;  // integral of x^{-b} e^{-theta x} over [eps, inf)
                    if (b > 1.0) {
                        mean_tail = std::pow(e, 1.0 - b) / (b - 1.0) *
                                    integrate(
                                        [b, th, e](double u) {
                                            return std::exp(-th * e *
                                                            std::pow(u, -1.0 / (b - 1.0)));
                                        },
                                        0.0, 1.0, 1e-12);
                    } else if (b == 1.0) {
                        mean_tail = integrate_upper(
                            [th, e](double v) { return std::exp(-th * e * std::exp(v)); }, 0.0,
                            1e-11);
                    } else {
                        const double s = 1.0 / (1.0 - b);
                        mean_tail = s * integrate_upper(
                                            [th, s](double y) {
                                                return std::exp(-th * std::pow(y, s));
                                            },
                                            std::pow(e, 1.0 - b), 1e-12);
                    }
                    jump_mean_rate = sign_ * j.scale * mean_tail;
                    small_var_rate = small_jump_variance_rate(j, eps_);
                }
            },
            t.jumps);
        drift_step_ = (-t.drift_a - jump_mean_rate) * h_;
        gauss_std_ = std::sqrt(h_ * (t.sigma * t.sigma + small_var_rate));
        if (event_rate > 0.0) count_ = std::poisson_distribution<long>(event_rate * h_);
    }

    template <class Engine>
    double operator()(Engine& eng) {
        double x = drift_step_;
        if (gauss_std_ > 0.0) x += gauss_std_ * norm_(eng);
        switch (family_) {
            case Family::None:
                break;
            case Family::PointMass: {
                x += size_ * static_cast<double>(count_(eng));
                break;
            }
            case Family::TwoSidedExp: {
                const long n = count_(eng);
                for (long i = 0; i < n; ++i) {
                    if (uni_(eng) < p_up_)
                        x += expo_(eng) / eta_plus_;
                    else
                        x -= expo_(eng) / eta_minus_;
                }
                break;
            }
            case Family::Gaussian: {
                const long n = count_(eng);
                for (long i = 0; i < n; ++i) x += jump_mean_ + jump_std_ * norm_(eng);
                break;
            }
            case Family::TemperedStable: {
                const long n = count_(eng);
                for (long i = 0; i < n; ++i) x += sign_ * sample_large_jump(eng);
                break;
            }
        }
        return x;
    }

    double step() const { return h_; }
    double cutoff() const { return eps_; }

  private:
    enum class Family { None, PointMass, TwoSidedExp, Gaussian, TemperedStable };

    static double small_jump_variance_rate(const TemperedStableJumps& j, double eps) {
        const double b = j.stability, th = j.tempering;
        return j.scale * std::pow(eps, 2.0 - b) *
               integrate_singular0(
                   [b, th, eps](double y) {
                       return std::pow(y, 1.0 - b) * std::exp(-th * eps * y);
                   },
                   1.0, b - 1.0, 1e-10);
    }

    static double resolve_cutoff(const LevyTriplet& t, const TemperedStableJumps& j,
                                 double cutoff) {
        const double scale_cap = 0.5 / j.tempering;
        if (cutoff > 0.0) {
            if (cutoff >= 2.0 * scale_cap)
                throw ValidationError(
                    "small_jump_cutoff must lie below the jump scale 1/tempering");
            return cutoff;
        }
        // default: replaced variance below 1e-6 of the total increment variance
        const double target = 1e-6 * laplace_exponent_d2(t, 0.0);
        if (small_jump_variance_rate(j, scale_cap) <= target) return scale_cap;
        double lo = 1e-14, hi = scale_cap;
        for (int i = 0; i < 200 && hi - lo > 1e-18 + 1e-12 * hi; ++i) {
            const double mid = 0.5 * (lo + hi);
            (small_jump_variance_rate(j, mid) <= target ? lo : hi) = mid;
        }
        return lo;
    }

    template <class Engine>
    double sample_large_jump(Engine& eng) {
        // proposal: Pareto on [eps, inf) with index b; thin by exp(-theta (x - eps))
        for (;;) {
            const double u = 1.0 - uni_(eng);  // guard against exact zero
            const double x = eps_ * std::pow(u, -1.0 / stability_);
            if (uni_(eng) <= std::exp(-tempering_ * (x - eps_))) return x;
        }
    }

    double h_ = 0.0;
    double drift_step_ = 0.0;
    double gauss_std_ = 0.0;
    Family family_ = Family::None;
    double size_ = 0.0;                              // point mass
    double p_up_ = 0.0, eta_plus_ = 0.0, eta_minus_ = 0.0;  // two-sided exponential
    double jump_mean_ = 0.0, jump_std_ = 0.0;        // Gaussian jumps
    double stability_ = 0.0, tempering_ = 0.0, sign_ = 1.0, eps_ = 0.0;  // tempered stable
    std::poisson_distribution<long> count_{1.0};
    std::normal_distribution<double> norm_{0.0, 1.0};
    std::exponential_distribution<double> expo_{1.0};
    std::uniform_real_distribution<double> uni_{0.0, 1.0};
};

inline PathSample simulate_path(const LevyTriplet& t, const SimConfig& c, double start,
                                std::uint64_t path_index = 0,
                                std::uint64_t stream_base = streams::main_paths) {
    validate(c);
    const std::uint64_t n = grid_steps(c.horizon_t, c.step_h);
    IncrementSampler inc(t, c.step_h, c.small_jump_cutoff);
    Philox eng(c.seed, stream_base + path_index);
    PathSample p;
    p.times.reserve(n + 1);
    p.values.reserve(n + 1);
    p.sup.reserve(n + 1);
    p.inf.reserve(n + 1);
    double x = start, s = start, i0 = start;
    p.times.push_back(0.0);
    p.values.push_back(x);
    p.sup.push_back(s);
    p.inf.push_back(i0);
    for (std::uint64_t k = 1; k <= n; ++k) {
        x += inc(eng);
        s = std::max(s, x);
        i0 = std::min(i0, x);
        p.times.push_back(static_cast<double>(k) * c.step_h);
        p.values.push_back(x);
        p.sup.push_back(s);
        p.inf.push_back(i0);
    }
    return p;
}

inline ExpFunctionalSample exp_functional(const PathSample& path, double alpha) {
    if (!(alpha > 0.0)) throw ValidationError("exp_functional: alpha must be positive");
    if (path.times.empty()) throw ValidationError("exp_functional: empty path");
    double v = 0.0;
    for (std::size_t i = 0; i + 1 < path.times.size(); ++i)
        v += std::exp(-alpha * path.values[i]) * (path.times[i + 1] - path.times[i]);
    return {alpha, path.times.back(), v, false};
}

// Adaptive evaluation of the infinite-horizon functional. Simulates in blocks
// of about 10/mean time units; after each block the remaining tail is bounded
// by (block length) * e^{-alpha * block minimum} * geometric factor, assuming
// future block minima climb by at least half the mean drift per block.
inline ExpFunctionalSample exp_functional_inf(const LevyTriplet& t, double alpha,
                                              const SimConfig& c, std::uint64_t path_index = 0,
                                              double rel_tol = 1e-6,
                                              std::uint64_t stream_base = streams::main_paths) {
    validate(c);
    if (!(alpha > 0.0)) throw ValidationError("exp_functional_inf: alpha must be positive");
    const double m = mean_increment(t);
    if (!(m > 0.0))
        throw InfiniteFunctionalError(
            "exp_functional_inf: the functional is almost surely infinite unless the mean "
            "increment is positive");
    IncrementSampler inc(t, c.step_h, c.small_jump_cutoff);
    Philox eng(c.seed, stream_base + path_index);
    const auto steps_per_block =
        static_cast<std::uint64_t>(std::ceil(10.0 / m / c.step_h));
    const double block_len = static_cast<double>(steps_per_block) * c.step_h;
    const double ratio = std::exp(-alpha * 0.5 * m * block_len);
    const double geom = 1.0 / (1.0 - ratio);
    const std::uint64_t max_blocks = 1000;
    double acc = 0.0, x = 0.0, elapsed = 0.0;
    for (std::uint64_t b = 0; b < max_blocks; ++b) {
        double block_min = x;
        for (std::uint64_t k = 0; k < steps_per_block; ++k) {
            acc += std::exp(-alpha * x) * c.step_h;
            x += inc(eng);
            block_min = std::min(block_min, x);
        }
        elapsed += block_len;
        const double tail = std::exp(-alpha * block_min) * block_len * geom;
        if (tail <= rel_tol * acc) return {alpha, inf, acc, true};
    }
    return {alpha, elapsed, acc, false};
}

inline std::optional<double> hitting_time(const PathSample& path, double level) {
    if (path.values.empty() || path.inf.back() > level) return std::nullopt;
    for (std::size_t i = 0; i < path.values.size(); ++i)
        if (path.values[i] <= level) return path.times[i];
    return std::nullopt;
}

// Streaming per-path summary used by the estimator modules: terminal value,
// running extrema, and the left-Riemann exponential functional, without
// storing the grid.
struct PathStats {
    double terminal = 0.0;
    double infimum = 0.0;
    double supremum = 0.0;
    double a_alpha = 0.0;
};

template <class Engine>
inline PathStats run_path_stats(IncrementSampler& inc, Engine& eng, std::uint64_t n_steps,
                                double alpha, double start = 0.0) {
    PathStats st{start, start, start, 0.0};
    double x = start;
    const double h = inc.step();
    for (std::uint64_t k = 0; k < n_steps; ++k) {
        st.a_alpha += std::exp(-alpha * x) * h;
        x += inc(eng);
        st.infimum = std::min(st.infimum, x);
        st.supremum = std::max(st.supremum, x);
    }
    st.terminal = x;
    return st;
}

}  // namespace expfun
