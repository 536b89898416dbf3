#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "tontine/error.hpp"
#include "tontine/normal.hpp"
#include "tontine/parallel.hpp"
#include "tontine/random.hpp"

namespace tontine {

struct ApproxInputs {
    int n = 1000;
    double eps_lower = 0.1;
    std::optional<double> eps_upper;
    double beta = 0.9;

    void validate() const {
        require(n >= 1, "N must be positive");
        require(eps_lower > 0.0 && eps_lower < 1.0, "eps_lower must lie in (0, 1)");
        require(!eps_upper || *eps_upper > 0.0, "eps_upper must be positive");
        require(beta > 0.0 && beta < 1.0, "beta must lie in (0, 1)");
    }
};

/// Index i of the largest grid point i/N not exceeding u, capped at N.
inline int floor_n_index(double u, int n) {
    require(n >= 1, "N must be positive");
    require(u >= 0.0, "floor_n needs u >= 0");
    if (u >= 1.0) return n;
    auto i = static_cast<long long>(std::floor(u * n));
    while (i + 1 <= n && static_cast<double>(i + 1) / n <= u) ++i;
    while (i > 0 && static_cast<double>(i) / n > u) --i;
    return static_cast<int>(i);
}

/// max{ i/N : i/N <= u, i in 0..N }
inline double floor_n(double u, int n) { return static_cast<double>(floor_n_index(u, n)) / n; }

/// Closed-form approximation to k_U for a lower income threshold:
///   N (1 - floor_N( (1 - 1/(1 + ((1-eps)/eps)^2 z^2 / N)) / (1 - eps) )),
/// z = Phi^-1((1 - beta)/2).
inline int approx_k_u(int n, double eps, double beta) {
    require(n >= 1, "N must be positive");
    require(eps > 0.0 && eps < 1.0, "eps must lie in (0, 1)");
    require(beta > 0.0 && beta < 1.0, "beta must lie in (0, 1)");
    const double z = normal_quantile((1.0 - beta) / 2.0);
    const double ratio = (1.0 - eps) / eps;
    const double inner = 1.0 / (1.0 + ratio * ratio * z * z / n);
    const double u = (1.0 - inner) / (1.0 - eps);
    return n - floor_n_index(u, n);
}

struct PsiEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Euler-discretized Brownian paths monitored against the barriers
///   sup_{s <= h1(y)} W(s) <= sqrt(N) eps1 / (1 - eps1)
///   inf_{s <= h2(y)} W(s) >= -sqrt(N) eps2 / (1 + eps2)
/// with h1(y) = 1/((1 - eps1)(1 - y)) - 1 and h2(y) = 1/((1 + eps2)(1 - y)) - 1.
///
/// Each path keeps its own generator and is extended lazily, so evaluating
/// Psi at several y reuses the same random numbers and the result does not
/// depend on the order of evaluation or on the thread count. Barriers are
/// checked on the grid only, which slightly understates crossings.
class BrownianBandPaths {
public:
    BrownianBandPaths(const ApproxInputs& inputs, std::uint64_t paths, int steps_per_unit, std::uint64_t seed,
                      unsigned threads = 0)
        : eps_lower_(inputs.eps_lower), eps_upper_(inputs.eps_upper), threads_(threads) {
        require(inputs.n >= 1, "N must be positive");
        require(inputs.eps_lower > 0.0 && inputs.eps_lower < 1.0, "eps_lower must lie in (0, 1)");
        require(!inputs.eps_upper || *inputs.eps_upper > 0.0, "eps_upper must be positive");
        require(paths >= 1, "need at least one path");
        require(steps_per_unit >= 1, "need at least one step per unit horizon");
        const double root_n = std::sqrt(static_cast<double>(inputs.n));
        upper_barrier_ = root_n * eps_lower_ / (1.0 - eps_lower_);
        lower_barrier_ = eps_upper_ ? root_n * *eps_upper_ / (1.0 + *eps_upper_)
                                    : std::numeric_limits<double>::infinity();
        dt_ = 1.0 / steps_per_unit;
        states_.reserve(paths);
        for (std::uint64_t p = 0; p < paths; ++p) states_.push_back(PathState{Rng::for_stream(seed, p)});
    }

    double upper_horizon(double y) const { return 1.0 / ((1.0 - eps_lower_) * (1.0 - y)) - 1.0; }

    double lower_horizon(double y) const {
        if (!eps_upper_) return -std::numeric_limits<double>::infinity();
        return 1.0 / ((1.0 + *eps_upper_) * (1.0 - y)) - 1.0;
    }

    std::uint64_t paths() const noexcept { return states_.size(); }

    /// Monte Carlo estimate of Psi(y) with its binomial standard error.
    PsiEstimate evaluate(double y) {
        require(y >= 0.0 && y < 1.0, "y must lie in [0, 1)");
        const double h1 = upper_horizon(y);
        const double h2 = lower_horizon(y);
        require(std::isfinite(h1) && (!eps_upper_ || std::isfinite(h2)), "non-finite horizon");
        extend_to(h1);
        std::uint64_t ok = 0;
        for (const auto& s : states_) {
            const bool upper_ok = s.upper_hit < 0 || static_cast<double>(s.upper_hit) * dt_ > h1;
            const bool lower_ok = s.lower_hit < 0 || static_cast<double>(s.lower_hit) * dt_ > h2;
            ok += upper_ok && lower_ok;
        }
        const double m = static_cast<double>(states_.size());
        const double p = static_cast<double>(ok) / m;
        return {p, std::sqrt(p * (1.0 - p) / m)};
    }

private:
    struct PathState {
        Rng rng;
        double w = 0.0;
        long long step = 0;
        long long upper_hit = -1;
        long long lower_hit = -1;
    };

    // Paths stop once no larger horizon can change their outcome.
    long long final_step(const PathState& s) const {
        if (s.upper_hit >= 0) return s.step;
        if (s.lower_hit >= 0 && eps_upper_) {
            const double t2 = static_cast<double>(s.lower_hit) * dt_;
            const double h1 = (1.0 + *eps_upper_) * (1.0 + t2) / (1.0 - eps_lower_) - 1.0;
            return static_cast<long long>(std::floor(h1 / dt_)) + 1;
        }
        return std::numeric_limits<long long>::max();
    }

    void extend_to(double horizon) {
        const auto target = static_cast<long long>(std::floor(horizon / dt_));
        const double sd = std::sqrt(dt_);
        parallel_blocks(states_.size(), threads_, [&](unsigned, std::uint64_t begin, std::uint64_t end) {
            for (std::uint64_t p = begin; p < end; ++p) {
                auto& s = states_[p];
                long long stop = std::min(target, final_step(s));
                while (s.step < stop) {
                    s.w += sd * s.rng.normal();
                    ++s.step;
                    if (s.upper_hit < 0 && s.w > upper_barrier_) {
                        s.upper_hit = s.step;
                        break;
                    }
                    if (s.lower_hit < 0 && s.w < -lower_barrier_) {
                        s.lower_hit = s.step;
                        stop = std::min(target, final_step(s));
                    }
                }
            }
        });
    }

    double eps_lower_;
    std::optional<double> eps_upper_;
    unsigned threads_;
    double upper_barrier_ = 0.0;
    double lower_barrier_ = 0.0;
    double dt_ = 0.0;
    std::vector<PathState> states_;
};

/// Psi(y): probability that Brownian motion stays inside both barriers over
/// their horizons, estimated from `paths` Euler paths.
inline PsiEstimate psi(double eps_lower, std::optional<double> eps_upper, int n, double y, std::uint64_t paths,
                       int steps_per_unit, std::uint64_t seed, unsigned threads = 0) {
    require(y > 0.0 && y < 1.0, "y must lie in (0, 1)");
    BrownianBandPaths engine(ApproxInputs{n, eps_lower, eps_upper, 0.5}, paths, steps_per_unit, seed, threads);
    return engine.evaluate(y);
}

struct TwoSidedApprox {
    int k = 0;
    double y = 0.0;  // approximate Psi^-1(beta)
};

/// k_U ~ N floor_N(Psi^-1(beta)), inverting Psi by bisection on y to 1e-4
/// with common random numbers across evaluations.
inline TwoSidedApprox approx_k_u_two_sided(const ApproxInputs& inputs, std::uint64_t paths, int steps_per_unit,
                                           std::uint64_t seed, unsigned threads = 0) {
    inputs.validate();
    BrownianBandPaths engine(inputs, paths, steps_per_unit, seed, threads);
    require(engine.evaluate(0.0).value >= inputs.beta, "beta exceeds the attainable range of Psi");
    double lo = 0.0;
    double hi = 1.0;
    while (hi - lo > 1e-4) {
        const double mid = 0.5 * (lo + hi);
        if (engine.evaluate(mid).value >= inputs.beta) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return {floor_n_index(lo, inputs.n), lo};
}

}  // namespace tontine
