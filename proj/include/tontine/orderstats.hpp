#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tontine/error.hpp"
#include "tontine/random.hpp"

namespace tontine {

/// U_(1) < ... < U_(N), all inside (0, 1).
struct OrderedUniformSample {
    std::vector<double> values;
};

/// Fills `out` with uniform order statistics S_i / S_{N+1}, where S_i are
/// cumulative sums of N + 1 unit exponentials. No sort is needed. A draw with
/// a zero spacing (tie) is discarded and redrawn.
inline void sample_uniform_order_stats(int n, Rng& rng, OrderedUniformSample& out) {
    require(n >= 1, "sample size must be positive");
    auto& v = out.values;
    v.resize(static_cast<std::size_t>(n));
    for (;;) {
        double sum = 0.0;
        bool tie = false;
        for (auto& x : v) {
            const double e = rng.exponential();
            tie |= e == 0.0;
            sum += e;
            x = sum;
        }
        const double last = rng.exponential();
        tie |= last == 0.0;
        const double total = sum + last;
        if (tie) continue;
        const double scale = 1.0 / total;
        for (auto& x : v) x *= scale;
        // rounding may still collapse adjacent values when spacings are tiny
        if (v.back() < 1.0 && std::adjacent_find(v.begin(), v.end(), std::greater_equal<>{}) == v.end()) return;
    }
}

inline OrderedUniformSample sample_uniform_order_stats(int n, Rng& rng) {
    OrderedUniformSample out;
    sample_uniform_order_stats(n, rng, out);
    return out;
}

/// Per-index acceptance band for uniform order statistics:
///   (1 - eps1)(i - 1)/N + eps1  >=  U_(i)  >=  (1 + eps2) min(i, N - 1)/N - eps2.
/// The right-hand constraint is dropped when eps2 is absent.
class StabilityBand {
public:
    StabilityBand(int n, double eps_lower, std::optional<double> eps_upper) {
        require(n >= 1, "sample size must be positive");
        require(eps_lower > 0.0 && eps_lower < 1.0, "eps_lower must lie in (0, 1)");
        require(!eps_upper || *eps_upper > 0.0, "eps_upper must be positive");
        upper_.resize(static_cast<std::size_t>(n));
        if (eps_upper) lower_.resize(static_cast<std::size_t>(n));
        const double nn = n;
        for (int i = 1; i <= n; ++i) {
            upper_[static_cast<std::size_t>(i - 1)] = (1.0 - eps_lower) * (i - 1) / nn + eps_lower;
            if (eps_upper) {
                lower_[static_cast<std::size_t>(i - 1)] =
                    (1.0 + *eps_upper) * std::min(i, n - 1) / nn - *eps_upper;
            }
        }
    }

    int size() const noexcept { return static_cast<int>(upper_.size()); }
    std::span<const double> upper() const noexcept { return upper_; }
    std::span<const double> lower() const noexcept { return lower_; }

    /// First failing index minus one, or N when every index holds.
    int prefix(std::span<const double> u) const {
        require(u.size() == upper_.size(), "sample size does not match band");
        const std::size_t n = u.size();
        if (lower_.empty()) {
            for (std::size_t i = 0; i < n; ++i) {
                if (u[i] > upper_[i]) return static_cast<int>(i);
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                if (u[i] > upper_[i] || u[i] < lower_[i]) return static_cast<int>(i);
            }
        }
        return static_cast<int>(n);
    }

private:
    std::vector<double> upper_;
    std::vector<double> lower_;
};

inline int stable_prefix_uniform(const OrderedUniformSample& sample, double eps_lower,
                                 std::optional<double> eps_upper = std::nullopt) {
    const StabilityBand band(static_cast<int>(sample.values.size()), eps_lower, eps_upper);
    return band.prefix(sample.values);
}

/// Smallest i >= N + (1 - 1/eps)/2, clamped to [1, N]. For indices below N
/// at or above it the symmetric band is empty.
inline int bound_crossing_index(int n, double eps) {
    require(n >= 1, "sample size must be positive");
    require(eps > 0.0 && eps <= 1.0, "eps must lie in (0, 1]");
    const double threshold = n + (1.0 - 1.0 / eps) / 2.0;
    const double i = std::ceil(threshold);
    return static_cast<int>(std::clamp(i, 1.0, static_cast<double>(n)));
}

/// log B(a, b)
inline double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

namespace detail {

// Modified Lentz evaluation of the incomplete beta continued fraction.
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-14;
    constexpr int max_iter = 20000;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw ConvergenceError("incomplete beta continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double regularized_beta(double x, double a, double b) {
    require(a > 0.0 && b > 0.0, "beta parameters must be positive");
    require(x >= 0.0 && x <= 1.0, "x must lie in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
    if (x <= a / (a + b)) return std::exp(log_front) * detail::beta_continued_fraction(a, b, x) / a;
    return 1.0 - std::exp(log_front) * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Beta(a, b) density.
inline double beta_density(double x, double a, double b) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta(a, b));
}

/// p-quantile of U_(i) ~ Beta(i, n - i + 1), to absolute tolerance 1e-10.
/// Newton steps are taken when they stay inside the current bracket;
/// otherwise the bracket is bisected.
inline double order_stat_quantile(int i, int n, double p) {
    require(n >= 1 && i >= 1 && i <= n, "need 1 <= i <= n");
    require(p > 0.0 && p < 1.0, "p must lie in (0, 1)");
    const double a = i;
    const double b = n - i + 1;
    double lo = 0.0;
    double hi = 1.0;
    double x = a / (a + b);
    constexpr double tol = 1e-10;
    for (int iter = 0; iter < 200; ++iter) {
        const double f = regularized_beta(x, a, b) - p;
        if (f == 0.0) return x;
        if (f < 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        const double density = beta_density(x, a, b);
        double next = density > 0.0 ? x - f / density : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - x) < 1e-3 * tol || hi - lo < tol) return next;
        x = next;
    }
    throw ConvergenceError("order statistic quantile did not converge");
}

}  // namespace tontine
