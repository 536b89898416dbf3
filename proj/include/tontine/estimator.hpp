#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "tontine/error.hpp"
#include "tontine/fund.hpp"
#include "tontine/lifetable.hpp"
#include "tontine/normal.hpp"
#include "tontine/orderstats.hpp"
#include "tontine/parallel.hpp"
#include "tontine/random.hpp"

namespace tontine {

/// Histogram of per-path stable-prefix counts K over k = 0 .. N.
struct KDistribution {
    std::vector<std::uint64_t> counts;
    std::uint64_t n_paths = 0;
    std::uint64_t seed = 0;

    int n() const noexcept { return static_cast<int>(counts.size()) - 1; }

    std::uint64_t count_at_least(int k) const {
        std::uint64_t total = 0;
        for (auto j = static_cast<std::size_t>(std::max(k, 0)); j < counts.size(); ++j) total += counts[j];
        return total;
    }

    /// Empirical P[K >= k].
    double tail_probability(int k) const {
        return static_cast<double>(count_at_least(k)) / static_cast<double>(n_paths);
    }

    /// Largest k whose empirical P[K >= k] is at least beta.
    int quantile(double beta) const {
        require(n_paths >= 1, "empty distribution");
        std::uint64_t tail = 0;
        const double needed = beta * static_cast<double>(n_paths);
        for (int k = n(); k >= 0; --k) {
            tail += counts[static_cast<std::size_t>(k)];
            if (static_cast<double>(tail) >= needed) return k;
        }
        return 0;
    }

    bool operator==(const KDistribution&) const = default;
};

enum class EstimateMode { bound, direct };

inline std::string_view to_string(EstimateMode mode) { return mode == EstimateMode::bound ? "bound" : "direct"; }

struct StabilityReport {
    int k_value = 0;
    double beta = 0.0;
    EstimateMode mode = EstimateMode::bound;
    StabilityCriterion criterion;
    int n = 0;
    std::uint64_t n_paths = 0;
    std::uint64_t seed = 0;
    double tail_probability = 0.0;  // empirical P[K >= k_value]
    double ci99_half_width = 0.0;   // binomial 99% half-width of tail_probability
};

struct StabilityEstimate {
    StabilityReport report;
    KDistribution distribution;
};

inline StabilityReport make_report(const KDistribution& dist, const StabilityCriterion& criterion, EstimateMode mode) {
    StabilityReport r;
    r.k_value = dist.quantile(criterion.beta);
    r.beta = criterion.beta;
    r.mode = mode;
    r.criterion = criterion;
    r.n = dist.n();
    r.n_paths = dist.n_paths;
    r.seed = dist.seed;
    r.tail_probability = dist.tail_probability(r.k_value);
    const double p = r.tail_probability;
    r.ci99_half_width = normal_quantile(0.995) * std::sqrt(p * (1.0 - p) / static_cast<double>(dist.n_paths));
    return r;
}

namespace detail {

/// Runs `paths` evaluations in parallel. evaluate(rng, out) must write one
/// K value per histogram; per-worker histograms are summed afterwards.
template <typename MakeWorker>
std::vector<KDistribution> run_paths(int n, std::size_t n_hist, std::uint64_t paths, std::uint64_t seed,
                                     unsigned threads, MakeWorker&& make_worker) {
    require(paths >= 1, "need at least one path");
    const unsigned workers = worker_count(paths, threads);
    std::vector<std::vector<std::vector<std::uint64_t>>> local(
        workers, std::vector<std::vector<std::uint64_t>>(n_hist, std::vector<std::uint64_t>(static_cast<std::size_t>(n) + 1)));
    parallel_blocks(paths, workers, [&](unsigned w, std::uint64_t begin, std::uint64_t end) {
        auto evaluate = make_worker();
        std::vector<int> ks(n_hist);
        for (std::uint64_t path = begin; path < end; ++path) {
            Rng rng = Rng::for_stream(seed, path);
            evaluate(rng, ks);
            for (std::size_t h = 0; h < n_hist; ++h) ++local[w][h][static_cast<std::size_t>(ks[h])];
        }
    });
    std::vector<KDistribution> out(n_hist);
    for (std::size_t h = 0; h < n_hist; ++h) {
        out[h].counts.assign(static_cast<std::size_t>(n) + 1, 0);
        out[h].n_paths = paths;
        out[h].seed = seed;
        for (const auto& worker : local) {
            for (std::size_t k = 0; k < out[h].counts.size(); ++k) out[h].counts[k] += worker[h][k];
        }
    }
    return out;
}

}  // namespace detail

/// Distributions of K for several criteria evaluated on the same sampled
/// order statistics (path i always uses stream i of `seed`).
inline std::vector<KDistribution> sample_k_u(int n, std::span<const StabilityCriterion> criteria, std::uint64_t paths,
                                             std::uint64_t seed, unsigned threads = 0) {
    require(n >= 1, "N must be positive");
    require(!criteria.empty(), "need at least one criterion");
    std::vector<StabilityBand> bands;
    for (const auto& c : criteria) {
        c.validate();
        bands.emplace_back(n, c.eps_lower, c.eps_upper);
    }
    return detail::run_paths(n, bands.size(), paths, seed, threads, [&] {
        return [&bands, n, sample = OrderedUniformSample{}](Rng& rng, std::vector<int>& ks) mutable {
            sample_uniform_order_stats(n, rng, sample);
            for (std::size_t h = 0; h < bands.size(); ++h) ks[h] = bands[h].prefix(sample.values);
        };
    });
}

/// k_U: the distribution-free lower bound from sampled uniform order statistics.
inline StabilityEstimate estimate_k_u(int n, const StabilityCriterion& criterion, std::uint64_t paths,
                                      std::uint64_t seed, unsigned threads = 0) {
    auto dist = sample_k_u(n, std::span(&criterion, 1), paths, seed, threads).front();
    return {make_report(dist, criterion, EstimateMode::bound), std::move(dist)};
}

/// Distributions of K from simulated income paths, several criteria per path.
inline std::vector<KDistribution> sample_k_c(const FundParams& params, const LifeTable& table,
                                             std::span<const StabilityCriterion> criteria, std::uint64_t paths,
                                             std::uint64_t seed, unsigned threads = 0) {
    params.validate();
    require(!criteria.empty(), "need at least one criterion");
    for (const auto& c : criteria) c.validate();
    return detail::run_paths(params.n_members, criteria.size(), paths, seed, threads, [&] {
        return [&](Rng& rng, std::vector<int>& ks) {
            const IncomePath path = simulate_income_path(params, table, rng);
            for (std::size_t h = 0; h < criteria.size(); ++h) ks[h] = stable_prefix_deaths(path, criteria[h]);
        };
    });
}

/// k_C: the count from direct simulation of the income process.
inline StabilityEstimate estimate_k_c(const FundParams& params, const LifeTable& table,
                                      const StabilityCriterion& criterion, std::uint64_t paths, std::uint64_t seed,
                                      unsigned threads = 0) {
    auto dist = sample_k_c(params, table, std::span(&criterion, 1), paths, seed, threads).front();
    return {make_report(dist, criterion, EstimateMode::direct), std::move(dist)};
}

/// (k_C - k_U) / k_U
inline double relative_difference(int k_c, int k_u) {
    require(k_u >= 1, "relative difference needs k_U >= 1");
    return static_cast<double>(k_c - k_u) / k_u;
}

/// Years t after age x with F(t) = k / n.
inline double likely_time(const LifeTable& table, double x, int n, int k) {
    require(n >= 1 && k >= 0 && k < n, "likely time needs 0 <= k < n");
    return inverse_cdf(table, x, static_cast<double>(k) / n);
}

/// P[T_(k) <= t - d] with t the likely time of the k-th death, computed as
/// I_{F(t - d)}(k, n - k + 1).
inline double death_time_spread(const LifeTable& table, double x, int n, int k, double d) {
    require(k >= 1 && k <= n, "death time spread needs 1 <= k <= n");
    require(d >= 0.0, "d must be non-negative");
    const double t = likely_time(table, x, n, k);
    const double s = t - d;
    if (s <= 0.0) return 0.0;
    const double f = 1.0 - survival_probability(table, x, s);
    return regularized_beta(std::clamp(f, 0.0, 1.0), k, n - k + 1);
}

/// Extra likely time, in months, from using k_C instead of k_U.
inline double time_difference_months(const LifeTable& table, double x, int n, int k_c, int k_u) {
    return 12.0 * (likely_time(table, x, n, k_c) - likely_time(table, x, n, k_u));
}

inline void write_distribution(std::ostream& out, const KDistribution& dist) {
    out << "k,count\n";
    for (std::size_t k = 0; k < dist.counts.size(); ++k) out << k << ',' << dist.counts[k] << '\n';
}

}  // namespace tontine
