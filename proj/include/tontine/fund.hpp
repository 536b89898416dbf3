#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <ostream>
#include <vector>

#include "tontine/error.hpp"
#include "tontine/lifetable.hpp"
#include "tontine/random.hpp"

namespace tontine {

struct FundParams {
    int n_members = 1000;
    int entry_age = 70;
    double initial_wealth = 100000.0;
    double rate_per_period = 0.0;
    int periods_per_year = 12;

    void validate() const {
        require(n_members >= 2, "fund needs at least 2 members");
        require(initial_wealth > 0.0, "initial wealth must be positive");
        require(rate_per_period > -1.0, "rate must exceed -1");
        require(periods_per_year >= 1, "periods_per_year must be positive");
    }

    long long entry_age_periods() const { return static_cast<long long>(entry_age) * periods_per_year; }
};

/// Income band [(1 - eps_lower) C(0), (1 + eps_upper) C(0)] required with
/// certainty beta. Without eps_upper only the lower threshold applies.
struct StabilityCriterion {
    double eps_lower = 0.1;
    std::optional<double> eps_upper;
    double beta = 0.9;

    void validate() const {
        require(eps_lower > 0.0 && eps_lower < 1.0, "eps_lower must lie in (0, 1)");
        require(!eps_upper || *eps_upper > 0.0, "eps_upper must be positive");
        require(beta > 0.0 && beta < 1.0, "beta must lie in (0, 1)");
    }

    static StabilityCriterion lower_only(double eps, double beta) { return {eps, std::nullopt, beta}; }
    static StabilityCriterion symmetric(double eps, double beta) { return {eps, eps, beta}; }
};

/// One simulated scenario. Times are measured in periods.
struct IncomePath {
    std::vector<double> death_times;  // sorted
    std::vector<int> survivors;       // L at t = 0, 1, ... up to and including extinction
    std::vector<double> income;       // C(t) while survivors(t) > 0
};

/// The same scenario computed through member account values.
struct ExplicitIncomePath {
    IncomePath path;
    std::vector<double> wealth;   // W(t) per surviving member, same length as income
    std::vector<double> credits;  // M(t) for t = 1 .. income.size() - 1
    double estate_payment = 0.0;  // total paid to estates when the fund ceases
};

/// One-period survival probabilities p_{x+t}, t = 0 .. until survival ends.
inline std::vector<double> period_survival(const LifeTable& table, int entry_age, int periods_per_year) {
    const long long start = static_cast<long long>(entry_age) * periods_per_year;
    std::vector<double> p;
    double prev = table.survival_from_start_periods(start, periods_per_year);
    require(prev > 0.0, "entry age beyond the end of the table");
    for (long long t = start + 1; prev > 0.0; ++t) {
        const double next = table.survival_from_start_periods(t, periods_per_year);
        p.push_back(next / prev);
        prev = next;
    }
    return p;
}

/// Draws N i.i.d. death times from the table by inverse-CDF sampling and
/// returns them sorted, in periods.
inline std::vector<double> sample_death_times(const FundParams& params, const LifeTable& table, Rng& rng) {
    std::vector<double> deaths(static_cast<std::size_t>(params.n_members));
    for (auto& d : deaths) {
        d = inverse_cdf(table, params.entry_age, rng.uniform_open()) * params.periods_per_year;
    }
    std::stable_sort(deaths.begin(), deaths.end());
    return deaths;
}

namespace detail {

/// Survivor counts per integer period from sorted death times in periods.
inline std::vector<int> survivor_counts(const std::vector<double>& deaths) {
    std::vector<int> survivors;
    auto alive = static_cast<int>(deaths.size());
    survivors.push_back(alive);
    std::size_t next = 0;
    for (long long t = 1; alive > 0; ++t) {
        while (next < deaths.size() && deaths[next] <= static_cast<double>(t)) {
            ++next;
            --alive;
        }
        survivors.push_back(alive);
    }
    return survivors;
}

}  // namespace detail

/// Income path from given sorted death times via C(t+1) = C(t) p / p_hat.
inline IncomePath income_path_from_deaths(const FundParams& params, const LifeTable& table,
                                          std::vector<double> deaths) {
    params.validate();
    require(deaths.size() == static_cast<std::size_t>(params.n_members), "need one death time per member");
    require(std::is_sorted(deaths.begin(), deaths.end()), "death times must be sorted");
    IncomePath path;
    path.survivors = detail::survivor_counts(deaths);
    path.death_times = std::move(deaths);

    const auto p = period_survival(table, params.entry_age, params.periods_per_year);
    const double c0 = params.initial_wealth /
                      annuity_factor(table, params.entry_age_periods(), params.rate_per_period, params.periods_per_year);
    path.income.push_back(c0);
    for (std::size_t t = 0; t + 1 < path.survivors.size() && path.survivors[t + 1] > 0; ++t) {
        const double observed = static_cast<double>(path.survivors[t + 1]) / path.survivors[t];
        const double expected = t < p.size() ? p[t] : 0.0;
        path.income.push_back(path.income.back() * expected / observed);
    }
    return path;
}

/// Income path from given sorted death times via explicit account values,
/// longevity credits and the annuity-factor income rule.
inline ExplicitIncomePath explicit_path_from_deaths(const FundParams& params, const LifeTable& table,
                                                    std::vector<double> deaths) {
    params.validate();
    require(deaths.size() == static_cast<std::size_t>(params.n_members), "need one death time per member");
    require(std::is_sorted(deaths.begin(), deaths.end()), "death times must be sorted");
    ExplicitIncomePath out;
    auto& path = out.path;
    path.survivors = detail::survivor_counts(deaths);
    path.death_times = std::move(deaths);

    const double growth = 1.0 + params.rate_per_period;
    double wealth = params.initial_wealth;
    for (std::size_t t = 0; path.survivors[t] > 0; ++t) {
        const double factor = annuity_factor(table, params.entry_age_periods() + static_cast<long long>(t),
                                             params.rate_per_period, params.periods_per_year);
        const double income = wealth / factor;
        path.income.push_back(income);
        out.wealth.push_back(wealth);
        const double carried = (wealth - income) * growth;
        const int alive = path.survivors[t];
        const int next = path.survivors[t + 1];
        if (next == 0) {
            out.estate_payment = carried * alive;
            break;
        }
        const double credit = carried * (alive - next) / next;
        out.credits.push_back(credit);
        wealth = carried + credit;
    }
    return out;
}

inline IncomePath simulate_income_path(const FundParams& params, const LifeTable& table, Rng& rng) {
    params.validate();
    return income_path_from_deaths(params, table, sample_death_times(params, table, rng));
}

/// Consumes the same random draws as simulate_income_path.
inline ExplicitIncomePath simulate_income_path_explicit(const FundParams& params, const LifeTable& table, Rng& rng) {
    params.validate();
    return explicit_path_from_deaths(params, table, sample_death_times(params, table, rng));
}

/// Largest k such that the income stays inside the band at every integer
/// period s with 1 <= s <= floor(T_(k)). Bounds are inclusive.
inline int stable_prefix_deaths(const IncomePath& path, const StabilityCriterion& criterion) {
    const auto n = static_cast<int>(path.death_times.size());
    if (path.income.empty()) return n;
    const double c0 = path.income.front();
    const double lower = (1.0 - criterion.eps_lower) * c0;
    for (std::size_t s = 1; s < path.income.size(); ++s) {
        const double c = path.income[s];
        const bool breached = c < lower || (criterion.eps_upper && c > (1.0 + *criterion.eps_upper) * c0);
        if (breached) {
            // k members died strictly before period s
            const auto it = std::lower_bound(path.death_times.begin(), path.death_times.end(), static_cast<double>(s));
            return static_cast<int>(it - path.death_times.begin());
        }
    }
    return n;
}

/// CSV `period,survivors,income`; income is blank once the fund has ceased.
inline void write_trace(std::ostream& out, const IncomePath& path) {
    out << "period,survivors,income\n";
    char buf[64];
    for (std::size_t t = 0; t < path.survivors.size(); ++t) {
        out << t << ',' << path.survivors[t] << ',';
        if (t < path.income.size()) {
            const auto res = std::to_chars(buf, buf + sizeof buf, path.income[t]);
            out << std::string_view(buf, res.ptr - buf);
        }
        out << '\n';
    }
}

}  // namespace tontine
