#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "test_tables.hpp"
#include "tontine/estimator.hpp"
#include "tontine/fund.hpp"

using namespace tontine;

namespace {

FundParams toy_params(int n, int periods_per_year = 12, double rate = 0.003) {
    FundParams p;
    p.n_members = n;
    p.entry_age = 70;
    p.initial_wealth = 100000.0;
    p.rate_per_period = rate;
    p.periods_per_year = periods_per_year;
    return p;
}

double relative_gap(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(a), std::fabs(b)); }

}  // namespace

TEST(FundParams, Validation) {
    auto p = toy_params(1);
    EXPECT_THROW(p.validate(), ValidationError);
    p = toy_params(10);
    p.initial_wealth = 0.0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = toy_params(10);
    p.rate_per_period = -1.0;
    EXPECT_THROW(p.validate(), ValidationError);
}

TEST(IncomePath, StartsAtWealthOverAnnuityFactor) {
    const auto table = tables::toy_five_ages();
    const auto params = toy_params(10);
    Rng rng(5);
    const auto path = simulate_income_path(params, table, rng);
    EXPECT_DOUBLE_EQ(path.income.front(), params.initial_wealth / annuity_factor(table, 70 * 12, 0.003, 12));
}

TEST(IncomePath, SurvivorCountsMatchDeathTimes) {
    const auto table = tables::gompertz();
    const auto params = toy_params(200);
    Rng rng(17);
    const auto path = simulate_income_path(params, table, rng);
    ASSERT_TRUE(std::is_sorted(path.death_times.begin(), path.death_times.end()));
    EXPECT_EQ(path.survivors.back(), 0);
    EXPECT_EQ(path.income.size() + 1, path.survivors.size());
    for (std::size_t t = 0; t < path.survivors.size(); ++t) {
        const auto dead = std::upper_bound(path.death_times.begin(), path.death_times.end(), static_cast<double>(t)) -
                          path.death_times.begin();
        ASSERT_EQ(path.survivors[t], params.n_members - dead);
        if (t > 0) ASSERT_LE(path.survivors[t], path.survivors[t - 1]);
    }
}

TEST(IncomePath, PeriodWithoutDeathsMultipliesByTrueSurvival) {
    const auto table = tables::toy_three_ages();
    const auto params = toy_params(4);
    const auto path = income_path_from_deaths(params, table, {5.5, 7.5, 20.5, 30.5});
    const auto p = period_survival(table, 70, 12);
    for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(path.income[t + 1], path.income[t] * p[t]);
}

TEST(IncomePath, ConstantWhenObservedSurvivalMatchesTrue) {
    // q chosen so that exactly one of ten members is expected to die each year
    const int n = 10;
    std::vector<double> q;
    for (int j = 0; j < n; ++j) q.push_back(1.0 / (n - j));
    const LifeTable table(70, q);
    std::vector<double> deaths;
    for (int j = 0; j < n; ++j) deaths.push_back(j + 0.5);
    const auto path = income_path_from_deaths(toy_params(n, 1), table, deaths);
    ASSERT_EQ(path.income.size(), static_cast<std::size_t>(n));
    for (double c : path.income) EXPECT_NEAR(c / path.income.front(), 1.0, 1e-12);
}

TEST(ExplicitIncomePath, AgreesWithRecursionOnToyTable) {
    const auto table = tables::toy_three_ages();
    const auto params = toy_params(10);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng a = Rng::for_stream(99, seed);
        Rng b = Rng::for_stream(99, seed);
        const auto recursion = simulate_income_path(params, table, a);
        const auto explicit_path = simulate_income_path_explicit(params, table, b);
        ASSERT_EQ(recursion.death_times, explicit_path.path.death_times);
        ASSERT_EQ(recursion.income.size(), explicit_path.path.income.size());
        for (std::size_t t = 0; t < recursion.income.size(); ++t) {
            ASSERT_LT(relative_gap(recursion.income[t], explicit_path.path.income[t]), 1e-9) << seed << ' ' << t;
        }
    }
}

TEST(ExplicitIncomePath, FundCeasesWhenEveryoneDiesInFirstPeriod) {
    const auto table = tables::toy_three_ages();
    const auto params = toy_params(3);
    const auto out = explicit_path_from_deaths(params, table, {0.2, 0.5, 0.9});
    ASSERT_EQ(out.path.income.size(), 1U);
    EXPECT_EQ(out.path.survivors, (std::vector<int>{3, 0}));
    EXPECT_TRUE(out.credits.empty());
    const double c0 = out.path.income[0];
    EXPECT_NEAR(out.estate_payment, 3 * (params.initial_wealth - c0) * (1 + params.rate_per_period), 1e-6);
}

TEST(ExplicitIncomePath, LastSurvivorHoldsWholeFund) {
    const auto table = tables::toy_five_ages();
    const auto params = toy_params(5);
    const auto out = explicit_path_from_deaths(params, table, {3.5, 3.6, 3.7, 3.8, 40.5});
    // at t = 3 five members hold equal accounts; at t = 4 one remains
    const double pooled = 5 * (out.wealth[3] - out.path.income[3]) * (1 + params.rate_per_period);
    EXPECT_EQ(out.path.survivors[4], 1);
    EXPECT_NEAR(out.wealth[4], pooled, 1e-9 * pooled);
}

TEST(ExplicitIncomePath, ConservesFundValue) {
    const auto table = tables::toy_five_ages();
    const auto params = toy_params(50);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng = Rng::for_stream(7, seed);
        const auto out = simulate_income_path_explicit(params, table, rng);
        const auto& L = out.path.survivors;
        for (std::size_t t = 0; t + 1 < out.wealth.size(); ++t) {
            const double before = (L[t] * out.wealth[t] - L[t] * out.path.income[t]) * (1 + params.rate_per_period);
            const double after = L[t + 1] * out.wealth[t + 1];
            ASSERT_LT(relative_gap(before, after), 1e-9);
        }
        for (double m : out.credits) ASSERT_GE(m, 0.0);
    }
}

TEST(IncomePath, IncomeRatioDoesNotDependOnRate) {
    const auto table = tables::gompertz();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng a = Rng::for_stream(3, seed);
        Rng b = Rng::for_stream(3, seed);
        Rng c = Rng::for_stream(3, seed);
        const auto low = simulate_income_path(toy_params(100, 12, 0.0), table, a);
        const auto high = simulate_income_path(toy_params(100, 12, 0.004), table, b);
        const auto high_explicit = simulate_income_path_explicit(toy_params(100, 12, 0.004), table, c);
        ASSERT_EQ(low.income.size(), high.income.size());
        for (std::size_t t = 0; t < low.income.size(); ++t) {
            const double r_low = low.income[t] / low.income[0];
            ASSERT_NEAR(r_low, high.income[t] / high.income[0], 1e-9 * r_low);
            ASSERT_NEAR(r_low, high_explicit.path.income[t] / high_explicit.path.income[0], 1e-9 * r_low);
        }
        const auto crit = StabilityCriterion::symmetric(0.1, 0.9);
        EXPECT_EQ(stable_prefix_deaths(low, crit), stable_prefix_deaths(high, crit));
    }
}

TEST(StablePrefixDeaths, ConstantIncomeKeepsEveryone) {
    IncomePath path{{0.5, 1.5, 2.5, 3.5}, {4, 3, 2, 1, 0}, {100, 100, 100, 100}};
    EXPECT_EQ(stable_prefix_deaths(path, StabilityCriterion::symmetric(0.01, 0.9)), 4);
}

TEST(StablePrefixDeaths, ImmediateBreachBeforeAnyDeath) {
    IncomePath path{{1.5, 2.5, 3.5}, {3, 3, 2, 1, 0}, {100, 80, 80, 80}};
    EXPECT_EQ(stable_prefix_deaths(path, StabilityCriterion::lower_only(0.1, 0.9)), 0);
}

TEST(StablePrefixDeaths, CountsDeathsBeforeBreachPeriod) {
    IncomePath path{{0.5, 1.2, 1.9, 2.5, 3.5}, {5, 4, 2, 1, 0}, {100, 104, 111, 95}};
    EXPECT_EQ(stable_prefix_deaths(path, StabilityCriterion::lower_only(0.1, 0.9)), 5);
    EXPECT_EQ(stable_prefix_deaths(path, StabilityCriterion::symmetric(0.1, 0.9)), 3);
    EXPECT_EQ(stable_prefix_deaths(path, StabilityCriterion::symmetric(0.05, 0.9)), 3);
    EXPECT_EQ(stable_prefix_deaths(path, StabilityCriterion::symmetric(0.03, 0.9)), 1);
    // boundary values count as stable
    EXPECT_EQ(stable_prefix_deaths(path, StabilityCriterion{0.05, 0.11, 0.9}), 5);
}

TEST(StablePrefixDeaths, UpperThresholdNeverHelps) {
    const auto table = tables::gompertz();
    const auto params = toy_params(300);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng = Rng::for_stream(11, seed);
        const auto path = simulate_income_path(params, table, rng);
        EXPECT_LE(stable_prefix_deaths(path, StabilityCriterion::symmetric(0.05, 0.9)),
                  stable_prefix_deaths(path, StabilityCriterion::lower_only(0.05, 0.9)));
    }
}

TEST(StablePrefixDeaths, QuantileNearPublishedSymmetricValue) {
    // N = 1000 aged 70, monthly, eps1 = eps2 = 0.1, beta = 0.9. The lower bound
    // k_U for this criterion is 725; k_C sits slightly above it.
    FundParams params = toy_params(1000, 12, 0.0);
    const auto est =
        estimate_k_c(params, tables::gompertz(), StabilityCriterion::symmetric(0.1, 0.9), 20000, 2024, 1);
    EXPECT_GE(est.report.k_value, 715);
    EXPECT_LE(est.report.k_value, 750);
}

TEST(Trace, WritesOneRowPerPeriod) {
    IncomePath path{{0.5, 1.5}, {2, 1, 0}, {10, 12.5}};
    std::ostringstream out;
    write_trace(out, path);
    EXPECT_EQ(out.str(), "period,survivors,income\n0,2,10\n1,1,12.5\n2,0,\n");
}
