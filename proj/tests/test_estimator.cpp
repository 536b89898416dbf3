#include <gtest/gtest.h>

#include <array>
#include <sstream>

#include "test_tables.hpp"
#include "tontine/estimator.hpp"

using namespace tontine;

namespace {

// Direct reading of the definition: max k with #{K >= k} / m >= beta.
int brute_force_quantile(const KDistribution& dist, double beta) {
    int best = 0;
    for (int k = 0; k <= dist.n(); ++k) {
        std::uint64_t at_least = 0;
        for (int j = k; j <= dist.n(); ++j) at_least += dist.counts[static_cast<std::size_t>(j)];
        if (static_cast<double>(at_least) / static_cast<double>(dist.n_paths) >= beta) best = k;
    }
    return best;
}

FundParams fund(int n) {
    FundParams p;
    p.n_members = n;
    p.entry_age = 70;
    p.initial_wealth = 100000.0;
    p.rate_per_period = 0.002;
    p.periods_per_year = 12;
    return p;
}

}  // namespace

TEST(KDistribution, QuantileFollowsTailDefinition) {
    Rng rng(8);
    for (int rep = 0; rep < 500; ++rep) {
        KDistribution dist;
        const int n = 1 + static_cast<int>(rng() % 30);
        dist.counts.assign(static_cast<std::size_t>(n) + 1, 0);
        for (auto& c : dist.counts) c = rng() % 4 == 0 ? 0 : rng() % 50;
        for (auto c : dist.counts) dist.n_paths += c;
        if (dist.n_paths == 0) continue;
        for (const double beta : {0.01, 0.5, 0.9, 0.99}) {
            ASSERT_EQ(dist.quantile(beta), brute_force_quantile(dist, beta));
        }
        for (int k = 1; k <= n; ++k) ASSERT_LE(dist.tail_probability(k), dist.tail_probability(k - 1));
    }
}

TEST(KDistribution, ExactTailHitCounts) {
    KDistribution dist{{1, 0, 9}, 10, 0};
    EXPECT_EQ(dist.quantile(0.9), 2);
    EXPECT_EQ(dist.quantile(0.91), 0);
}

TEST(EstimateKU, CountsSumToPaths) {
    const auto est = estimate_k_u(50, StabilityCriterion::lower_only(0.1, 0.9), 5000, 1, 1);
    std::uint64_t total = 0;
    for (auto c : est.distribution.counts) total += c;
    EXPECT_EQ(total, 5000U);
    EXPECT_EQ(est.report.mode, EstimateMode::bound);
    EXPECT_EQ(est.report.k_value, est.distribution.quantile(0.9));
    EXPECT_GE(est.report.tail_probability, 0.9);
    EXPECT_GT(est.report.ci99_half_width, 0.0);
}

TEST(EstimateKU, IndependentOfThreadCount) {
    const std::array criteria{StabilityCriterion::lower_only(0.05, 0.9), StabilityCriterion::symmetric(0.05, 0.9)};
    const auto one = sample_k_u(300, criteria, 20000, 77, 1);
    const auto three = sample_k_u(300, criteria, 20000, 77, 3);
    const auto seven = sample_k_u(300, criteria, 20000, 77, 7);
    EXPECT_EQ(one, three);
    EXPECT_EQ(one, seven);
}

TEST(EstimateKU, JointRunMatchesSingleCriterionRun) {
    const std::array criteria{StabilityCriterion::lower_only(0.1, 0.9), StabilityCriterion::symmetric(0.05, 0.99)};
    const auto joint = sample_k_u(200, criteria, 5000, 3, 2);
    EXPECT_EQ(joint[0], estimate_k_u(200, criteria[0], 5000, 3, 1).distribution);
    EXPECT_EQ(joint[1], estimate_k_u(200, criteria[1], 5000, 3, 1).distribution);
}

TEST(EstimateKU, SmallFundExampleFromTable) {
    // N = 100, eps = 0.05 symmetric, beta = 0.99 gives 1
    const auto est = estimate_k_u(100, StabilityCriterion::symmetric(0.05, 0.99), 200000, 11, 1);
    EXPECT_NEAR(est.report.k_value, 1, 1);
}

TEST(EstimateKU, MonotoneInThresholdAndCertainty) {
    const std::array criteria{StabilityCriterion::lower_only(0.05, 0.9), StabilityCriterion::symmetric(0.05, 0.9),
                              StabilityCriterion::lower_only(0.1, 0.9), StabilityCriterion::symmetric(0.1, 0.9)};
    const auto dists = sample_k_u(200, criteria, 1000000, 21, 0);
    for (const double beta : {0.9, 0.99}) {
        const int above5 = dists[0].quantile(beta);
        const int both5 = dists[1].quantile(beta);
        const int above10 = dists[2].quantile(beta);
        const int both10 = dists[3].quantile(beta);
        EXPECT_GE(above5, both5);
        EXPECT_GE(above10, both10);
        EXPECT_GE(above10 + 3, above5);
        EXPECT_GE(both10 + 3, both5);
    }
    for (const auto& d : dists) EXPECT_GE(d.quantile(0.9) + 3, d.quantile(0.99));
    // published grid, N = 200: 85 70 41 40 28 23 9 9
    EXPECT_NEAR(dists[2].quantile(0.9), 85, 3);
    EXPECT_NEAR(dists[3].quantile(0.9), 70, 3);
    EXPECT_NEAR(dists[0].quantile(0.99), 9, 3);
    EXPECT_NEAR(dists[1].quantile(0.99), 9, 3);
}

TEST(EstimateKC, IndependentOfThreadCount) {
    const auto table = tables::gompertz();
    const auto crit = StabilityCriterion::lower_only(0.05, 0.9);
    const auto a = estimate_k_c(fund(100), table, crit, 600, 5, 1);
    const auto b = estimate_k_c(fund(100), table, crit, 600, 5, 4);
    EXPECT_EQ(a.distribution, b.distribution);
    EXPECT_EQ(a.report.mode, EstimateMode::direct);
}

TEST(EstimateKC, HugeLowerThresholdKeepsEveryone) {
    const auto est =
        estimate_k_c(fund(10), tables::toy_five_ages(), StabilityCriterion::lower_only(0.999999, 0.9), 500, 9, 1);
    EXPECT_EQ(est.report.k_value, 10);
}

TEST(EstimateKC, AtLeastKUUpToSamplingError) {
    const auto table = tables::gompertz();
    for (const auto& crit : {StabilityCriterion::lower_only(0.05, 0.9), StabilityCriterion::symmetric(0.1, 0.9)}) {
        const int k_c = estimate_k_c(fund(200), table, crit, 20000, 12, 0).report.k_value;
        const int k_u = estimate_k_u(200, crit, 20000, 13, 0).report.k_value;
        EXPECT_GE(k_c, k_u - 3);
    }
}

TEST(RelativeDifference, Arithmetic) {
    EXPECT_NEAR(relative_difference(1338, 1310), 0.0214, 5e-5);
    EXPECT_EQ(relative_difference(500, 500), 0.0);
    EXPECT_DOUBLE_EQ(relative_difference(725, 700), 25.0 / 700.0);
    EXPECT_THROW(relative_difference(10, 0), ValidationError);
}

TEST(LikelyTime, NoDeathsIsTimeZero) { EXPECT_EQ(likely_time(tables::gompertz(), 70, 2000, 0), 0.0); }

TEST(LikelyTime, InvertsDistributionFunction) {
    const auto table = tables::gompertz();
    for (int k = 1; k < 2000; k += 37) {
        const double t = likely_time(table, 70, 2000, k);
        EXPECT_NEAR(1.0 - survival_probability(table, 70, t), k / 2000.0, 1e-9);
    }
    EXPECT_THROW(likely_time(table, 70, 2000, 2000), ValidationError);
}

TEST(DeathTimeSpread, ZeroWhenShiftExceedsLikelyTime) {
    const auto table = tables::gompertz();
    const double t = likely_time(table, 70, 1000, 725);
    EXPECT_EQ(death_time_spread(table, 70, 1000, 725, t), 0.0);
    EXPECT_EQ(death_time_spread(table, 70, 1000, 725, t + 3), 0.0);
}

TEST(DeathTimeSpread, NoShiftIsBetaProbabilityAtKOverN) {
    const auto table = tables::gompertz();
    const int n = 400;
    const int k = 200;
    const double exact = death_time_spread(table, 70, n, k, 0.0);
    EXPECT_NEAR(exact, regularized_beta(0.5, k, n - k + 1), 1e-9);
    EXPECT_NEAR(exact, 0.5, 0.03);

    const int draws = 20000;
    Rng rng(31);
    OrderedUniformSample s;
    int hits = 0;
    for (int m = 0; m < draws; ++m) {
        sample_uniform_order_stats(n, rng, s);
        hits += s.values[k - 1] <= static_cast<double>(k) / n;
    }
    const double p_hat = static_cast<double>(hits) / draws;
    EXPECT_NEAR(p_hat, exact, 3.0 * std::sqrt(exact * (1 - exact) / draws));
}

TEST(DeathTimeSpread, NonIncreasingInShift) {
    const auto table = tables::gompertz();
    double prev = 1.0;
    for (double d = 0.0; d < 5.0; d += 0.05) {
        const double p = death_time_spread(table, 70, 1000, 610, d);
        ASSERT_LE(p, prev + 1e-15);
        prev = p;
    }
}

TEST(TimeDifference, ZeroForEqualCounts) {
    EXPECT_EQ(time_difference_months(tables::gompertz(), 70, 2000, 1310, 1310), 0.0);
}

TEST(TimeDifference, NonNegativeWhenKCAtLeastKU) {
    const auto table = tables::gompertz();
    for (int k_u = 1; k_u < 1990; k_u += 97) {
        EXPECT_GE(time_difference_months(table, 70, 2000, k_u + 5, k_u), 0.0);
    }
}

TEST(Distribution, WritesCsv) {
    std::ostringstream out;
    write_distribution(out, KDistribution{{2, 0, 3}, 5, 1});
    EXPECT_EQ(out.str(), "k,count\n0,2\n1,0\n2,3\n");
}
