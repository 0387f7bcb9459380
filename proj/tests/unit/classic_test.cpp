#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "elmeta/classic.hpp"
#include "elmeta/distributions.hpp"
#include "oracles.hpp"

using namespace elmeta;

namespace {

WeightedSummaries random_summaries(std::mt19937_64& gen, int k, double heterogeneity) {
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> sd(0.1, 1.5);
    std::vector<double> y, s;
    for (int i = 0; i < k; ++i) {
        s.push_back(sd(gen));
        y.push_back(heterogeneity * nd(gen) + s.back() * nd(gen));
    }
    return WeightedSummaries(y, s);
}

std::vector<double> copy(std::span<const double> x) { return {x.begin(), x.end()}; }

}  // namespace

// Hand arithmetic: a_i = 1, pooled mean 1, Q = 1 + 0 + 1 = 2, denominator 3 - 3/3 = 2,
// tau2 = max(0, (2 - 2) / 2) = 0.
TEST(DerSimonianLaird, ThreeUnitStudiesHandCheck) {
    EXPECT_NEAR(dl_tau2(WeightedSummaries({0.0, 1.0, 2.0}, {1.0, 1.0, 1.0})), 0.0, 1e-12);
}

// Q = 25 + 25 = 50, denominator 2 - 2/2 = 1, tau2 = 50 - 1 = 49.
TEST(DerSimonianLaird, TwoDistantStudiesHandCheck) {
    EXPECT_NEAR(dl_tau2(WeightedSummaries({0.0, 10.0}, {1.0, 1.0})), 49.0, 1e-12);
}

// Unequal variances: a = (1, 1/4, 4), sum a = 5.25, pooled = (0 + 0.5 + 12)/5.25,
// Q and the denominator evaluated below term by term.
TEST(DerSimonianLaird, UnequalVariancesHandCheck) {
    const double a[] = {1.0, 0.25, 4.0};
    const double y[] = {0.0, 2.0, 3.0};
    const double sa = 5.25;
    const double mu = (0.0 + 0.5 + 12.0) / sa;
    double q = 0.0;
    for (int i = 0; i < 3; ++i) q += a[i] * (y[i] - mu) * (y[i] - mu);
    const double expected = std::max(0.0, (q - 2.0) / (sa - (1.0 + 0.0625 + 16.0) / sa));
    EXPECT_NEAR(dl_tau2(WeightedSummaries({0.0, 2.0, 3.0}, {1.0, 2.0, 0.5})), expected, 1e-12);
    EXPECT_GT(expected, 0.0);
}

TEST(DerSimonianLaird, HomogeneousDataGiveZero) {
    EXPECT_EQ(dl_tau2(WeightedSummaries({1.5, 1.5, 1.5, 1.5}, {0.2, 0.7, 1.0, 3.0})), 0.0);
    EXPECT_EQ(reml_tau2(WeightedSummaries({1.5, 1.5, 1.5, 1.5}, {0.2, 0.7, 1.0, 3.0})), 0.0);
}

TEST(Reml, MatchesGridArgMax) {
    std::mt19937_64 gen(41);
    for (int rep = 0; rep < 20; ++rep) {
        const auto s = random_summaries(gen, 3 + rep % 10, rep % 3 == 0 ? 0.0 : 1.0);
        const double t = reml_tau2(s);
        const double ref = oracle::reml_grid(copy(s.centers()), copy(s.sds()), reml_search_limit(s));
        EXPECT_NEAR(t, ref, 1e-6) << "rep " << rep;
    }
}

TEST(Reml, ObjectiveMatchesDirectFormula) {
    std::mt19937_64 gen(43);
    const auto s = random_summaries(gen, 9, 1.0);
    for (double t : {0.0, 0.1, 1.0, 7.0}) {
        EXPECT_NEAR(reml_log_likelihood(s, t), oracle::reml_objective(copy(s.centers()), copy(s.sds()), t), 1e-12);
    }
}

TEST(Reml, MaximizedObjectiveIsContinuousInTheData) {
    std::mt19937_64 gen(47);
    const auto s = random_summaries(gen, 10, 1.0);
    auto y = copy(s.centers());
    const auto sd = copy(s.sds());
    const WeightedSummaries base(y, sd);
    const double l0 = reml_log_likelihood(base, reml_tau2(base));
    y[0] += 1e-7;
    const WeightedSummaries moved(y, sd);
    EXPECT_NEAR(reml_log_likelihood(moved, reml_tau2(moved)), l0, 1e-5);
}

TEST(Conventional, IdenticalStudiesPoolToTheirValue) {
    const WeightedSummaries s({2.0, 2.0, 2.0, 2.0}, {0.5, 0.5, 0.5, 0.5});
    const auto r = conventional_ci(s, 0.05);
    const double z = dist::normal_quantile(0.975);
    EXPECT_NEAR(r.estimate, 2.0, 1e-15);
    EXPECT_NEAR(r.ci_upper - r.estimate, z * 0.5 / 2.0, 1e-14);
    EXPECT_NEAR(r.estimate - r.ci_lower, z * 0.5 / 2.0, 1e-14);
}

TEST(Conventional, TranslationEquivariant) {
    std::mt19937_64 gen(53);
    const auto s = random_summaries(gen, 8, 0.5);
    auto y = copy(s.centers());
    for (auto& v : y) v += 3.25;
    const auto a = conventional_ci(s, 0.05);
    const auto b = conventional_ci(WeightedSummaries(y, copy(s.sds())), 0.05);
    EXPECT_NEAR(b.estimate, a.estimate + 3.25, 1e-12);
}

TEST(Conventional, WidthIncreasesWithTau2) {
    std::mt19937_64 gen(59);
    const auto s = random_summaries(gen, 8, 0.5);
    double prev = 0.0;
    for (double t : {0.0, 0.01, 0.1, 1.0, 10.0}) {
        const auto r = conventional_ci(s.with_tau2(t), 0.05);
        EXPECT_GT(r.ci_upper - r.ci_lower, prev);
        prev = r.ci_upper - r.ci_lower;
    }
}

TEST(ConfidenceDistribution, EqualsInverseVarianceInterval) {
    std::mt19937_64 gen(61);
    for (int rep = 0; rep < 100; ++rep) {
        const auto base = random_summaries(gen, 2 + rep % 30, 1.0);
        const auto s = base.with_tau2(rep % 2 ? dl_tau2(base) : 0.0);
        for (double beta : {0.01, 0.05, 0.2}) {
            const auto c = conventional_ci(s, beta);
            const auto d = cd_ci(s, beta);
            EXPECT_NEAR(c.estimate, d.estimate, 1e-12);
            EXPECT_NEAR(c.ci_lower, d.ci_lower, 1e-12);
            EXPECT_NEAR(c.ci_upper, d.ci_upper, 1e-12);
        }
    }
}

TEST(ConfidenceDistribution, MedianAtPooledEstimate) {
    std::mt19937_64 gen(67);
    const auto s = random_summaries(gen, 12, 1.0);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double v = s.total_sd(k) * s.total_sd(k);
        num += s.centers()[k] / v;
        den += 1.0 / v;
    }
    EXPECT_NEAR(cd_function(s, num / den), 0.5, 1e-14);
}

TEST(ConfidenceDistribution, StrictlyIncreasingWithUnitRange) {
    std::mt19937_64 gen(71);
    const auto s = random_summaries(gen, 6, 1.0);
    double prev = 0.0;
    // Wide enough to reach both tails, narrow enough that H stays below 1 in double precision.
    for (double t = -2.5; t <= 2.5; t += 0.05) {
        const double h = cd_function(s, t);
        EXPECT_GT(h, prev);
        EXPECT_LT(h, 1.0);
        prev = h;
    }
}

TEST(ConfidenceDistribution, SingleStudyRebuildsItsInterval) {
    const WeightedSummaries s({1.0}, {0.4});
    const auto r = cd_ci(s, 0.1);
    const double z = dist::normal_quantile(0.95);
    EXPECT_NEAR(r.ci_lower, 1.0 - z * 0.4, 1e-14);
    EXPECT_NEAR(r.ci_upper, 1.0 + z * 0.4, 1e-14);
}

TEST(Summaries, TotalSdDominatesWithinSd) {
    const WeightedSummaries s({0.0, 1.0}, {0.5, 2.0}, 0.3);
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_GT(s.total_sd(k), s.sds()[k]);
        EXPECT_GT(s.weight(k), 0.0);
    }
    const auto z = s.with_tau2(0.0);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(z.total_sd(k), z.sds()[k]);
}
