#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "elmeta/distributions.hpp"
#include "elmeta/el_engine.hpp"
#include "elmeta/error.hpp"
#include "oracles.hpp"

using namespace elmeta;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

StudyInterval iv(double lo, double hi) {
    StudyInterval s;
    s.lower = lo;
    s.upper = hi;
    return s;
}

MetaDataset pair_dataset() { return MetaDataset({iv(-1, 1), iv(0, 2)}, Scale::Linear); }

MetaDataset random_dataset(std::mt19937_64& gen, int k, double spread = 1.0) {
    std::normal_distribution<double> center(0.0, spread);
    std::uniform_real_distribution<double> half(0.3, 2.0);
    std::vector<StudyInterval> s;
    for (int i = 0; i < k; ++i) {
        const double c = center(gen);
        const double h = half(gen);
        s.push_back(iv(c - h, c + h));
    }
    return MetaDataset(std::move(s), Scale::Linear);
}

// (sum (L+U)/(U-L)) / (2 sum 1/(U-L)), written out independently.
double weighted_midpoint(const MetaDataset& d) {
    double num = 0.0, den = 0.0;
    for (const auto& s : d.studies()) {
        num += (s.lower + s.upper) / (s.upper - s.lower);
        den += 1.0 / (s.upper - s.lower);
    }
    return num / (2.0 * den);
}

const ElVariant kVariants[] = {ElVariant::RandomEffects, ElVariant::FixedIndicator,
                               ElVariant::FixedSymmetry, ElVariant::FixedBoth};

}  // namespace

TEST(ElSymmetry, PairDatasetEstimateIsWeightedMidpoint) {
    const ElModel m(pair_dataset(), ElVariant::FixedSymmetry);
    EXPECT_EQ(m.estimate(), 0.5);
    EXPECT_NEAR(m.neg2logr(0.5), 0.0, 1e-14);
    EXPECT_NEAR(m.max_log_likelihood(), -2.0 * std::log(2.0), 1e-14);
}

TEST(ElSymmetry, HullBoundaryIsInfinite) {
    const ElModel m(pair_dataset(), ElVariant::FixedSymmetry);
    EXPECT_EQ(m.neg2logr(0.0), kInf);
    EXPECT_EQ(m.neg2logr(2.0), kInf);
    EXPECT_EQ(m.neg2logr(-3.0), kInf);
    EXPECT_FALSE(m.evaluate(0.0).feasible);
}

TEST(ElSymmetry, PairIntervalMatchesDenseGrid) {
    const ElModel m(pair_dataset(), ElVariant::FixedSymmetry);
    const auto ci = m.confidence_interval(0.05);
    EXPECT_LT(0.0, ci.ci_lower);
    EXPECT_LT(ci.ci_lower, 0.5);
    EXPECT_LT(0.5, ci.ci_upper);
    EXPECT_LT(ci.ci_upper, 2.0);

    const double q = dist::chi_square_quantile(0.95, 1.0);
    const int n = 200001;
    const double h = 2.0 / (n - 1);
    double lo = kInf, hi = -kInf;
    for (int i = 1; i < n - 1; ++i) {
        const double t = h * i;
        if (m.neg2logr(t) <= q) {
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
    }
    EXPECT_NEAR(ci.ci_lower, lo, h);
    EXPECT_NEAR(ci.ci_upper, hi, h);
}

TEST(ElSymmetry, IdenticalIntervalsEstimateTheirMidpoint) {
    std::vector<StudyInterval> s(5, iv(1.0, 4.0));
    const ElModel m(MetaDataset(s, Scale::Linear), ElVariant::RandomEffects);
    EXPECT_NEAR(m.estimate(), 2.5, 1e-15);
}

TEST(ElSymmetry, EstimateEqualsWeightedMidpointFormula) {
    std::mt19937_64 gen(3);
    for (int rep = 0; rep < 40; ++rep) {
        const auto d = random_dataset(gen, 3 + rep % 9);
        const ElModel m(d, ElVariant::FixedSymmetry);
        EXPECT_NEAR(m.estimate(), weighted_midpoint(d), 1e-10);
        EXPECT_LE(std::fabs(m.neg2logr(m.estimate())), 1e-8);
    }
}

TEST(ElSymmetry, RandomEffectsAndFixedSymmetryCurvesCoincide) {
    std::mt19937_64 gen(4);
    for (int rep = 0; rep < 10; ++rep) {
        const auto d = random_dataset(gen, 8);
        const ElModel re(d, ElVariant::RandomEffects);
        const ElModel f2(d, ElVariant::FixedSymmetry);
        EXPECT_EQ(re.estimate(), f2.estimate());
        const auto range = re.feasible_range();
        for (int i = 0; i <= 200; ++i) {
            const double t = range.lower - 0.5 + (range.upper - range.lower + 1.0) * i / 200.0;
            const double a = re.neg2logr(t);
            const double b = f2.neg2logr(t);
            if (std::isinf(a) || std::isinf(b)) {
                EXPECT_EQ(a, b) << "t=" << t;
            } else {
                EXPECT_NEAR(a, b, 1e-10) << "t=" << t;
            }
        }
        const auto ca = re.confidence_interval(0.05);
        const auto cb = f2.confidence_interval(0.05);
        EXPECT_NEAR(ca.ci_lower, cb.ci_lower, 1e-10);
        EXPECT_NEAR(ca.ci_upper, cb.ci_upper, 1e-10);
    }
}

TEST(ElSymmetry, AffineEquivariance) {
    std::mt19937_64 gen(8);
    for (double a : {0.01, 0.5, 3.0, 250.0}) {
        for (double b : {-40.0, 0.0, 1.7}) {
            const auto d = random_dataset(gen, 7);
            std::vector<StudyInterval> moved;
            for (const auto& s : d.studies()) moved.push_back(iv(a * s.lower + b, a * s.upper + b));
            const MetaDataset e(moved, Scale::Linear);
            for (ElVariant v : {ElVariant::RandomEffects, ElVariant::FixedSymmetry}) {
                const ElModel m0(d, v);
                const ElModel m1(e, v);
                EXPECT_NEAR(m1.estimate(), a * m0.estimate() + b, 1e-10 * std::max(1.0, std::fabs(b) + a));
                for (double t = m0.estimate() - 1.0; t <= m0.estimate() + 1.0; t += 0.125) {
                    const double x = m0.neg2logr(t);
                    const double y = m1.neg2logr(a * t + b);
                    if (std::isinf(x)) {
                        EXPECT_TRUE(std::isinf(y));
                    } else {
                        EXPECT_NEAR(x, y, 1e-10 * std::max(1.0, x));
                    }
                }
            }
        }
    }
}

TEST(ElSymmetry, FiniteExactlyOnFeasibleRange) {
    std::mt19937_64 gen(21);
    const auto d = random_dataset(gen, 6);
    const ElModel m(d, ElVariant::FixedSymmetry);
    const auto r = m.feasible_range();
    double min_mid = kInf, max_mid = -kInf;
    for (const auto& s : d.studies()) {
        min_mid = std::min(min_mid, s.midpoint());
        max_mid = std::max(max_mid, s.midpoint());
    }
    EXPECT_EQ(r.lower, min_mid);
    EXPECT_EQ(r.upper, max_mid);
    EXPECT_EQ(m.neg2logr(r.lower), kInf);
    EXPECT_EQ(m.neg2logr(r.upper), kInf);
    for (int i = 1; i < 100; ++i) {
        EXPECT_TRUE(std::isfinite(m.neg2logr(r.lower + (r.upper - r.lower) * i / 100.0)));
    }
}

namespace {

// Eighteen copies of [-1, 1], one [0.5, 2] and one [5, 6]: nineteen intervals cover (0.5, 1],
// eighteen cover [0, 0.5).
MetaDataset twenty_dataset() {
    std::vector<StudyInterval> s(18, iv(-1.0, 1.0));
    s.push_back(iv(0.5, 2.0));
    s.push_back(iv(5.0, 6.0));
    return MetaDataset(s, Scale::Linear);
}

}  // namespace

TEST(ElIndicator, ZeroWhereMaximumCountIsAttained) {
    const ElModel m(twenty_dataset(), ElVariant::FixedIndicator);
    EXPECT_EQ(m.neg2logr(0.7), 0.0);
    EXPECT_EQ(m.estimate(), 0.75);
}

TEST(ElIndicator, RatioOfCountsMatchesHandValue) {
    const ElModel m(twenty_dataset(), ElVariant::FixedIndicator);
    // 2 [g(19) - g(18)] evaluated to 30 digits in an independent script.
    EXPECT_NEAR(m.neg2logr(0.2), 0.826168756509853597, 1e-12);
}

TEST(ElIndicator, NoFeasibleThetaWhenAllOrNoneCover) {
    std::vector<StudyInterval> s(3, iv(0.0, 1.0));
    try {
        ElModel m(MetaDataset(s, Scale::Linear), ElVariant::FixedIndicator);
        FAIL() << "expected NoFeasibleTheta";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoFeasibleTheta);
    }
}

TEST(ElIndicator, ClosedFormMatchesGenericSolver) {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    for (int rep = 0; rep < 30; ++rep) {
        const auto d = random_dataset(gen, 4 + rep % 12);
        const EstimatingFunction ef(d, ElVariant::FixedIndicator);
        for (int j = 0; j < 20; ++j) {
            const double t = unif(gen);
            std::size_t m = 0;
            for (std::size_t i = 0; i < d.size(); ++i) m += ef.covers(i, t);
            const double closed = indicator_log_likelihood(m, d.size(), d.alpha());
            const auto generic = solve_dual(ef.evaluate(t), 1, {0.0, 0.0});
            if (std::isinf(closed)) {
                EXPECT_FALSE(generic.feasible);
            } else {
                ASSERT_TRUE(generic.feasible);
                EXPECT_NEAR(closed, generic.log_likelihood, 1e-9);
            }
        }
    }
}

TEST(ElAllVariants, StatisticVanishesAtEstimate) {
    std::mt19937_64 gen(17);
    for (int rep = 0; rep < 20; ++rep) {
        const auto d = random_dataset(gen, 6 + rep, 0.6);
        for (ElVariant v : kVariants) {
            try {
                const ElModel m(d, v);
                EXPECT_LE(std::fabs(m.neg2logr(m.estimate())), 1e-8) << to_string(v);
                const auto ci = m.confidence_interval(0.05);
                EXPECT_LE(ci.ci_lower, ci.estimate);
                EXPECT_LE(ci.estimate, ci.ci_upper);
            } catch (const Error& e) {
                EXPECT_EQ(e.code(), ErrorCode::NoFeasibleTheta);
            }
        }
    }
}

TEST(ElAllVariants, StatisticIsNonNegative) {
    std::mt19937_64 gen(19);
    const auto d = random_dataset(gen, 12, 0.5);
    for (ElVariant v : kVariants) {
        const ElModel m(d, v);
        for (double t = -4.0; t <= 4.0; t += 0.01) EXPECT_GE(m.neg2logr(t), 0.0) << to_string(v) << " t=" << t;
    }
}

TEST(ElAllVariants, IntervalShrinksToEstimateAsBetaApproachesOne) {
    std::mt19937_64 gen(23);
    const auto d = random_dataset(gen, 15, 0.4);
    for (ElVariant v : {ElVariant::RandomEffects, ElVariant::FixedSymmetry, ElVariant::FixedBoth}) {
        const ElModel m(d, v);
        const auto wide = m.confidence_interval(0.05);
        const auto narrow = m.confidence_interval(1.0 - 1e-9);
        EXPECT_LT(narrow.ci_upper - narrow.ci_lower, 1e-3 * (wide.ci_upper - wide.ci_lower)) << to_string(v);
        EXPECT_LE(narrow.ci_lower, m.estimate());
        EXPECT_GE(narrow.ci_upper, m.estimate());
    }
}

TEST(ElAllVariants, ReportedComponentLiesInsideLevelSet) {
    std::mt19937_64 gen(29);
    for (int rep = 0; rep < 10; ++rep) {
        const auto d = random_dataset(gen, 10, 1.5);
        for (ElVariant v : kVariants) {
            const ElModel m(d, v);
            const auto ci = m.confidence_interval(0.05);
            const double q = dist::chi_square_quantile(0.95, dimension(v));
            EXPECT_NEAR(ci.diagnostics.at("threshold"), q, 1e-12);
            const auto pieces = m.level_set(q);
            bool found = false;
            for (const auto& p : pieces) {
                if (p.lower <= ci.ci_lower && ci.ci_upper <= p.upper) found = true;
            }
            EXPECT_TRUE(found) << to_string(v);
            // Just outside the reported component the statistic exceeds the threshold.
            const double step = 1e-6 * (1.0 + std::fabs(ci.ci_upper));
            EXPECT_GT(m.neg2logr(ci.ci_upper + step), q - 1e-9);
            EXPECT_GT(m.neg2logr(ci.ci_lower - step), q - 1e-9);
        }
    }
}

TEST(ElBoth, ProfileMaximumMatchesThetaGrid) {
    std::mt19937_64 gen(31);
    for (int rep = 0; rep < 5; ++rep) {
        const auto d = random_dataset(gen, 8, 0.5);
        const ElModel m(d, ElVariant::FixedBoth);
        double lo = kInf, hi = -kInf;
        std::vector<double> grid;
        for (const auto& s : d.studies()) {
            lo = std::min(lo, s.lower);
            hi = std::max(hi, s.upper);
            // The supremum may sit at a segment end, so probe just inside every breakpoint.
            for (double b : {s.lower, s.upper}) {
                for (double off : {0.0, 1e-12, 1e-11, 1e-10}) {
                    grid.push_back(b - off);
                    grid.push_back(b + off);
                }
            }
        }
        const int n = 100000;
        for (int i = 0; i < n; ++i) grid.push_back(lo + (hi - lo) * i / (n - 1));
        double best = -kInf;
        for (double t : grid) best = std::max(best, m.log_likelihood(t));
        EXPECT_GE(m.max_log_likelihood(), best - 1e-12);
        EXPECT_NEAR(m.max_log_likelihood(), best, 1e-6);
        EXPECT_NEAR(m.log_likelihood(m.estimate()), m.max_log_likelihood(), 1e-9);
    }
}

TEST(ElBoth, EvaluationMatchesGridDual) {
    std::mt19937_64 gen(37);
    const auto d = random_dataset(gen, 7, 0.5);
    const ElModel m(d, ElVariant::FixedBoth);
    const EstimatingFunction ef(d, ElVariant::FixedBoth);
    for (double t = -1.0; t <= 1.0; t += 0.25) {
        const auto ev = m.evaluate(t);
        if (!ev.feasible) continue;
        const auto vecs = ef.evaluate(t);
        std::vector<std::array<double, 2>> v(vecs.begin(), vecs.end());
        EXPECT_NEAR(ev.log_likelihood, oracle::dual_grid_2d(v).log_likelihood, 1e-6) << "t=" << t;
    }
}
