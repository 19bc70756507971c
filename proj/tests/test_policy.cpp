#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace dnnci;
using testutil::Gen;

namespace {

const Policy kNone = [](std::span<const double>) { return 0.0; };
const Policy kAll = [](std::span<const double>) { return 1.0; };

PolicyEvalCurve curve_with(std::vector<double> estimates) {
    PolicyEvalCurve c;
    for (std::size_t k = 0; k < estimates.size(); ++k) {
        CurvePoint p;
        p.threshold = static_cast<double>(k);
        p.report.estimate = estimates[k];
        c.points.push_back(p);
    }
    return c;
}

}  // namespace

TEST(Grid, FourRowSingleThreshold) {
    const auto data = testutil::four_rows();
    const auto v = testutil::constant_nuisances(4, 1.0, 2.0, 0.5);
    ThresholdPolicyClass cls{0, {25.0}};
    const auto curve = evaluate_grid(data, v, cls, kNone);
    ASSERT_EQ(curve.points.size(), 1u);
    EXPECT_DOUBLE_EQ(curve.points[0].report.estimate, 0.5);
    EXPECT_EQ(curve.points[0].report.estimand_tag, "profit_diff");
    EXPECT_EQ(curve.points[0].threshold, 25.0);
}

TEST(Grid, ThresholdBelowMinimumAgainstTreatAllIsExactlyZero) {
    const auto data = testutil::four_rows();
    const auto v = testutil::constant_nuisances(4, 1.0, 2.0, 0.5);
    const auto curve = evaluate_grid(data, v, ThresholdPolicyClass{0, {5.0}}, kAll);
    EXPECT_EQ(curve.points[0].report.estimate, 0.0);
    EXPECT_EQ(curve.points[0].report.std_error, 0.0);
}

TEST(Grid, CurveHasOnePointPerThreshold) {
    Gen g(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto cls = ThresholdPolicyClass::regular(0, 0.0, 0.05, testutil::unif(g, 0.1, 1.0));
        CausalDataset data{Matrix(40, 1), testutil::random_vector(g, 40), std::vector<double>(40)};
        for (std::size_t i = 0; i < 40; ++i) {
            data.X(i, 0) = testutil::unif(g, 0, 1);
            data.t[i] = i % 2;
        }
        const auto curve = evaluate_grid(data, testutil::constant_nuisances(40, 0.1, 0.3, 0.5), cls, kNone);
        ASSERT_EQ(curve.points.size(), cls.thresholds.size());
        for (std::size_t k = 0; k < cls.thresholds.size(); ++k) EXPECT_EQ(curve.points[k].threshold, cls.thresholds[k]);
    }
}

TEST(Grid, BaseEqualToAGridMemberGivesZeroThere) {
    Gen g(2);
    CausalDataset data{Matrix(60, 2), testutil::random_vector(g, 60), std::vector<double>(60)};
    for (std::size_t i = 0; i < 60; ++i) {
        data.X(i, 0) = testutil::unif(g, 0, 1);
        data.X(i, 1) = testutil::unif(g, 0, 1);
        data.t[i] = i % 3 == 0;
    }
    NuisanceValues v{testutil::random_vector(g, 60), testutil::random_vector(g, 60), testutil::random_vector(g, 60, 0.2, 0.8)};
    const auto cls = ThresholdPolicyClass::regular(1, 0.0, 0.1, 1.0);
    const auto curve = evaluate_grid(data, v, cls, cls.policy(4));
    EXPECT_EQ(curve.points[4].report.estimate, 0.0);
    EXPECT_EQ(curve.points[4].report.std_error, 0.0);
}

TEST(Grid, PointsMatchDirectProfitDifferences) {
    Gen g(3);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 30 + trial;
        CausalDataset data{Matrix(n, 1), testutil::random_vector(g, n, -2, 2), std::vector<double>(n)};
        for (std::size_t i = 0; i < n; ++i) {
            data.X(i, 0) = testutil::unif(g, 0, 1);
            data.t[i] = i < 2 ? static_cast<double>(i) : (testutil::unif(g, 0, 1) < 0.5);
        }
        NuisanceValues v{testutil::random_vector(g, n), testutil::random_vector(g, n), testutil::random_vector(g, n, 0.1, 0.9)};
        const double m = testutil::unif(g, 0.5, 2.0), c = testutil::unif(g, 0.0, 0.5);
        const auto cls = ThresholdPolicyClass::regular(0, 0.1, 0.2, 0.9);
        const auto curve = evaluate_grid(data, v, cls, kNone, m, c);
        for (std::size_t k = 0; k < cls.thresholds.size(); ++k) {
            const auto direct = profit(data, v, cls.policy(k), m, c).report.estimate -
                                profit(data, v, kNone, m, c).report.estimate;
            EXPECT_NEAR(curve.points[k].report.estimate, direct, 1e-12);
        }
    }
}

TEST(Select, FirstOfTiesWins) {
    const auto best = select_optimal(curve_with({0.1, 0.5, 0.5, 0.2}));
    EXPECT_EQ(best.threshold, 1.0);
    EXPECT_EQ(best.report.estimate, 0.5);
    EXPECT_THROW(select_optimal(PolicyEvalCurve{}), DataError);
}

TEST(Select, IsTheArgmaxUnderPermutationOfValues) {
    Gen g(4);
    for (int trial = 0; trial < 200; ++trial) {
        auto vals = testutil::random_vector(g, testutil::pick(g, 1, 30));
        if (vals.size() > 2 && trial % 3 == 0) vals[vals.size() - 1] = vals[0];  // plant ties
        const auto best = select_optimal(curve_with(vals));
        const auto it = std::max_element(vals.begin(), vals.end());
        EXPECT_EQ(best.threshold, static_cast<double>(it - vals.begin()));
        for (double x : vals) EXPECT_GE(best.report.estimate, x);
    }
}

TEST(PolicyClass, RegularGridAndValidation) {
    const auto cls = ThresholdPolicyClass::regular(2, 0.0, 0.02, 1.0);
    EXPECT_EQ(cls.thresholds.size(), 51u);
    EXPECT_EQ(cls.thresholds.front(), 0.0);
    EXPECT_NEAR(cls.thresholds.back(), 1.0, 1e-12);
    EXPECT_NO_THROW(cls.validate(3));
    EXPECT_THROW(cls.validate(2), ConfigError);
    EXPECT_THROW((ThresholdPolicyClass{0, {}}).validate(1), ConfigError);
    EXPECT_THROW((ThresholdPolicyClass{0, {0.3, 0.3}}).validate(1), ConfigError);
    EXPECT_THROW(ThresholdPolicyClass::regular(0, 0.0, 0.0, 1.0), ConfigError);
}

TEST(PolicyClass, TreatedSetsAreNested) {
    Gen g(5);
    const auto cls = ThresholdPolicyClass::regular(0, -1.0, 0.25, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const std::vector<double> x{testutil::unif(g, -1.5, 1.5)};
        for (std::size_t k = 1; k < cls.thresholds.size(); ++k)
            EXPECT_LE(cls.policy(k)(x), cls.policy(k - 1)(x));
    }
}
