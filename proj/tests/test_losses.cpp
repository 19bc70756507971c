#include <gtest/gtest.h>

#include <cmath>

#include "loss_oracle.hpp"
#include "test_util.hpp"

using namespace dnnci;
using testutil::Gen;

namespace {

const std::vector<LossKind>& all_kinds() {
    static const std::vector<LossKind> kinds{LossKind::least_squares(), LossKind::logistic(), LossKind::poisson(),
                                             LossKind::gamma(2.0), LossKind::multinomial(3)};
    return kinds;
}

/// A valid outcome for `kind`, within the envelope M.
std::vector<double> draw_outcome(Gen& g, const LossKind& kind, double M) {
    using T = LossKind::Tag;
    switch (kind.tag) {
        case T::LeastSquares: return {testutil::unif(g, -M, M)};
        case T::Logistic: return {static_cast<double>(testutil::pick(g, 0, 1))};
        case T::Poisson: return {static_cast<double>(testutil::pick(g, 0, static_cast<std::size_t>(M)))};
        case T::Gamma: return {testutil::unif(g, 0.01, M)};
        case T::Multinomial: {
            std::vector<double> y(kind.classes, 0.0);
            const std::size_t c = testutil::pick(g, 0, kind.classes);
            if (c > 0) y[c - 1] = 1.0;
            return y;
        }
    }
    return {};
}

}  // namespace

TEST(LossValue, HandExamples) {
    EXPECT_DOUBLE_EQ(loss_value(LossKind::least_squares(), 0.0, 1.0), 0.5);
    EXPECT_DOUBLE_EQ(loss_value(LossKind::logistic(), 0.0, 0.0), std::log(2.0));
    EXPECT_DOUBLE_EQ(loss_value(LossKind::poisson(), 0.0, 1.0), 1.0);
    // gamma: -y f - ln(-f) at f = -1, y = 2 -> 2
    EXPECT_DOUBLE_EQ(loss_value(LossKind::gamma(), -1.0, 2.0), 2.0);
    // multinomial with zero logits and the baseline class: ln(1 + K)
    const std::vector<double> f(3, 0.0), y(3, 0.0);
    EXPECT_DOUBLE_EQ(loss_value(LossKind::multinomial(3), f, y), std::log(4.0));
}

TEST(LossValue, LogisticIsStableForLargeOutputs) {
    EXPECT_NEAR(loss_value(LossKind::logistic(), 800.0, 1.0), 0.0, 1e-300);
    EXPECT_DOUBLE_EQ(loss_value(LossKind::logistic(), 800.0, 0.0), 800.0);
    EXPECT_NEAR(loss_value(LossKind::logistic(), -800.0, 0.0), 0.0, 1e-300);
    const std::vector<double> f{700.0, 710.0}, y{0.0, 1.0};
    EXPECT_NEAR(loss_value(LossKind::multinomial(2), f, y), std::log1p(std::exp(-10.0)), 1e-12);
}

TEST(LossValue, DomainAndShapeErrors) {
    EXPECT_THROW(loss_value(LossKind::gamma(), 0.0, 1.0), DomainError);
    EXPECT_THROW(loss_value(LossKind::gamma(), 0.5, 1.0), DomainError);
    const std::vector<double> f(2, 0.0), y(3, 0.0);
    EXPECT_THROW(loss_value(LossKind::multinomial(3), f, y), DimensionError);
    EXPECT_THROW(LossKind::multinomial(1), DomainError);
}

TEST(LossKind, ParseAndPrint) {
    for (const auto& k : all_kinds()) EXPECT_EQ(parse_loss_kind(to_string(k), k.bound_M), k);
    EXPECT_THROW(parse_loss_kind("hinge"), ConfigError);
    EXPECT_THROW(parse_loss_kind("multinomial:1"), ConfigError);
    EXPECT_THROW(parse_loss_kind("multinomial:x"), ConfigError);
}

TEST(Outcomes, ValidationRejectsOutOfSpaceValues) {
    const std::vector<double> two{2.0};
    EXPECT_THROW(validate_outcome(LossKind::logistic(), two), DataError);
    const std::vector<double> half{0.5};
    EXPECT_THROW(validate_outcome(LossKind::poisson(), half), DataError);
    const std::vector<double> zero{0.0};
    EXPECT_THROW(validate_outcome(LossKind::gamma(), zero), DataError);
    const std::vector<double> two_hot{1.0, 1.0};
    EXPECT_THROW(validate_outcome(LossKind::multinomial(2), two_hot), DataError);
}

TEST(LossGrad, MatchesCentralDifferences) {
    Gen g(17);
    for (const auto& kind : all_kinds()) {
        const double M = kind.tag == LossKind::Tag::Gamma ? 2.0 : 1.5;
        double worst = 0.0;
        for (int trial = 0; trial < 200; ++trial) {
            auto f = testutil::draw_output(g, kind, M);
            const auto y = draw_outcome(g, kind, 3.0);
            const auto grad = loss_grad(kind, f, y);
            for (std::size_t k = 0; k < f.size(); ++k) {
                const double h = 1e-6, saved = f[k];
                f[k] = saved + h;
                const double up = loss_value(kind, f, y);
                f[k] = saved - h;
                const double down = loss_value(kind, f, y);
                f[k] = saved;
                worst = std::max(worst, testutil::relative_error(grad[k], (up - down) / (2.0 * h)));
            }
        }
        EXPECT_LT(worst, 1e-6) << to_string(kind);
    }
}

TEST(LossGrad, VanishesInExpectationAtTheTruth) {
    Gen g(18);
    for (const auto& kind : all_kinds()) {
        for (int trial = 0; trial < 20; ++trial) {
            const auto fs = testutil::draw_output(g, kind, kind.tag == LossKind::Tag::Gamma ? 2.0 : 1.0);
            std::vector<double> eg(fs.size(), 0.0);
            for (const auto& [y, p] : testutil::outcome_law(kind, fs)) {
                const auto gr = loss_grad(kind, fs, y);
                for (std::size_t k = 0; k < eg.size(); ++k) eg[k] += p * gr[k];
            }
            for (double v : eg) EXPECT_NEAR(v, 0.0, 1e-12) << to_string(kind);
        }
    }
}

TEST(Loss, ConvexAlongRandomSegments) {
    Gen g(19);
    for (const auto& kind : all_kinds()) {
        const double M = kind.tag == LossKind::Tag::Gamma ? 2.0 : 2.0;
        for (int trial = 0; trial < 300; ++trial) {
            const auto a = testutil::draw_output(g, kind, M);
            const auto b = testutil::draw_output(g, kind, M);
            const auto y = draw_outcome(g, kind, 3.0);
            const double lam = testutil::unif(g, 0.0, 1.0);
            std::vector<double> mid(a.size());
            for (std::size_t k = 0; k < a.size(); ++k) mid[k] = lam * a[k] + (1.0 - lam) * b[k];
            const double chord = lam * loss_value(kind, a, y) + (1.0 - lam) * loss_value(kind, b, y);
            EXPECT_LE(loss_value(kind, mid, y), chord + 1e-12) << to_string(kind);
        }
    }
}

TEST(Loss, LipschitzInTheOutput) {
    // Outcomes within the envelope; least squares is checked on the half box (see README).
    Gen g(20);
    for (const auto& kind : all_kinds()) {
        const double M = kind.tag == LossKind::Tag::Gamma ? 2.0 : 1.0;
        const auto c = curvature_constants(kind, M);
        const double box = kind.tag == LossKind::Tag::LeastSquares ? M / 2.0 : M;
        for (int trial = 0; trial < 500; ++trial) {
            const auto a = testutil::draw_output(g, kind, box);
            const auto b = testutil::draw_output(g, kind, box);
            const auto y = draw_outcome(g, kind, box);
            double dist = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k) dist += (a[k] - b[k]) * (a[k] - b[k]);
            dist = std::sqrt(dist);
            EXPECT_LE(std::abs(loss_value(kind, a, y) - loss_value(kind, b, y)), c.C_ell * dist + 1e-12)
                << to_string(kind);
        }
    }
}

TEST(Curvature, ConstantsAreOrdered) {
    for (const auto& kind : all_kinds())
        for (double M : {1.0, 2.0, 3.5}) {
            const auto c = curvature_constants(kind, M);
            EXPECT_GT(c.c1, 0.0);
            EXPECT_LE(c.c1, c.c2);
            EXPECT_GT(c.C_ell, 0.0);
        }
    EXPECT_THROW(curvature_constants(LossKind::gamma(), 0.5), DomainError);
    EXPECT_THROW(curvature_constants(LossKind::poisson(), -1.0), DomainError);
}

TEST(Curvature, KnownValues) {
    const auto lg = curvature_constants(LossKind::logistic(), 1.0);
    EXPECT_NEAR(lg.c1, 1.0 / (2.0 * (std::exp(1.0) + std::exp(-1.0) + 2.0)), 1e-15);
    EXPECT_NEAR(lg.c1, 0.09830596662074093, 1e-15);
    EXPECT_DOUBLE_EQ(lg.c2, 0.125);
    const auto ls = curvature_constants(LossKind::least_squares(), 3.0);
    EXPECT_DOUBLE_EQ(ls.c1, 0.5);
    EXPECT_DOUBLE_EQ(ls.c2, 0.5);
    EXPECT_DOUBLE_EQ(ls.C_ell, 3.0);
    const auto ps = curvature_constants(LossKind::poisson(), 1.0);
    EXPECT_DOUBLE_EQ(ps.C_ell, std::exp(1.0) + 1.0);
}

TEST(Curvature, MultinomialBoundsCoverHessianSpectrum) {
    // Hessian of log(1 + sum e^f) is diag(p) - p p'; eigenvalues by power iteration on a 3x3 matrix.
    Gen g(21);
    const auto kind = LossKind::multinomial(3);
    const auto c = curvature_constants(kind, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto f = testutil::draw_output(g, kind, 1.0);
        const auto p = mean_from_f(kind, f);
        double H[3][3];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) H[i][j] = (i == j ? p[i] : 0.0) - p[i] * p[j];
        // Rayleigh quotients over random directions stay inside [2 c1, 2 c2].
        for (int k = 0; k < 50; ++k) {
            const auto v = testutil::random_vector(g, 3);
            double num = 0.0, den = 0.0;
            for (int i = 0; i < 3; ++i) {
                den += v[i] * v[i];
                for (int j = 0; j < 3; ++j) num += v[i] * H[i][j] * v[j];
            }
            EXPECT_GE(num / den, 2.0 * c.c1 - 1e-14);
            EXPECT_LE(num / den, 2.0 * c.c2 + 1e-14);
        }
    }
}

TEST(Curvature, SandwichHoldsOnFivePointDesign) {
    const std::vector<std::pair<LossKind, double>> cases{{LossKind::least_squares(), 1.0},
                                                         {LossKind::logistic(), 1.0},
                                                         {LossKind::poisson(), 1.0},
                                                         {LossKind::gamma(), 2.0},
                                                         {LossKind::multinomial(3), 1.0}};
    for (const auto& [kind, M] : cases) {
        const auto r = testutil::check_sandwich(kind, M, 100, 7);
        EXPECT_EQ(r.violations, 0) << to_string(kind);
        EXPECT_EQ(r.trials, 100);
    }
}

TEST(MeanFromF, InverseLinks) {
    EXPECT_DOUBLE_EQ(mean_from_f(LossKind::least_squares(), 1.5), 1.5);
    EXPECT_DOUBLE_EQ(mean_from_f(LossKind::logistic(), 0.0), 0.5);
    EXPECT_DOUBLE_EQ(mean_from_f(LossKind::poisson(), 0.0), 1.0);
    EXPECT_DOUBLE_EQ(mean_from_f(LossKind::gamma(), -0.25), 4.0);
    const std::vector<double> f{0.0, 0.0};
    for (double p : mean_from_f(LossKind::multinomial(2), f)) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}
