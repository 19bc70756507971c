#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "test_util.hpp"

using namespace dnnci;
using testutil::Gen;

TEST(ParamCount, MatchesReferenceArchitectures) {
    struct Case {
        std::vector<std::size_t> widths;
        std::size_t expected;
    };
    const std::vector<Case> cases{{{60}, 8702},           {{100}, 14502},      {{30, 20}, 4952},
                                  {{30, 10}, 4622},       {{30, 30}, 5282},    {{30, 30}, 5282},
                                  {{100, 30, 20}, 17992}, {{80, 30, 20}, 14532}};
    for (const auto& c : cases) EXPECT_EQ(param_count(ArchitectureSpec::mlp(142, c.widths, 2)), c.expected);
    EXPECT_EQ(param_count(ArchitectureSpec::mlp(2, {3, 3}, 1)), 25u);
}

TEST(ParamCount, ConstantWidthClosedForm) {
    // W = (d+1)H + (L-1)(H^2+H) + H + 1 for one output.
    for (std::size_t d : {1u, 4u, 20u})
        for (std::size_t H : {1u, 3u, 17u})
            for (std::size_t L : {1u, 2u, 5u}) {
                const std::size_t closed = (d + 1) * H + (L - 1) * (H * H + H) + H + 1;
                EXPECT_EQ(param_count(ArchitectureSpec::mlp(d, std::vector<std::size_t>(L, H), 1)), closed);
            }
}

TEST(ParamCount, EqualsStoredScalars) {
    Gen g(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto spec = testutil::random_spec(g, 4, 12);
        EXPECT_EQ(param_count(spec), initialize(spec, trial).stored_parameters());
    }
}

TEST(Spec, RejectsMalformedArchitectures) {
    auto bad = ArchitectureSpec::mlp(3, {4, 0}, 1);
    EXPECT_THROW(bad.validate(), DimensionError);
    auto rates = ArchitectureSpec::mlp(3, {4}, 1);
    rates.dropout_rates = {0.1, 0.2};
    EXPECT_THROW(rates.validate(), DimensionError);
    rates.dropout_rates = {1.0};
    EXPECT_THROW(rates.validate(), DomainError);
    auto clamp = ArchitectureSpec::mlp(3, {4}, 1);
    clamp.clamp_bound = -1.0;
    EXPECT_THROW(clamp.validate(), DomainError);
    EXPECT_THROW(ArchitectureSpec::mlp(0, {4}, 1).validate(), DimensionError);
}

TEST(Initialize, DeterministicWithZeroConstants) {
    const auto spec = ArchitectureSpec::mlp(7, {9, 5}, 2);
    const auto a = initialize(spec, 123);
    const auto b = initialize(spec, 123);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, initialize(spec, 124));
    for (const auto& layer : a.layers)
        for (double c : layer.constants) EXPECT_EQ(c, 0.0);
}

TEST(Initialize, FirstLayerVarianceIsTwoOverFanIn) {
    const std::size_t d = 50;
    const auto net = initialize(ArchitectureSpec::mlp(d, {200}, 1), 5);
    const auto& w = net.layers[0].weights;
    ASSERT_EQ(w.size(), 10000u);
    const double m = mean(w);
    double ss = 0.0;
    for (double v : w) ss += (v - m) * (v - m);
    const double var = ss / static_cast<double>(w.size() - 1);
    EXPECT_NEAR(var, 2.0 / d, 0.1 * 2.0 / d);
    EXPECT_NEAR(m, 0.0, 4.0 * std::sqrt(2.0 / d / 10000.0));
}

TEST(Forward, HandComputedNetwork) {
    // x = (1, 2); hidden h = relu(W1 x + b1) with rows (1, -1), (0.5, 0.5) and b1 = (0, -1);
    // pre = (-1, 0.5) -> h = (0, 0.5); output 2*h1 + 3*h2 + 1 = 2.5.
    auto net = NetworkState::zeros(ArchitectureSpec::mlp(2, {2}, 1));
    net.layers[0].weights = {1, -1, 0.5, 0.5};
    net.layers[0].constants = {0, -1};
    net.layers[1].weights = {2, 3};
    net.layers[1].constants = {1};
    const std::vector<double> x{1, 2};
    EXPECT_DOUBLE_EQ(forward(net, x)[0], 2.5);
}

TEST(Forward, AgreesWithReferenceImplementation) {
    Gen g(3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto spec = testutil::random_spec(g);
        const auto net = testutil::random_network(g, spec);
        const auto x = testutil::random_vector(g, spec.input_dim, -2.0, 2.0);
        const auto got = forward(net, x);
        const auto want = testutil::reference_forward(net, x);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-12 * (1.0 + std::abs(want[k])));
    }
}

TEST(Forward, EvalModeIsPure) {
    Gen g(4);
    const auto spec = ArchitectureSpec::mlp(5, {8, 8}, 2);
    const auto net = testutil::random_network(g, spec);
    const auto x = testutil::random_vector(g, 5);
    const auto first = forward(net, x);
    for (int k = 0; k < 5; ++k) EXPECT_EQ(forward(net, x), first);
}

TEST(Forward, RejectsWrongInputLength) {
    const auto net = initialize(ArchitectureSpec::mlp(3, {2}, 1), 0);
    const std::vector<double> x{1, 2};
    EXPECT_THROW(forward(net, x), DimensionError);
}

TEST(Forward, ClampKeepsOutputsWithinTwiceBound) {
    Gen g(5);
    for (int trial = 0; trial < 100; ++trial) {
        auto spec = testutil::random_spec(g);
        spec.clamp_bound = testutil::unif(g, 0.05, 1.0);
        auto net = testutil::random_network(g, spec);
        for (auto& layer : net.layers)
            for (double& w : layer.weights) w *= 4.0;
        const auto x = testutil::random_vector(g, spec.input_dim, -3.0, 3.0);
        for (double f : forward(net, x)) {
            EXPECT_LE(f, 2.0 * *spec.clamp_bound);
            EXPECT_GE(f, -2.0 * *spec.clamp_bound);
        }
    }
}

namespace {

/// Scalar objective <v, f(x)> whose gradient backward() returns for dloss_df = v.
double objective(const NetworkState& net, const std::vector<double>& x, const std::vector<double>& v) {
    const auto f = forward(net, x);
    double s = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) s += v[k] * f[k];
    return s;
}

bool away_from_kinks(const NetworkState& net, const std::vector<double>& x, double margin) {
    std::vector<std::vector<double>> pre;
    testutil::reference_forward(net, x, &pre);
    for (std::size_t l = 0; l + 1 < pre.size(); ++l)
        for (double z : pre[l])
            if (std::abs(z) < margin) return false;
    return true;
}

}  // namespace

TEST(Backward, MatchesCentralDifferences) {
    Gen g(2024);
    int checked = 0;
    double worst = 0.0;
    while (checked < 100) {
        const auto spec = testutil::random_spec(g);
        auto net = testutil::random_network(g, spec);
        const auto x = testutil::random_vector(g, spec.input_dim, -2.0, 2.0);
        if (!away_from_kinks(net, x, 1e-3)) continue;
        const auto v = testutil::random_vector(g, spec.output_dim);
        const auto grad = backward(net, x, v);
        ASSERT_TRUE(grad.congruent_with(net));
        const double h = 1e-6;
        testutil::for_each_param(net, [&](std::size_t l, bool is_constant, std::size_t k, double& p) {
            const double saved = p;
            p = saved + h;
            const double up = objective(net, x, v);
            p = saved - h;
            const double down = objective(net, x, v);
            p = saved;
            const double fd = (up - down) / (2.0 * h);
            const double an = is_constant ? grad.layers[l].constants[k] : grad.layers[l].weights[k];
            worst = std::max(worst, testutil::relative_error(an, fd));
        });
        ++checked;
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(Backward, ClampedOutputsPassNoGradient) {
    auto spec = ArchitectureSpec::mlp(1, {1}, 1);
    spec.clamp_bound = 0.5;
    auto net = NetworkState::zeros(spec);
    net.layers[0].weights = {1.0};
    net.layers[1].weights = {10.0};
    const std::vector<double> x{1.0};
    EXPECT_DOUBLE_EQ(forward(net, x)[0], 1.0);
    const std::vector<double> v{1.0};
    const auto grad = backward(net, x, v);
    for (const auto& layer : grad.layers) {
        for (double w : layer.weights) EXPECT_EQ(w, 0.0);
        for (double c : layer.constants) EXPECT_EQ(c, 0.0);
    }
}

TEST(Backward, ReluDerivativeAtZeroIsZero) {
    auto net = NetworkState::zeros(ArchitectureSpec::mlp(1, {1}, 1));
    net.layers[0].weights = {1.0};
    net.layers[1].weights = {1.0};
    const std::vector<double> x{0.0};
    const std::vector<double> v{1.0};
    const auto grad = backward(net, x, v);
    EXPECT_EQ(grad.layers[0].weights[0], 0.0);
    EXPECT_EQ(grad.layers[0].constants[0], 0.0);
    EXPECT_EQ(grad.layers[1].constants[0], 1.0);
}

TEST(Dropout, InvertedDropoutIsUnbiasedAtOneLayer) {
    auto spec = ArchitectureSpec::mlp(3, {10}, 1);
    spec.dropout_rates = {0.3};
    Gen g(8);
    auto net = testutil::random_network(g, spec);
    for (double& b : net.layers[0].constants) b = std::abs(b);
    const std::vector<double> x{0.3, -0.2, 0.9};
    const double eval = forward(net, x)[0];
    Rng rng = make_rng(99);
    const int draws = 20000;
    double s = 0.0, s2 = 0.0;
    for (int k = 0; k < draws; ++k) {
        const double f = forward(net, x, sample_dropout_mask(spec, rng))[0];
        s += f;
        s2 += f * f;
    }
    const double m = s / draws;
    const double se = std::sqrt((s2 / draws - m * m) / draws);
    EXPECT_LT(std::abs(m - eval), 3.0 * se);
    EXPECT_GT(se, 0.0);
}

TEST(Dropout, MaskShapeIsChecked) {
    auto spec = ArchitectureSpec::mlp(2, {3}, 1);
    const auto net = initialize(spec, 1);
    DropoutMask mask;
    mask.scale = {{1.0, 1.0}};
    const std::vector<double> x{1, 1};
    EXPECT_THROW(forward(net, x, mask), DimensionError);
}

TEST(Advise, WidthAndDepthFormula) {
    const auto spec = advise_architecture(10000, 20, 21);
    // Independent arithmetic: 10000^(20/82) * (ln 10000)^2 = 801.97...
    const double expected = std::pow(10.0, 4.0 * 20.0 / 82.0) * std::pow(4.0 * std::log(10.0), 2);
    EXPECT_NEAR(expected, 801.9755, 1e-3);
    ASSERT_EQ(spec.depth(), 10u);
    for (std::size_t w : spec.hidden_widths) EXPECT_EQ(w, 802u);
    for (double r : spec.dropout_rates) EXPECT_EQ(r, 0.0);
    EXPECT_EQ(advise_architecture(std::exp(1.0), 3, 2).depth(), 1u);
    EXPECT_EQ(advise_architecture(std::exp(1.0), 50, 1.5).depth(), 1u);
}

TEST(Advise, WidthIsLinearInConstant) {
    const double n = 5000, beta = 4;
    const std::size_t d = 3;
    const double base = std::pow(n, d / (2.0 * (beta + d))) * std::pow(std::log(n), 2);
    EXPECT_EQ(advise_architecture(n, d, beta, 1.0).hidden_widths[0], static_cast<std::size_t>(std::ceil(base)));
    EXPECT_EQ(advise_architecture(n, d, beta, 2.0).hidden_widths[0], static_cast<std::size_t>(std::ceil(2.0 * base)));
}

TEST(Advise, RejectsBadInputs) {
    EXPECT_THROW(advise_architecture(1, 3, 2), DomainError);
    EXPECT_THROW(advise_architecture(100, 0, 2), DomainError);
    EXPECT_THROW(advise_architecture(100, 3, 0.5), DomainError);
    EXPECT_THROW(advise_architecture(100, 3, 2, 0.0), DomainError);
}

TEST(Serialization, RoundTripIsBitExact) {
    Gen g(21);
    for (int trial = 0; trial < 50; ++trial) {
        auto spec = testutil::random_spec(g);
        for (double& r : spec.dropout_rates) r = testutil::unif(g, 0.0, 0.5);
        if (trial % 2) spec.clamp_bound = testutil::unif(g, 0.1, 5.0);
        auto net = testutil::random_network(g, spec);
        for (auto& layer : net.layers)
            for (double& w : layer.weights) w *= std::pow(10.0, testutil::unif(g, -8, 8));
        std::stringstream s;
        write_network(s, net);
        EXPECT_EQ(read_network(s), net);
    }
}

TEST(Serialization, ModelRoundTrip) {
    TrainedModel m{initialize(ArchitectureSpec::mlp(3, {4}, 3), 2), LossKind::multinomial(3, 1.5), {}};
    m.fit.training_loss = 0.123456789012345678;
    m.fit.validation_loss = 1.0 / 3.0;
    m.fit.epochs_run = 17;
    std::stringstream s;
    write_model(s, m);
    const auto back = read_model(s);
    EXPECT_EQ(back.net, m.net);
    EXPECT_EQ(to_string(back.kind), "multinomial:3");
    EXPECT_EQ(back.kind.bound_M, 1.5);
    EXPECT_EQ(back.fit.training_loss, m.fit.training_loss);
    EXPECT_EQ(back.fit.validation_loss, m.fit.validation_loss);
    EXPECT_EQ(back.fit.epochs_run, 17u);
}

TEST(Serialization, RejectsCorruptFiles) {
    const auto net = initialize(ArchitectureSpec::mlp(2, {2}, 1), 1);
    std::stringstream s;
    write_network(s, net);
    std::string text = s.str();

    std::istringstream wrong_magic("nonsense 1 input_dim=2\n");
    EXPECT_THROW(read_network(wrong_magic), DataError);

    std::istringstream truncated(text.substr(0, text.size() / 2));
    EXPECT_THROW(read_network(truncated), DataError);

    auto v2 = text;
    v2.replace(v2.find(" 1 "), 3, " 2 ");
    std::istringstream future(v2);
    EXPECT_THROW(read_network(future), DataError);
}
