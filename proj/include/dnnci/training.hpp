#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dnnci/errors.hpp"
#include "dnnci/losses.hpp"
#include "dnnci/matrix.hpp"
#include "dnnci/network.hpp"
#include "dnnci/rng.hpp"
#include "dnnci/stats.hpp"

namespace dnnci {

enum class OptimizerKind { PlainSgd, AdaptiveMoment };

struct TrainConfig {
    double learning_rate = 3e-4;
    std::size_t batch_size = 256;
    std::size_t epochs = 100;
    OptimizerKind optimizer = OptimizerKind::AdaptiveMoment;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double validation_fraction = 0.2;
    std::uint64_t seed = 0;
    bool shuffle = true;

    void validate() const {
        detail::require<ConfigError>(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be positive");
        detail::require<ConfigError>(batch_size >= 1, "batch_size must be positive");
        detail::require<ConfigError>(epochs >= 1, "epochs must be positive");
        detail::require<ConfigError>(validation_fraction >= 0.0 && validation_fraction < 1.0,
                                     "validation_fraction must lie in [0, 1)");
        detail::require<ConfigError>(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0,
                                     "invalid adaptive-moment constants");
    }

    /// Seeds of the independent random streams a fit consumes.
    std::uint64_t init_seed() const noexcept { return stream_seed(seed, 0); }
    std::uint64_t split_seed() const noexcept { return stream_seed(seed, 1); }
    std::uint64_t order_seed() const noexcept { return stream_seed(seed, 2); }
    std::uint64_t dropout_seed() const noexcept { return stream_seed(seed, 3); }
};

struct FitReport {
    double training_loss = 0.0;
    double validation_loss = 0.0;
    std::size_t epochs_run = 0;
    std::size_t training_rows = 0;
    std::size_t validation_rows = 0;
};

/// A fitted network together with the loss it minimizes.
struct TrainedModel {
    NetworkState net;
    LossKind kind;
    FitReport fit;

    /// Raw network outputs f(x).
    std::vector<double> predict(std::span<const double> x) const { return forward(net, x); }

    /// First network output f(x).
    double predict_scalar(std::span<const double> x) const { return forward(net, x)[0]; }

    /// Conditional-mean scale prediction for single-output losses.
    double mean(std::span<const double> x) const { return mean_from_f(kind, forward(net, x)[0]); }
};

namespace detail {

/// Index split: seeded shuffle, last ceil(fraction * n) rows form the validation set.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

inline Split split_rows(std::size_t n, const TrainConfig& cfg) {
    Split s;
    s.train.resize(n);
    std::iota(s.train.begin(), s.train.end(), std::size_t{0});
    if (cfg.validation_fraction <= 0.0) return s;
    Rng rng = make_rng(cfg.split_seed());
    std::shuffle(s.train.begin(), s.train.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::ceil(cfg.validation_fraction * static_cast<double>(n)));
    s.validation.assign(s.train.end() - static_cast<std::ptrdiff_t>(n_val), s.train.end());
    s.train.resize(n - n_val);
    return s;
}

/// Per-observation objective: fills dloss_df and returns the loss, given the network output.
template <class F>
concept ObservationLoss = requires(F f, std::size_t i, std::span<const double> out, std::span<double> grad) {
    { f(i, out, grad) } -> std::convertible_to<double>;
};

class AdaptiveMoment {
public:
    AdaptiveMoment(const NetworkState& net, const TrainConfig& cfg)
        : m_(GradientState::zeros_like(net)), v_(GradientState::zeros_like(net)), cfg_(cfg) {}

    void step(NetworkState& net, const GradientState& grad) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            update(net.layers[l].weights, grad.layers[l].weights, m_.layers[l].weights, v_.layers[l].weights, c1, c2);
            update(net.layers[l].constants, grad.layers[l].constants, m_.layers[l].constants, v_.layers[l].constants,
                   c1, c2);
        }
    }

private:
    void update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m, std::vector<double>& v,
                double c1, double c2) const {
        const double b1 = cfg_.beta1, b2 = cfg_.beta2, lr = cfg_.learning_rate, eps = cfg_.epsilon;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }

    GradientState m_, v_;
    TrainConfig cfg_;
    std::uint64_t t_ = 0;
};

inline void sgd_step(NetworkState& net, const GradientState& grad, double lr) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& p = net.layers[l];
        const auto& g = grad.layers[l];
        for (std::size_t i = 0; i < p.weights.size(); ++i) p.weights[i] -= lr * g.weights[i];
        for (std::size_t i = 0; i < p.constants.size(); ++i) p.constants[i] -= lr * g.constants[i];
    }
}

/// Mean evaluation-mode loss over `rows`.
template <ObservationLoss Obj>
double mean_loss(const NetworkState& net, const Matrix& X, std::span<const std::size_t> rows, Obj& objective) {
    ForwardTrace trace;
    std::vector<double> grad(net.spec.output_dim);
    CompensatedSum total;
    for (std::size_t i : rows) {
        forward_trace(net, X.row(i), nullptr, trace);
        total += objective(i, trace.output, grad);
    }
    return rows.empty() ? 0.0 : total.value() / static_cast<double>(rows.size());
}

/**
 * Minibatch empirical risk minimization of the mean per-observation loss.
 * Single-threaded; the trajectory depends only on the inputs and cfg.seed.
 */
template <ObservationLoss Obj>
FitReport minimize(NetworkState& net, const Matrix& X, Obj objective, const TrainConfig& cfg) {
    const Split split = split_rows(X.rows(), cfg);
    require<DataError>(!split.train.empty() && cfg.batch_size <= split.train.size(),
                       "batch_size " + std::to_string(cfg.batch_size) + " exceeds the " +
                           std::to_string(split.train.size()) + " training rows");

    const bool dropout = net.spec.has_dropout();
    Rng order_rng = make_rng(cfg.order_seed());
    Rng dropout_rng = make_rng(cfg.dropout_seed());
    std::vector<std::size_t> order = split.train;

    GradientState grad = GradientState::zeros_like(net);
    AdaptiveMoment adam(net, cfg);
    ForwardTrace trace;
    DropoutMask mask;
    std::vector<double> dloss(net.spec.output_dim), delta, scratch;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) std::shuffle(order.begin(), order.end(), order_rng);
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            grad.set_zero();
            double batch_loss = 0.0;
            for (std::size_t j = start; j < stop; ++j) {
                const std::size_t i = order[j];
                if (dropout) mask = sample_dropout_mask(net.spec, dropout_rng);
                const DropoutMask* m = dropout ? &mask : nullptr;
                forward_trace(net, X.row(i), m, trace);
                batch_loss += objective(i, trace.output, dloss);
                accumulate_backward(net, trace, dloss, m, grad, delta, scratch);
            }
            if (!std::isfinite(batch_loss))
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index));
            const double scale = 1.0 / static_cast<double>(stop - start);
            for (auto& layer : grad.layers) {
                for (double& g : layer.weights) g *= scale;
                for (double& g : layer.constants) g *= scale;
            }
            if (cfg.optimizer == OptimizerKind::AdaptiveMoment)
                adam.step(net, grad);
            else
                sgd_step(net, grad, cfg.learning_rate);
        }
    }

    FitReport report;
    report.epochs_run = cfg.epochs;
    report.training_rows = split.train.size();
    report.validation_rows = split.validation.size();
    report.training_loss = mean_loss(net, X, split.train, objective);
    report.validation_loss =
        split.validation.empty() ? report.training_loss : mean_loss(net, X, split.validation, objective);
    if (!std::isfinite(report.training_loss) || !std::isfinite(report.validation_loss))
        throw NumericError("non-finite loss after training");
    return report;
}

inline void require_binary(std::span<const double> t) {
    for (std::size_t i = 0; i < t.size(); ++i)
        require<DataError>(t[i] == 0.0 || t[i] == 1.0,
                           "treatment must be 0 or 1 (row " + std::to_string(i) + " has " + std::to_string(t[i]) + ")");
}

}  // namespace detail

/**
 * Fits a network to (X, y) under `kind` by minibatch ERM.
 *
 * For multinomial losses `y` holds class labels 0..K with 0 the baseline class.
 * Other losses take one outcome per row.
 */
inline TrainedModel fit(const Matrix& X, std::span<const double> y, const ArchitectureSpec& spec, const LossKind& kind,
                        const TrainConfig& cfg) {
    cfg.validate();
    spec.validate();
    detail::require(X.rows() == y.size(), "X has " + std::to_string(X.rows()) + " rows but y has " +
                                              std::to_string(y.size()) + " entries");
    detail::require(X.cols() == spec.input_dim, "X has " + std::to_string(X.cols()) + " columns, network expects " +
                                                    std::to_string(spec.input_dim));
    detail::require(spec.output_dim == kind.output_dim(), "network output_dim does not match the loss");

    const std::size_t K = kind.output_dim();
    std::vector<double> targets(y.size() * K, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (kind.tag == LossKind::Tag::Multinomial) {
            const double label = y[i];
            detail::require<DataError>(label >= 0.0 && label <= static_cast<double>(K) && std::floor(label) == label,
                                       "multinomial labels must be integers in [0, K]");
            if (label > 0.0) targets[i * K + static_cast<std::size_t>(label) - 1] = 1.0;
        } else {
            targets[i] = y[i];
        }
        validate_outcome(kind, std::span<const double>(targets.data() + i * K, K));
    }

    TrainedModel model{initialize(spec, cfg.init_seed()), kind, {}};
    auto objective = [&](std::size_t i, std::span<const double> f, std::span<double> g) {
        std::span<const double> yi(targets.data() + i * K, K);
        loss_grad_into(kind, f, yi, g);
        return loss_value(kind, f, yi);
    };
    model.fit = detail::minimize(model.net, X, objective, cfg);
    return model;
}

/// Outcome regressions mu_0(x), mu_1(x), either one two-head network or one network per arm.
class OutcomeRegression {
public:
    static OutcomeRegression joint(TrainedModel model) {
        detail::require(model.net.spec.output_dim == 2, "joint outcome model needs two output heads");
        OutcomeRegression r;
        r.models_.push_back(std::move(model));
        return r;
    }
    static OutcomeRegression per_arm(TrainedModel arm0, TrainedModel arm1) {
        OutcomeRegression r;
        r.models_.push_back(std::move(arm0));
        r.models_.push_back(std::move(arm1));
        return r;
    }

    bool is_joint() const noexcept { return models_.size() == 1; }
    const std::vector<TrainedModel>& models() const noexcept { return models_; }

    double mu0(std::span<const double> x) const {
        return is_joint() ? models_[0].predict(x)[0] : models_[0].predict_scalar(x);
    }
    double mu1(std::span<const double> x) const {
        if (is_joint()) {
            const auto f = models_[0].predict(x);
            return f[0] + f[1];
        }
        return models_[1].predict_scalar(x);
    }
    double mu(int t, std::span<const double> x) const { return t == 1 ? mu1(x) : mu0(x); }
    double tau(std::span<const double> x) const {
        if (is_joint()) return models_[0].predict(x)[1];
        return mu1(x) - mu0(x);
    }

private:
    std::vector<TrainedModel> models_;
};

/**
 * One network with heads (mu_0, tau) minimizing sum 1/2 (y - mu_0(x) - tau(x) t)^2.
 */
inline OutcomeRegression fit_joint(const Matrix& X, std::span<const double> y, std::span<const double> t,
                                   const ArchitectureSpec& spec, const TrainConfig& cfg) {
    cfg.validate();
    spec.validate();
    detail::require(spec.output_dim == 2, "joint estimation needs output_dim = 2");
    detail::require(X.rows() == y.size() && y.size() == t.size(), "X, y and t must have the same number of rows");
    detail::require(X.cols() == spec.input_dim, "X columns do not match the network input_dim");
    detail::require_binary(t);

    TrainedModel model{initialize(spec, cfg.init_seed()), LossKind::least_squares(), {}};
    auto objective = [&](std::size_t i, std::span<const double> f, std::span<double> g) {
        const double r = f[0] + f[1] * t[i] - y[i];
        g[0] = r;
        g[1] = r * t[i];
        return 0.5 * r * r;
    };
    model.fit = detail::minimize(model.net, X, objective, cfg);
    return OutcomeRegression::joint(std::move(model));
}

/// Separate least-squares fits on the t = 0 and t = 1 subsamples.
inline OutcomeRegression fit_regressions_by_arm(const Matrix& X, std::span<const double> y, std::span<const double> t,
                                                const ArchitectureSpec& spec, const TrainConfig& cfg) {
    detail::require(X.rows() == y.size() && y.size() == t.size(), "X, y and t must have the same number of rows");
    detail::require_binary(t);
    std::vector<TrainedModel> arms;
    for (int arm = 0; arm <= 1; ++arm) {
        std::vector<std::size_t> rows;
        std::vector<double> ys;
        for (std::size_t i = 0; i < t.size(); ++i)
            if (t[i] == static_cast<double>(arm)) {
                rows.push_back(i);
                ys.push_back(y[i]);
            }
        detail::require<DataError>(!rows.empty(), "treatment arm " + std::to_string(arm) + " is empty");
        arms.push_back(fit(X.select_rows(rows), ys, spec, LossKind::least_squares(), cfg));
    }
    return OutcomeRegression::per_arm(std::move(arms[0]), std::move(arms[1]));
}

/// Logistic-loss network for P[T = 1 | X = x].
struct PropensityModel {
    TrainedModel model;

    double p(std::span<const double> x) const { return model.mean(x); }
};

inline PropensityModel fit_propensity(const Matrix& X, std::span<const double> t, const ArchitectureSpec& spec,
                                      const TrainConfig& cfg) {
    detail::require_binary(t);
    const auto treated = std::count(t.begin(), t.end(), 1.0);
    detail::require<DataError>(treated > 0 && static_cast<std::size_t>(treated) < t.size(),
                               "propensity model needs both treated and untreated rows");
    return {fit(X, t, spec, LossKind::logistic(), cfg)};
}

}  // namespace dnnci
