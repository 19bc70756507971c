#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dnnci/errors.hpp"
#include "dnnci/rng.hpp"

namespace dnnci {

/**
 * Shape of a fully connected ReLU network (multi-layer perceptron).
 *
 * `hidden_widths[l]` is the number of units in hidden layer l + 1; the network
 * depth is `hidden_widths.size()`. The output layer is affine with
 * `output_dim` heads and no activation.
 */
struct ArchitectureSpec {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden_widths;
    std::size_t output_dim = 1;
    std::vector<double> dropout_rates;  ///< one per hidden layer, in [0, 1)
    std::optional<double> clamp_bound;  ///< M; outputs are truncated to [-2M, 2M]

    /// Plain MLP without dropout or clamping.
    static ArchitectureSpec mlp(std::size_t input_dim, std::vector<std::size_t> widths,
                                std::size_t output_dim = 1) {
        ArchitectureSpec s;
        s.input_dim = input_dim;
        s.dropout_rates.assign(widths.size(), 0.0);
        s.hidden_widths = std::move(widths);
        s.output_dim = output_dim;
        return s;
    }

    std::size_t depth() const noexcept { return hidden_widths.size(); }

    /// Fan-in of layer l, where l = depth() is the output layer.
    std::size_t fan_in(std::size_t l) const { return l == 0 ? input_dim : hidden_widths[l - 1]; }
    std::size_t fan_out(std::size_t l) const {
        return l == depth() ? output_dim : hidden_widths[l];
    }

    bool has_dropout() const noexcept {
        return std::any_of(dropout_rates.begin(), dropout_rates.end(),
                           [](double r) { return r > 0.0; });
    }

    void validate() const {
        detail::require(input_dim >= 1, "input_dim must be at least 1");
        detail::require(output_dim >= 1, "output_dim must be at least 1");
        detail::require(dropout_rates.size() == hidden_widths.size(),
                        "one dropout rate is required per hidden layer");
        for (std::size_t w : hidden_widths) detail::require(w >= 1, "hidden widths must be positive");
        for (double r : dropout_rates)
            detail::require<DomainError>(r >= 0.0 && r < 1.0, "dropout rates must lie in [0, 1)");
        if (clamp_bound)
            detail::require<DomainError>(*clamp_bound > 0.0 && std::isfinite(*clamp_bound),
                                         "clamp bound must be a positive real");
    }

    friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

/// Total number of trainable scalars: sum over layers of (fan_in + 1) * fan_out.
inline std::size_t param_count(const ArchitectureSpec& spec) {
    spec.validate();
    std::size_t total = 0;
    for (std::size_t l = 0; l <= spec.depth(); ++l) total += (spec.fan_in(l) + 1) * spec.fan_out(l);
    return total;
}

/// Affine map R^cols -> R^rows stored row-major.
struct AffineLayer {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> weights;    ///< rows * cols, row-major
    std::vector<double> constants;  ///< rows

    AffineLayer() = default;
    AffineLayer(std::size_t r, std::size_t c) : rows(r), cols(c), weights(r * c, 0.0), constants(r, 0.0) {}

    double& weight(std::size_t r, std::size_t c) { return weights[r * cols + c]; }
    double weight(std::size_t r, std::size_t c) const { return weights[r * cols + c]; }
    std::size_t size() const noexcept { return weights.size() + constants.size(); }

    friend bool operator==(const AffineLayer&, const AffineLayer&) = default;
};

/// Architecture plus all weights and constant terms.
struct NetworkState {
    ArchitectureSpec spec;
    std::vector<AffineLayer> layers;  ///< depth() hidden layers followed by the output layer

    /// All-zero parameters of the right shapes.
    static NetworkState zeros(const ArchitectureSpec& spec) {
        spec.validate();
        NetworkState net;
        net.spec = spec;
        for (std::size_t l = 0; l <= spec.depth(); ++l) net.layers.emplace_back(spec.fan_out(l), spec.fan_in(l));
        return net;
    }

    std::size_t stored_parameters() const noexcept {
        std::size_t n = 0;
        for (const auto& layer : layers) n += layer.size();
        return n;
    }

    AffineLayer& output_layer() { return layers.back(); }
    const AffineLayer& output_layer() const { return layers.back(); }

    friend bool operator==(const NetworkState&, const NetworkState&) = default;
};

/// Derivatives of a scalar loss with respect to every parameter of a network.
struct GradientState {
    std::vector<AffineLayer> layers;

    static GradientState zeros_like(const NetworkState& net) {
        GradientState g;
        g.layers.reserve(net.layers.size());
        for (const auto& l : net.layers) g.layers.emplace_back(l.rows, l.cols);
        return g;
    }

    void set_zero() {
        for (auto& l : layers) {
            std::fill(l.weights.begin(), l.weights.end(), 0.0);
            std::fill(l.constants.begin(), l.constants.end(), 0.0);
        }
    }

    bool congruent_with(const NetworkState& net) const {
        if (layers.size() != net.layers.size()) return false;
        for (std::size_t l = 0; l < layers.size(); ++l)
            if (layers[l].rows != net.layers[l].rows || layers[l].cols != net.layers[l].cols) return false;
        return true;
    }
};

/**
 * He initialization: weights ~ N(0, 2 / fan_in), constant terms zero.
 * Deterministic in (spec, seed).
 */
inline NetworkState initialize(const ArchitectureSpec& spec, std::uint64_t seed) {
    NetworkState net = NetworkState::zeros(spec);
    Rng rng = make_rng(seed);
    for (auto& layer : net.layers) {
        std::normal_distribution<double> draw(0.0, std::sqrt(2.0 / static_cast<double>(layer.cols)));
        for (double& w : layer.weights) w = draw(rng);
    }
    return net;
}

/// Inverted-dropout multipliers per hidden layer: 0 for dropped units and
/// 1 / (1 - rate) for kept ones. An empty mask means evaluation mode.
struct DropoutMask {
    std::vector<std::vector<double>> scale;

    bool empty() const noexcept { return scale.empty(); }
};

inline DropoutMask sample_dropout_mask(const ArchitectureSpec& spec, Rng& rng) {
    DropoutMask mask;
    mask.scale.resize(spec.depth());
    for (std::size_t l = 0; l < spec.depth(); ++l) {
        const double rate = spec.dropout_rates[l];
        auto& s = mask.scale[l];
        s.assign(spec.hidden_widths[l], 1.0);
        if (rate <= 0.0) continue;
        const double keep = 1.0 / (1.0 - rate);
        for (double& v : s) v = uniform01(rng) < rate ? 0.0 : keep;
    }
    return mask;
}

inline DropoutMask sample_dropout_mask(const ArchitectureSpec& spec, std::uint64_t dropout_seed) {
    Rng rng = make_rng(dropout_seed);
    return sample_dropout_mask(spec, rng);
}

/// Intermediate values of one forward pass, kept for back-propagation.
struct ForwardTrace {
    std::vector<std::vector<double>> pre;     ///< pre-activations of every layer
    std::vector<std::vector<double>> inputs;  ///< input to every layer; inputs[0] = x
    std::vector<double> output;               ///< after optional clamping
    std::vector<std::uint8_t> clamped;        ///< 1 where the output hit the clamp

    void shape_for(const ArchitectureSpec& spec) {
        const std::size_t n = spec.depth() + 1;
        pre.resize(n);
        inputs.resize(n);
        for (std::size_t l = 0; l < n; ++l) {
            pre[l].resize(spec.fan_out(l));
            inputs[l].resize(spec.fan_in(l));
        }
        output.resize(spec.output_dim);
        clamped.resize(spec.output_dim);
    }
};

namespace detail {

inline void affine(const AffineLayer& layer, std::span<const double> in, std::span<double> out) {
    const double* w = layer.weights.data();
    for (std::size_t r = 0; r < layer.rows; ++r, w += layer.cols) {
        double acc = layer.constants[r];
        for (std::size_t c = 0; c < layer.cols; ++c) acc += w[c] * in[c];
        out[r] = acc;
    }
}

inline void check_mask(const NetworkState& net, const DropoutMask* mask) {
    if (mask == nullptr || mask->empty()) return;
    require(mask->scale.size() == net.spec.depth(), "dropout mask depth does not match the network");
    for (std::size_t l = 0; l < net.spec.depth(); ++l)
        require(mask->scale[l].size() == net.spec.hidden_widths[l], "dropout mask width does not match the network");
}

}  // namespace detail

/**
 * Forward pass recording every intermediate value into `trace`. A null or
 * empty mask evaluates the network deterministically without dropout.
 */
inline void forward_trace(const NetworkState& net, std::span<const double> x, const DropoutMask* mask,
                          ForwardTrace& trace) {
    const auto& spec = net.spec;
    detail::require(x.size() == spec.input_dim, "input has length " + std::to_string(x.size()) +
                                                    ", network expects " + std::to_string(spec.input_dim));
    const bool train = mask != nullptr && !mask->empty();
    trace.shape_for(spec);
    std::copy(x.begin(), x.end(), trace.inputs[0].begin());
    for (std::size_t l = 0; l < spec.depth(); ++l) {
        detail::affine(net.layers[l], trace.inputs[l], trace.pre[l]);
        auto& next = trace.inputs[l + 1];
        for (std::size_t h = 0; h < next.size(); ++h) {
            const double a = trace.pre[l][h] > 0.0 ? trace.pre[l][h] : 0.0;
            next[h] = train ? a * mask->scale[l][h] : a;
        }
    }
    const std::size_t last = spec.depth();
    detail::affine(net.layers[last], trace.inputs[last], trace.pre[last]);
    for (std::size_t k = 0; k < spec.output_dim; ++k) {
        double f = trace.pre[last][k];
        trace.clamped[k] = 0;
        if (spec.clamp_bound) {
            const double bound = 2.0 * *spec.clamp_bound;
            if (f > bound || f < -bound) {
                f = std::clamp(f, -bound, bound);
                trace.clamped[k] = 1;
            }
        }
        trace.output[k] = f;
    }
}

/// Evaluation-mode forward pass.
inline std::vector<double> forward(const NetworkState& net, std::span<const double> x) {
    ForwardTrace trace;
    forward_trace(net, x, nullptr, trace);
    return std::move(trace.output);
}

/// Training-mode forward pass with an explicit dropout mask.
inline std::vector<double> forward(const NetworkState& net, std::span<const double> x, const DropoutMask& mask) {
    detail::check_mask(net, &mask);
    ForwardTrace trace;
    forward_trace(net, x, &mask, trace);
    return std::move(trace.output);
}

/// Training-mode forward pass drawing the dropout mask from `dropout_seed`.
inline std::vector<double> forward(const NetworkState& net, std::span<const double> x,
                                   std::uint64_t dropout_seed) {
    return forward(net, x, sample_dropout_mask(net.spec, dropout_seed));
}

/**
 * Adds the chain-rule gradient of one observation's loss to `grad`.
 *
 * `dloss_df` is the derivative of the loss with respect to each network
 * output. ReLU units with pre-activation exactly 0 pass no gradient, and a
 * clamped output passes none either. `delta` and `scratch` are reusable
 * work buffers.
 */
inline void accumulate_backward(const NetworkState& net, const ForwardTrace& trace, std::span<const double> dloss_df,
                                const DropoutMask* mask, GradientState& grad, std::vector<double>& delta,
                                std::vector<double>& scratch) {
    const auto& spec = net.spec;
    detail::require(dloss_df.size() == spec.output_dim, "loss derivative has wrong length");
    const bool train = mask != nullptr && !mask->empty();

    delta.assign(dloss_df.begin(), dloss_df.end());
    for (std::size_t k = 0; k < delta.size(); ++k)
        if (trace.clamped[k]) delta[k] = 0.0;

    for (std::size_t l = spec.depth() + 1; l-- > 0;) {
        const AffineLayer& layer = net.layers[l];
        AffineLayer& g = grad.layers[l];
        const auto& in = trace.inputs[l];
        double* gw = g.weights.data();
        for (std::size_t r = 0; r < layer.rows; ++r, gw += layer.cols) {
            const double d = delta[r];
            g.constants[r] += d;
            if (d == 0.0) continue;
            for (std::size_t c = 0; c < layer.cols; ++c) gw[c] += d * in[c];
        }
        if (l == 0) break;

        // delta for the hidden layer feeding this one
        scratch.assign(layer.cols, 0.0);
        const double* w = layer.weights.data();
        for (std::size_t r = 0; r < layer.rows; ++r, w += layer.cols) {
            const double d = delta[r];
            if (d == 0.0) continue;
            for (std::size_t c = 0; c < layer.cols; ++c) scratch[c] += d * w[c];
        }
        const auto& pre = trace.pre[l - 1];
        for (std::size_t h = 0; h < scratch.size(); ++h) {
            double v = pre[h] > 0.0 ? scratch[h] : 0.0;
            if (train) v *= mask->scale[l - 1][h];
            scratch[h] = v;
        }
        delta.swap(scratch);
    }
}

/// Gradient of one observation's loss given d(loss)/d(outputs).
inline GradientState backward(const NetworkState& net, std::span<const double> x, std::span<const double> dloss_df,
                              const DropoutMask* mask = nullptr) {
    detail::check_mask(net, mask);
    ForwardTrace trace;
    forward_trace(net, x, mask, trace);
    GradientState grad = GradientState::zeros_like(net);
    std::vector<double> delta, scratch;
    accumulate_backward(net, trace, dloss_df, mask, grad, delta, scratch);
    return grad;
}

/**
 * Width/depth rule for a given sample size: H = ceil(c_width * n^{d/(2(beta+d))} * (ln n)^2)
 * units in each of L = max(1, ceil(c_depth * ln n)) hidden layers.
 */
inline ArchitectureSpec advise_architecture(double n, std::size_t d, double beta, double c_width = 1.0,
                                            double c_depth = 1.0) {
    detail::require<DomainError>(n >= 2.0, "sample size must be at least 2");
    detail::require<DomainError>(d >= 1, "input dimension must be at least 1");
    detail::require<DomainError>(beta >= 1.0, "smoothness must be at least 1");
    detail::require<DomainError>(c_width > 0.0 && c_depth > 0.0, "proportionality constants must be positive");
    const double log_n = std::log(n);
    const double dd = static_cast<double>(d);
    const double width = c_width * std::pow(n, dd / (2.0 * (beta + dd))) * log_n * log_n;
    const double depth = std::max(1.0, std::ceil(c_depth * log_n));
    return ArchitectureSpec::mlp(d, std::vector<std::size_t>(static_cast<std::size_t>(depth),
                                                             static_cast<std::size_t>(std::ceil(width))));
}

}  // namespace dnnci
