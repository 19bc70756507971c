#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dnnci/errors.hpp"

namespace dnnci {

/**
 * Member of the generalized-linear loss family
 *
 *     l(f, y) = -<y, f> + g(f)
 *
 * LeastSquares uses 1/2 (y - f)^2. Gamma is parametrized by f = -1 / E[y|x] and is only
 * defined for f < 0. Multinomial(K) has K logits against an implicit baseline class 0.
 */
struct LossKind {
    enum class Tag { LeastSquares, Logistic, Poisson, Gamma, Multinomial };

    Tag tag = Tag::LeastSquares;
    std::size_t classes = 1;  ///< K for multinomial (number of non-baseline classes)
    double bound_M = 1.0;     ///< envelope M on |f| and the outcome

    static LossKind least_squares(double M = 1.0) { return {Tag::LeastSquares, 1, M}; }
    static LossKind logistic(double M = 1.0) { return {Tag::Logistic, 1, M}; }
    static LossKind poisson(double M = 1.0) { return {Tag::Poisson, 1, M}; }
    static LossKind gamma(double M = 1.0) { return {Tag::Gamma, 1, M}; }
    static LossKind multinomial(std::size_t K, double M = 1.0) {
        detail::require<DomainError>(K >= 2, "multinomial loss needs K >= 2");
        return {Tag::Multinomial, K, M};
    }

    /// Number of network outputs the loss consumes.
    std::size_t output_dim() const noexcept { return tag == Tag::Multinomial ? classes : 1; }

    friend bool operator==(const LossKind&, const LossKind&) = default;
};

/// Lowercase config tag: leastsquares | logistic | poisson | gamma | multinomial:K
inline std::string to_string(const LossKind& kind) {
    switch (kind.tag) {
        case LossKind::Tag::LeastSquares: return "leastsquares";
        case LossKind::Tag::Logistic: return "logistic";
        case LossKind::Tag::Poisson: return "poisson";
        case LossKind::Tag::Gamma: return "gamma";
        case LossKind::Tag::Multinomial: return "multinomial:" + std::to_string(kind.classes);
    }
    return "unknown";
}

inline LossKind parse_loss_kind(const std::string& text, double M = 1.0) {
    if (text == "leastsquares") return LossKind::least_squares(M);
    if (text == "logistic") return LossKind::logistic(M);
    if (text == "poisson") return LossKind::poisson(M);
    if (text == "gamma") return LossKind::gamma(M);
    const std::string prefix = "multinomial:";
    if (text.rfind(prefix, 0) == 0) {
        std::size_t pos = 0;
        long long K = 0;
        try {
            K = std::stoll(text.substr(prefix.size()), &pos);
        } catch (const std::exception&) {
            throw ConfigError("bad multinomial class count in '" + text + "'");
        }
        if (pos != text.size() - prefix.size() || K < 2) throw ConfigError("bad multinomial class count in '" + text + "'");
        return LossKind::multinomial(static_cast<std::size_t>(K), M);
    }
    throw ConfigError("unknown loss kind '" + text + "'");
}

/// Constants of the Lipschitz and curvature conditions satisfied by a loss.
struct CurvatureConstants {
    double c1 = 0.0;
    double c2 = 0.0;
    double C_ell = 0.0;
};

namespace detail {

/// log(1 + e^f) without overflow.
inline double softplus(double f) { return f > 0.0 ? f + std::log1p(std::exp(-f)) : std::log1p(std::exp(f)); }

inline double sigmoid(double f) {
    if (f >= 0.0) return 1.0 / (1.0 + std::exp(-f));
    const double e = std::exp(f);
    return e / (1.0 + e);
}

/// log(1 + sum_k e^{f_k}), shifted by max(0, max f).
inline double log1p_sum_exp(std::span<const double> f) {
    double m = 0.0;
    for (double v : f) m = std::max(m, v);
    double s = std::exp(-m);
    for (double v : f) s += std::exp(v - m);
    return m + std::log(s);
}

inline void check_shapes(const LossKind& kind, std::span<const double> f, std::span<const double> y) {
    require(f.size() == kind.output_dim(), "loss expects " + std::to_string(kind.output_dim()) + " network outputs");
    require(y.size() == kind.output_dim(), "outcome has wrong length for " + to_string(kind));
}

inline void check_gamma(std::span<const double> f) {
    require<DomainError>(f[0] < 0.0, "gamma loss is defined only for f < 0");
}

}  // namespace detail

/// Validates one outcome value at ingestion. Multinomial outcomes are one-hot of length K
/// (all zeros for the baseline class).
inline void validate_outcome(const LossKind& kind, std::span<const double> y) {
    detail::require(y.size() == kind.output_dim(), "outcome has wrong length for " + to_string(kind));
    using T = LossKind::Tag;
    const double v = y[0];
    switch (kind.tag) {
        case T::LeastSquares:
            detail::require<DataError>(std::isfinite(v), "least-squares outcome must be finite");
            break;
        case T::Logistic:
            detail::require<DataError>(v == 0.0 || v == 1.0, "logistic outcome must be 0 or 1");
            break;
        case T::Poisson:
            detail::require<DataError>(v >= 0.0 && std::floor(v) == v, "poisson outcome must be a non-negative integer");
            break;
        case T::Gamma:
            detail::require<DataError>(v > 0.0 && std::isfinite(v), "gamma outcome must be positive");
            break;
        case T::Multinomial: {
            double total = 0.0;
            for (double e : y) {
                detail::require<DataError>(e == 0.0 || e == 1.0, "multinomial outcome must be one-hot");
                total += e;
            }
            detail::require<DataError>(total <= 1.0, "multinomial outcome must be one-hot");
            break;
        }
    }
}

inline double loss_value(const LossKind& kind, std::span<const double> f, std::span<const double> y) {
    detail::check_shapes(kind, f, y);
#ifndef NDEBUG
    validate_outcome(kind, y);
#endif
    using T = LossKind::Tag;
    switch (kind.tag) {
        case T::LeastSquares: {
            const double r = y[0] - f[0];
            return 0.5 * r * r;
        }
        case T::Logistic: return -y[0] * f[0] + detail::softplus(f[0]);
        case T::Poisson: return -y[0] * f[0] + std::exp(f[0]);
        case T::Gamma:
            detail::check_gamma(f);
            return -y[0] * f[0] - std::log(-f[0]);
        case T::Multinomial: {
            double dot = 0.0;
            for (std::size_t k = 0; k < f.size(); ++k) dot += y[k] * f[k];
            return -dot + detail::log1p_sum_exp(f);
        }
    }
    return 0.0;
}

inline double loss_value(const LossKind& kind, double f, double y) {
    return loss_value(kind, std::span<const double>(&f, 1), std::span<const double>(&y, 1));
}

/// Conditional-mean scale value(s) implied by f (the inverse link, i.e. grad g).
inline void mean_from_f_into(const LossKind& kind, std::span<const double> f, std::span<double> out) {
    detail::require(f.size() == kind.output_dim() && out.size() == f.size(), "mean_from_f: wrong length");
    using T = LossKind::Tag;
    switch (kind.tag) {
        case T::LeastSquares: out[0] = f[0]; break;
        case T::Logistic: out[0] = detail::sigmoid(f[0]); break;
        case T::Poisson: out[0] = std::exp(f[0]); break;
        case T::Gamma:
            detail::check_gamma(f);
            out[0] = -1.0 / f[0];
            break;
        case T::Multinomial: {
            const double lse = detail::log1p_sum_exp(f);
            for (std::size_t k = 0; k < f.size(); ++k) out[k] = std::exp(f[k] - lse);
            break;
        }
    }
}

inline std::vector<double> mean_from_f(const LossKind& kind, std::span<const double> f) {
    std::vector<double> out(f.size());
    mean_from_f_into(kind, f, out);
    return out;
}

inline double mean_from_f(const LossKind& kind, double f) {
    double out = 0.0;
    mean_from_f_into(kind, std::span<const double>(&f, 1), std::span<double>(&out, 1));
    return out;
}

/// d loss / d f, written into `out`. Equals mean_from_f(f) - y for every member of the family.
inline void loss_grad_into(const LossKind& kind, std::span<const double> f, std::span<const double> y,
                           std::span<double> out) {
    detail::check_shapes(kind, f, y);
    mean_from_f_into(kind, f, out);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] -= y[k];
}

inline std::vector<double> loss_grad(const LossKind& kind, std::span<const double> f, std::span<const double> y) {
    std::vector<double> out(f.size());
    loss_grad_into(kind, f, y, out);
    return out;
}

inline double loss_grad(const LossKind& kind, double f, double y) {
    double out = 0.0;
    loss_grad_into(kind, std::span<const double>(&f, 1), std::span<const double>(&y, 1), std::span<double>(&out, 1));
    return out;
}

/**
 * Lipschitz constant C_ell and curvature sandwich (c1, c2) for envelope M.
 *
 * Least squares: c1 = c2 = 1/2, C_ell = M. Logistic: c1 = 1 / (2(e^M + e^-M + 2)), c2 = 1/8,
 * C_ell = 1. Poisson: c1 = e^-M / 2, c2 = e^M / 2, C_ell = e^M + M. Gamma (f in [-M, -1/M], so
 * M >= 1): c1 = 1 / (2M^2), c2 = M^2 / 2, C_ell = 2M. Multinomial(K): half the Hessian eigenvalue
 * bounds 1 / (1 + K e^M)^2 and e^M / (1 + (K-1) e^-M + e^M); C_ell = sqrt(2) in Euclidean norm.
 */
inline CurvatureConstants curvature_constants(const LossKind& kind, double M) {
    detail::require<DomainError>(M >= 0.0 && std::isfinite(M), "envelope M must be a non-negative real");
    using T = LossKind::Tag;
    switch (kind.tag) {
        case T::LeastSquares: return {0.5, 0.5, M};
        case T::Logistic: return {1.0 / (2.0 * (std::exp(M) + std::exp(-M) + 2.0)), 0.125, 1.0};
        case T::Poisson: return {std::exp(-M) / 2.0, std::exp(M) / 2.0, std::exp(M) + M};
        case T::Gamma:
            detail::require<DomainError>(M >= 1.0, "gamma envelope needs M >= 1 so that [-M, -1/M] is non-empty");
            return {1.0 / (2.0 * M * M), M * M / 2.0, 2.0 * M};
        case T::Multinomial: {
            const double K = static_cast<double>(kind.classes);
            const double lo = 1.0 / ((1.0 + K * std::exp(M)) * (1.0 + K * std::exp(M)));
            const double hi = std::exp(M) / (1.0 + (K - 1.0) * std::exp(-M) + std::exp(M));
            return {lo / 2.0, hi / 2.0, std::sqrt(2.0)};
        }
    }
    return {};
}

}  // namespace dnnci
