#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dnnci/errors.hpp"
#include "dnnci/matrix.hpp"
#include "dnnci/stats.hpp"
#include "dnnci/training.hpp"

namespace dnnci {

/// Observed sample (y_i, t_i, x_i).
struct CausalDataset {
    Matrix X;
    std::vector<double> y;
    std::vector<double> t;

    std::size_t n() const noexcept { return y.size(); }
    std::size_t d() const noexcept { return X.cols(); }

    void validate() const {
        detail::require<DataError>(X.rows() == y.size() && y.size() == t.size(),
                                   "dataset has inconsistent row counts");
        detail::require<DataError>(!y.empty(), "dataset is empty");
        detail::require_binary(t);
    }

    std::size_t count_arm(int arm) const {
        return static_cast<std::size_t>(std::count(t.begin(), t.end(), static_cast<double>(arm)));
    }
};

/// Scalar function of a covariate vector.
using Regression = std::function<double(std::span<const double>)>;

/// Deterministic treatment rule s(x); must return 0 or 1.
using Policy = std::function<double(std::span<const double>)>;

/**
 * First-step estimates plugged into the influence scores.
 *
 * With an empty `propensity` the randomized-treatment shortcut is used: p(x) is replaced by
 * the sample frequency E_n[t]. Every propensity is clipped to [clip_eps, 1 - clip_eps].
 */
struct NuisanceEstimates {
    Regression mu0;
    Regression mu1;
    Regression propensity;
    double clip_eps = 0.01;

    bool randomized() const noexcept { return !propensity; }

    static NuisanceEstimates from_models(const OutcomeRegression& outcome, const PropensityModel* prop = nullptr,
                                         double clip_eps = 0.01) {
        NuisanceEstimates n;
        n.mu0 = [&outcome](std::span<const double> x) { return outcome.mu0(x); };
        n.mu1 = [&outcome](std::span<const double> x) { return outcome.mu1(x); };
        if (prop != nullptr) n.propensity = [prop](std::span<const double> x) { return prop->p(x); };
        n.clip_eps = clip_eps;
        return n;
    }
};

/// Nuisances evaluated at every row; `p` is already clipped.
struct NuisanceValues {
    std::vector<double> mu0;
    std::vector<double> mu1;
    std::vector<double> p;

    double mu(int arm, std::size_t i) const { return arm == 1 ? mu1[i] : mu0[i]; }
    /// Estimated P[T = arm | X = x_i].
    double prob(int arm, std::size_t i) const { return arm == 1 ? p[i] : 1.0 - p[i]; }
};

inline double clip_propensity(double p, double eps) { return std::clamp(p, eps, 1.0 - eps); }

inline NuisanceValues evaluate_nuisances(const CausalDataset& data, const NuisanceEstimates& nuis) {
    data.validate();
    detail::require<ConfigError>(nuis.clip_eps > 0.0 && nuis.clip_eps < 0.5, "clip_eps must lie in (0, 0.5)");
    detail::require<ConfigError>(static_cast<bool>(nuis.mu0) && static_cast<bool>(nuis.mu1),
                                 "outcome regressions are missing");
    const std::size_t n = data.n();
    NuisanceValues v;
    v.mu0.resize(n);
    v.mu1.resize(n);
    v.p.resize(n);
    const double freq = mean(data.t);
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = data.X.row(i);
        v.mu0[i] = nuis.mu0(x);
        v.mu1[i] = nuis.mu1(x);
        v.p[i] = clip_propensity(nuis.randomized() ? freq : nuis.propensity(x), nuis.clip_eps);
        if (!std::isfinite(v.mu0[i]) || !std::isfinite(v.mu1[i]) || !std::isfinite(v.p[i]))
            throw NumericError("non-finite nuisance estimate at row " + std::to_string(i));
    }
    return v;
}

/// Per-observation influence values for one estimand.
struct ScoreVector {
    std::vector<double> values;
    std::string estimand_tag;
};

struct EstimateReport {
    std::string estimand_tag;
    double estimate = 0.0;
    double std_error = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t n = 0;
    double level = 0.95;
};

/**
 * Normal-approximation interval from influence scores: estimate E_n[s], variance
 * E_n[s^2] - E_n[s]^2, standard error sqrt(variance / n).
 */
inline EstimateReport confidence_interval(const ScoreVector& scores, double level = 0.95) {
    const auto& v = scores.values;
    detail::require<DataError>(v.size() >= 2, "confidence interval needs at least two scores");
    const double z = normal_critical_value(level);
    const double est = mean(v);
    const double var = plugin_variance(v);
    if (!std::isfinite(est) || !std::isfinite(var)) throw NumericError("non-finite scores for " + scores.estimand_tag);
    if (!(var > 0.0)) throw NumericError("zero variance in scores for " + scores.estimand_tag);
    EstimateReport r;
    r.estimand_tag = scores.estimand_tag;
    r.estimate = est;
    r.std_error = std::sqrt(var / static_cast<double>(v.size()));
    r.ci_low = est - z * r.std_error;
    r.ci_high = est + z * r.std_error;
    r.n = v.size();
    r.level = level;
    return r;
}

namespace detail {

inline void require_arm(int arm) { require<DomainError>(arm == 0 || arm == 1, "treatment arm must be 0 or 1"); }

inline double indicator(double t, int arm) { return t == static_cast<double>(arm) ? 1.0 : 0.0; }

inline std::vector<double> evaluate_policy(const CausalDataset& data, const Policy& s) {
    std::vector<double> out(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) {
        const double v = s(data.X.row(i));
        require<DomainError>(v == 0.0 || v == 1.0, "policy returned a non-binary value at row " + std::to_string(i));
        out[i] = v;
    }
    return out;
}

inline std::string arm_tag(const char* base, int t) { return std::string(base) + std::to_string(t); }

}  // namespace detail

/// psi_t(z_i) = 1{t_i = t}(y_i - mu_t(x_i)) / P[T = t | x_i] + mu_t(x_i).
inline ScoreVector scores_full(const CausalDataset& data, const NuisanceValues& v, int arm) {
    detail::require_arm(arm);
    ScoreVector s{std::vector<double>(data.n()), detail::arm_tag("psi_", arm)};
    for (std::size_t i = 0; i < data.n(); ++i) {
        const double mu = v.mu(arm, i);
        s.values[i] = detail::indicator(data.t[i], arm) * (data.y[i] - mu) / v.prob(arm, i) + mu;
    }
    return s;
}

inline ScoreVector scores_full(const CausalDataset& data, const NuisanceEstimates& nuis, int arm) {
    return scores_full(data, evaluate_nuisances(data, nuis), arm);
}

/**
 * psi_{t,t'}(z_i) = P[T=t'|x_i] / P[T=t'] * 1{t_i = t}(y_i - mu_t(x_i)) / P[T=t|x_i]
 *                   + 1{t_i = t'} mu_t(x_i) / P[T=t'],
 * with P[T=t'] the sample frequency of group t'.
 */
inline ScoreVector scores_sub(const CausalDataset& data, const NuisanceValues& v, int arm, int group) {
    detail::require_arm(arm);
    detail::require_arm(group);
    const std::size_t n_group = data.count_arm(group);
    detail::require<DataError>(n_group > 0, "treatment group " + std::to_string(group) + " is empty");
    const double freq = static_cast<double>(n_group) / static_cast<double>(data.n());
    ScoreVector s{std::vector<double>(data.n()), "psi_" + std::to_string(arm) + std::to_string(group)};
    for (std::size_t i = 0; i < data.n(); ++i) {
        const double mu = v.mu(arm, i);
        const double resid = detail::indicator(data.t[i], arm) * (data.y[i] - mu) / v.prob(arm, i);
        s.values[i] = v.prob(group, i) / freq * resid + detail::indicator(data.t[i], group) * mu / freq;
    }
    return s;
}

inline ScoreVector scores_sub(const CausalDataset& data, const NuisanceEstimates& nuis, int arm, int group) {
    return scores_sub(data, evaluate_nuisances(data, nuis), arm, group);
}

inline ScoreVector difference(const ScoreVector& a, const ScoreVector& b, std::string tag) {
    detail::require(a.values.size() == b.values.size(), "score vectors differ in length");
    ScoreVector s{std::vector<double>(a.values.size()), std::move(tag)};
    for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] = a.values[i] - b.values[i];
    return s;
}

struct Estimate {
    EstimateReport report;
    ScoreVector scores;
};

/// Average treatment effect E_n[psi_1 - psi_0].
inline Estimate ate(const CausalDataset& data, const NuisanceValues& v, double level = 0.95) {
    auto scores = difference(scores_full(data, v, 1), scores_full(data, v, 0), "ate");
    return {confidence_interval(scores, level), std::move(scores)};
}

inline Estimate ate(const CausalDataset& data, const NuisanceEstimates& nuis, double level = 0.95) {
    return ate(data, evaluate_nuisances(data, nuis), level);
}

/// Expected profit pi(s) = E_n[s (m psi_1 - c) + (1 - s) m psi_0].
inline Estimate profit(const CausalDataset& data, const NuisanceValues& v, const Policy& s, double margin = 1.0,
                       double cost = 0.0, double level = 0.95) {
    const auto policy = detail::evaluate_policy(data, s);
    const auto psi1 = scores_full(data, v, 1);
    const auto psi0 = scores_full(data, v, 0);
    ScoreVector scores{std::vector<double>(data.n()), "profit"};
    for (std::size_t i = 0; i < data.n(); ++i)
        scores.values[i] =
            policy[i] * (margin * psi1.values[i] - cost) + (1.0 - policy[i]) * margin * psi0.values[i];
    return {confidence_interval(scores, level), std::move(scores)};
}

inline Estimate profit(const CausalDataset& data, const NuisanceEstimates& nuis, const Policy& s, double margin = 1.0,
                       double cost = 0.0, double level = 0.95) {
    return profit(data, evaluate_nuisances(data, nuis), s, margin, cost, level);
}

/// Report for a score vector that is identically zero: the estimand is exactly 0.
inline EstimateReport exact_zero_report(std::string tag, std::size_t n, double level) {
    EstimateReport r;
    r.estimand_tag = std::move(tag);
    r.n = n;
    r.level = level;
    return r;
}

/**
 * Profit difference pi(s_new) - pi(s_base) with scores
 * (s_new - s_base)(m psi_1 - c - m psi_0). When the two policies agree on every row the
 * scores are identically zero and the report is the exact value 0 with zero width.
 */
inline Estimate profit_diff(const CausalDataset& data, const NuisanceValues& v, std::span<const double> s_new,
                            std::span<const double> s_base, double margin = 1.0, double cost = 0.0,
                            double level = 0.95) {
    detail::require(s_new.size() == data.n() && s_base.size() == data.n(), "policy vectors must have n entries");
    const auto psi1 = scores_full(data, v, 1);
    const auto psi0 = scores_full(data, v, 0);
    ScoreVector scores{std::vector<double>(data.n()), "profit_diff"};
    bool all_zero = true;
    for (std::size_t i = 0; i < data.n(); ++i) {
        const double ds = s_new[i] - s_base[i];
        scores.values[i] = ds == 0.0 ? 0.0 : ds * (margin * psi1.values[i] - cost - margin * psi0.values[i]);
        all_zero = all_zero && ds == 0.0;
    }
    if (all_zero) return {exact_zero_report(scores.estimand_tag, data.n(), level), std::move(scores)};
    return {confidence_interval(scores, level), std::move(scores)};
}

inline Estimate profit_diff(const CausalDataset& data, const NuisanceValues& v, const Policy& s_new,
                            const Policy& s_base, double margin = 1.0, double cost = 0.0, double level = 0.95) {
    return profit_diff(data, v, detail::evaluate_policy(data, s_new), detail::evaluate_policy(data, s_base), margin,
                       cost, level);
}

inline Estimate profit_diff(const CausalDataset& data, const NuisanceEstimates& nuis, const Policy& s_new,
                            const Policy& s_base, double margin = 1.0, double cost = 0.0, double level = 0.95) {
    return profit_diff(data, evaluate_nuisances(data, nuis), s_new, s_base, margin, cost, level);
}

/// Treatment effect on the treated rho_{1,1} - rho_{0,1}.
inline Estimate tot(const CausalDataset& data, const NuisanceValues& v, double level = 0.95) {
    auto scores = difference(scores_sub(data, v, 1, 1), scores_sub(data, v, 0, 1), "tot");
    return {confidence_interval(scores, level), std::move(scores)};
}

inline Estimate tot(const CausalDataset& data, const NuisanceEstimates& nuis, double level = 0.95) {
    return tot(data, evaluate_nuisances(data, nuis), level);
}

/// Delta = rho_{1,1} - rho_{0,0} split into Delta_X = rho_{1,1} - rho_{1,0} and Delta_mu = rho_{1,0} - rho_{0,0}.
struct Decomposition {
    Estimate total;
    Estimate covariates;
    Estimate coefficients;
};

inline Decomposition decomposition(const CausalDataset& data, const NuisanceValues& v, double level = 0.95) {
    const auto r11 = scores_sub(data, v, 1, 1);
    const auto r10 = scores_sub(data, v, 1, 0);
    const auto r00 = scores_sub(data, v, 0, 0);
    auto total = difference(r11, r00, "delta");
    auto covs = difference(r11, r10, "delta_x");
    auto coefs = difference(r10, r00, "delta_mu");
    Decomposition out;
    out.total = {confidence_interval(total, level), std::move(total)};
    out.covariates = {confidence_interval(covs, level), std::move(covs)};
    out.coefficients = {confidence_interval(coefs, level), std::move(coefs)};
    return out;
}

inline Decomposition decomposition(const CausalDataset& data, const NuisanceEstimates& nuis, double level = 0.95) {
    return decomposition(data, evaluate_nuisances(data, nuis), level);
}

/// Known data-generating functions, available in simulations.
struct TrueNuisances {
    Regression mu0;
    Regression mu1;
    Regression propensity;
};

/**
 * First-step quality measures against the truth, per arm t:
 *  (a) E_n[(p_hat - p)^2] and E_n[(mu_hat_t - mu_t)^2],
 *  (b) sqrt((a)_mu) * sqrt((a)_p),
 *  (c) E_n[(mu_hat_t - mu_t)(1 - 1{t_i = t} / P[T = t | x_i])].
 * The sqrt(n)-scaled versions of (b) and (c) are what must vanish.
 */
struct FirstStepDiagnostics {
    std::size_t n = 0;
    double propensity_mse = 0.0;
    double outcome_mse[2] = {0.0, 0.0};
    double rate_product[2] = {0.0, 0.0};
    double leave_in[2] = {0.0, 0.0};
    double scaled_rate_product[2] = {0.0, 0.0};
    double scaled_leave_in[2] = {0.0, 0.0};
};

inline FirstStepDiagnostics first_step_diagnostics(const CausalDataset& data, const NuisanceValues& v,
                                                const TrueNuisances& truth) {
    const std::size_t n = data.n();
    FirstStepDiagnostics d;
    d.n = n;
    CompensatedSum p_err, mu_err[2], leave[2];
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = data.X.row(i);
        const double p_true = truth.propensity(x);
        p_err += (v.p[i] - p_true) * (v.p[i] - p_true);
        for (int arm = 0; arm <= 1; ++arm) {
            const double e = v.mu(arm, i) - (arm == 1 ? truth.mu1(x) : truth.mu0(x));
            mu_err[arm] += e * e;
            const double prob = arm == 1 ? p_true : 1.0 - p_true;
            leave[arm] += e * (1.0 - detail::indicator(data.t[i], arm) / prob);
        }
    }
    const double nn = static_cast<double>(n);
    d.propensity_mse = p_err.value() / nn;
    for (int arm = 0; arm <= 1; ++arm) {
        d.outcome_mse[arm] = mu_err[arm].value() / nn;
        d.rate_product[arm] = std::sqrt(d.outcome_mse[arm]) * std::sqrt(d.propensity_mse);
        d.leave_in[arm] = leave[arm].value() / nn;
        d.scaled_rate_product[arm] = std::sqrt(nn) * d.rate_product[arm];
        d.scaled_leave_in[arm] = std::sqrt(nn) * d.leave_in[arm];
    }
    return d;
}

inline FirstStepDiagnostics first_step_diagnostics(const CausalDataset& data, const NuisanceEstimates& nuis,
                                                const TrueNuisances& truth) {
    return first_step_diagnostics(data, evaluate_nuisances(data, nuis), truth);
}

}  // namespace dnnci
