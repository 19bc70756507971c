#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dnnci/causal.hpp"
#include "dnnci/errors.hpp"
#include "dnnci/rng.hpp"
#include "dnnci/stats.hpp"
#include "dnnci/training.hpp"

namespace dnnci {

enum class PropensityMode { Constant, Logistic };
enum class OutcomeMode { Linear, Nonlinear };
/// How "N(a, b)" coefficient draws read their second parameter.
enum class NormalScale { Variance, StdDev };

/**
 * Synthetic design: X ~ U(0,1)^d, T ~ Bernoulli(p(x)),
 * y = mu_0(x) + tau(x) t + eps with eps ~ N(0, noise_sd^2),
 * mu_0(x) = a_mu'(1, x) + b_mu' phi(x), tau(x) = a_tau'(1, x) + b_tau' phi(x).
 *
 * phi(x) holds all squares and pairwise products x_j x_k (j <= k) in lexicographic
 * order: x1^2, x1 x2, ..., x1 xd, x2^2, ..., xd^2.
 */
struct DgpSpec {
    std::size_t d = 20;
    PropensityMode propensity_mode = PropensityMode::Constant;
    OutcomeMode outcome_mode = OutcomeMode::Linear;
    std::size_t n = 10000;
    std::uint64_t coef_seed = 0;
    NormalScale normal_scale = NormalScale::Variance;
    std::size_t max_propensity_slopes = 20;  ///< slopes past this covariate are zero
    double constant_propensity = 0.5;
    double noise_sd = 1.0;

    void validate() const {
        detail::require<ConfigError>(d >= 1, "dgp dimension must be at least 1");
        detail::require<ConfigError>(n >= 2, "dgp sample size must be at least 2");
        detail::require<ConfigError>(constant_propensity > 0.0 && constant_propensity < 1.0,
                                     "constant propensity must lie in (0, 1)");
        detail::require<ConfigError>(noise_sd >= 0.0, "noise_sd must be non-negative");
    }

    std::size_t phi_dim() const noexcept { return d * (d + 1) / 2; }
};

/// Coefficients drawn once per study and held fixed across replications.
struct DrawnCoefficients {
    std::vector<double> alpha_p;    ///< intercept then d slopes
    std::vector<double> alpha_mu;   ///< intercept then d slopes
    std::vector<double> alpha_tau;  ///< intercept then d slopes
    std::vector<double> beta_mu;    ///< one per phi term
    std::vector<double> beta_tau;   ///< one per phi term
};

inline void phi_into(std::span<const double> x, std::span<double> out) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i; j < x.size(); ++j) out[k++] = x[i] * x[j];
}

inline std::vector<double> phi(std::span<const double> x) {
    std::vector<double> out(x.size() * (x.size() + 1) / 2);
    phi_into(x, out);
    return out;
}

/**
 * alpha_p: intercept 0.09, slopes U(-0.55, 0.55); alpha_mu: intercept 0.09, slopes N(0.3, 0.7);
 * alpha_tau: intercept -0.05, slopes U(0.1, 0.22). Nonlinear designs add beta_mu ~ N(0.01, 0.3)
 * and beta_tau ~ U(-0.05, 0.06). Each block draws from its own stream of coef_seed.
 */
inline DrawnCoefficients draw_coefficients(const DgpSpec& spec) {
    spec.validate();
    const std::size_t d = spec.d;
    auto normal = [&](double m, double second) {
        const double sd = spec.normal_scale == NormalScale::Variance ? std::sqrt(second) : second;
        return std::normal_distribution<double>(m, sd);
    };
    DrawnCoefficients c;

    Rng rp = make_rng(spec.coef_seed, 0);
    std::uniform_real_distribution<double> up(-0.55, 0.55);
    c.alpha_p.assign(d + 1, 0.0);
    c.alpha_p[0] = 0.09;
    for (std::size_t k = 1; k <= d; ++k) {
        const double v = up(rp);
        c.alpha_p[k] = k <= spec.max_propensity_slopes ? v : 0.0;
    }

    Rng rm = make_rng(spec.coef_seed, 1);
    auto nm = normal(0.3, 0.7);
    c.alpha_mu.assign(d + 1, 0.0);
    c.alpha_mu[0] = 0.09;
    for (std::size_t k = 1; k <= d; ++k) c.alpha_mu[k] = nm(rm);

    Rng rt = make_rng(spec.coef_seed, 2);
    std::uniform_real_distribution<double> ut(0.1, 0.22);
    c.alpha_tau.assign(d + 1, 0.0);
    c.alpha_tau[0] = -0.05;
    for (std::size_t k = 1; k <= d; ++k) c.alpha_tau[k] = ut(rt);

    c.beta_mu.assign(spec.phi_dim(), 0.0);
    c.beta_tau.assign(spec.phi_dim(), 0.0);
    if (spec.outcome_mode == OutcomeMode::Nonlinear) {
        Rng rbm = make_rng(spec.coef_seed, 3);
        auto nb = normal(0.01, 0.3);
        for (double& b : c.beta_mu) b = nb(rbm);
        Rng rbt = make_rng(spec.coef_seed, 4);
        std::uniform_real_distribution<double> ub(-0.05, 0.06);
        for (double& b : c.beta_tau) b = ub(rbt);
    }
    return c;
}

namespace detail {

inline double linear_index(std::span<const double> alpha, std::span<const double> x) {
    double v = alpha[0];
    for (std::size_t k = 0; k < x.size(); ++k) v += alpha[k + 1] * x[k];
    return v;
}

inline double quadratic_part(std::span<const double> beta, std::span<const double> x) {
    double v = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double row = 0.0;
        for (std::size_t j = i; j < x.size(); ++j) row += beta[k++] * x[j];
        v += row * x[i];
    }
    return v;
}

inline bool all_zero(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double b) { return b == 0.0; });
}

}  // namespace detail

inline double true_mu0(const DrawnCoefficients& c, std::span<const double> x) {
    double v = detail::linear_index(c.alpha_mu, x);
    if (!detail::all_zero(c.beta_mu)) v += detail::quadratic_part(c.beta_mu, x);
    return v;
}

inline double true_tau(const DrawnCoefficients& c, std::span<const double> x) {
    double v = detail::linear_index(c.alpha_tau, x);
    if (!detail::all_zero(c.beta_tau)) v += detail::quadratic_part(c.beta_tau, x);
    return v;
}

inline double true_propensity(const DrawnCoefficients& c, const DgpSpec& spec, std::span<const double> x) {
    if (spec.propensity_mode == PropensityMode::Constant) return spec.constant_propensity;
    return 1.0 / (1.0 + std::exp(-detail::linear_index(c.alpha_p, x)));
}

/**
 * E[tau(X)] for X ~ U(0,1)^d: E[x_j] = 1/2, E[x_j^2] = 1/3, E[x_j x_k] = 1/4.
 */
inline double true_ate(const DrawnCoefficients& c, const DgpSpec& spec) {
    CompensatedSum s;
    s += c.alpha_tau[0];
    for (std::size_t k = 1; k <= spec.d; ++k) s += 0.5 * c.alpha_tau[k];
    std::size_t k = 0;
    for (std::size_t i = 0; i < spec.d; ++i)
        for (std::size_t j = i; j < spec.d; ++j) s += c.beta_tau[k++] * (i == j ? 1.0 / 3.0 : 0.25);
    return s.value();
}

inline TrueNuisances true_nuisances(const DrawnCoefficients& c, const DgpSpec& spec) {
    TrueNuisances t;
    t.mu0 = [&c](std::span<const double> x) { return true_mu0(c, x); };
    t.mu1 = [&c](std::span<const double> x) { return true_mu0(c, x) + true_tau(c, x); };
    t.propensity = [&c, &spec](std::span<const double> x) { return true_propensity(c, spec, x); };
    return t;
}

/// One sample of spec.n rows, deterministic in rep_seed.
inline CausalDataset generate_sample(const DrawnCoefficients& c, const DgpSpec& spec, std::uint64_t rep_seed) {
    spec.validate();
    Rng rng = make_rng(rep_seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    CausalDataset data{Matrix(spec.n, spec.d), std::vector<double>(spec.n), std::vector<double>(spec.n)};
    for (std::size_t i = 0; i < spec.n; ++i) {
        auto x = data.X.row(i);
        for (double& v : x) v = uniform01(rng);
        const double p = true_propensity(c, spec, x);
        data.t[i] = uniform01(rng) < p ? 1.0 : 0.0;
        const double eps = spec.noise_sd * noise(rng);
        data.y[i] = true_mu0(c, x) + true_tau(c, x) * data.t[i] + eps;
    }
    return data;
}

enum class NuisanceMode { Trained, Oracle };
enum class OutcomeFit { Joint, PerArm };

struct StudyConfig {
    DgpSpec dgp;
    std::vector<std::size_t> widths{20, 15, 5};  ///< hidden widths shared by all nuisance networks
    TrainConfig train;
    std::size_t reps = 500;
    std::uint64_t master_seed = 0;
    NuisanceMode nuisance_mode = NuisanceMode::Trained;
    OutcomeFit outcome_fit = OutcomeFit::Joint;
    double clip_eps = 0.01;
    double level = 0.95;
    unsigned threads = 0;  ///< 0 = hardware concurrency

    ArchitectureSpec outcome_arch() const {
        return ArchitectureSpec::mlp(dgp.d, widths, outcome_fit == OutcomeFit::Joint ? 2 : 1);
    }
    ArchitectureSpec propensity_arch() const { return ArchitectureSpec::mlp(dgp.d, widths, 1); }
};

struct RepRow {
    std::size_t rep_index = 0;
    bool ok = false;
    double tau_hat = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool covered = false;
    std::string failure;
};

/// Bias, mean interval length and coverage over completed replications.
struct McReport {
    double true_value = 0.0;
    double bias = 0.0;
    double avg_interval_length = 0.0;
    double coverage = 0.0;
    double mean_se = 0.0;
    double sd_estimate = 0.0;
    std::size_t reps = 0;
    std::size_t aborted = 0;
    double level = 0.95;
    std::vector<RepRow> per_rep_rows;
};

inline McReport summarize(std::vector<RepRow> rows, double truth, double level) {
    McReport r;
    r.true_value = truth;
    r.level = level;
    CompensatedSum bias, len, cov, se, est, est2;
    for (const auto& row : rows) {
        if (!row.ok) {
            ++r.aborted;
            continue;
        }
        ++r.reps;
        bias += row.tau_hat - truth;
        len += row.ci_high - row.ci_low;
        cov += row.covered ? 1.0 : 0.0;
        se += row.se;
        est += row.tau_hat;
    }
    if (r.reps > 0) {
        const double k = static_cast<double>(r.reps);
        r.bias = bias.value() / k;
        r.avg_interval_length = len.value() / k;
        r.coverage = cov.value() / k;
        r.mean_se = se.value() / k;
        const double m = est.value() / k;
        for (const auto& row : rows)
            if (row.ok) est2 += (row.tau_hat - m) * (row.tau_hat - m);
        r.sd_estimate = r.reps > 1 ? std::sqrt(est2.value() / (k - 1.0)) : 0.0;
    }
    r.per_rep_rows = std::move(rows);
    return r;
}

namespace detail {

/// Runs body(k) for k in [0, count) on `threads` workers; results land by index.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body body) {
    unsigned workers = threads != 0 ? threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
    if (workers <= 1) {
        for (std::size_t k = 0; k < count; ++k) body(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < count; k = next++) body(k);
        });
    for (auto& th : pool) th.join();
}

inline RepRow finish_row(std::size_t k, const EstimateReport& rep, double truth) {
    RepRow row;
    row.rep_index = k;
    row.ok = true;
    row.tau_hat = rep.estimate;
    row.se = rep.std_error;
    row.ci_low = rep.ci_low;
    row.ci_high = rep.ci_high;
    row.covered = rep.ci_low <= truth && truth <= rep.ci_high;
    return row;
}

inline OutcomeRegression fit_outcomes(const CausalDataset& data, const ArchitectureSpec& arch, OutcomeFit mode,
                                      const TrainConfig& cfg) {
    if (mode == OutcomeFit::Joint) return fit_joint(data.X, data.y, data.t, arch, cfg);
    return fit_regressions_by_arm(data.X, data.y, data.t, arch, cfg);
}

}  // namespace detail

/**
 * Average-treatment-effect estimate for one replication of a study.
 *
 * Trained mode fits the outcome networks (joint or per arm) and, for logistic designs, the
 * propensity network; constant-propensity designs use the sample treatment frequency.
 * Oracle mode plugs in the true functions.
 */
inline EstimateReport estimate_replication(const CausalDataset& data, const StudyConfig& cfg,
                                           const DrawnCoefficients& coefs, std::uint64_t rep_seed) {
    NuisanceEstimates nuis;
    nuis.clip_eps = cfg.clip_eps;
    std::optional<OutcomeRegression> outcome;
    std::optional<PropensityModel> prop;
    if (cfg.nuisance_mode == NuisanceMode::Oracle) {
        const auto truth = true_nuisances(coefs, cfg.dgp);
        nuis.mu0 = truth.mu0;
        nuis.mu1 = truth.mu1;
        nuis.propensity = truth.propensity;
        return ate(data, nuis, cfg.level).report;
    }
    TrainConfig tc = cfg.train;
    tc.seed = stream_seed(rep_seed, 1);
    outcome = detail::fit_outcomes(data, cfg.outcome_arch(), cfg.outcome_fit, tc);
    if (cfg.dgp.propensity_mode == PropensityMode::Logistic) {
        TrainConfig pc = cfg.train;
        pc.seed = stream_seed(rep_seed, 2);
        prop = fit_propensity(data.X, data.t, cfg.propensity_arch(), pc);
    }
    nuis = NuisanceEstimates::from_models(*outcome, prop ? &*prop : nullptr, cfg.clip_eps);
    return ate(data, nuis, cfg.level).report;
}

/// Replicated study of the ATE estimator against the analytic truth.
inline McReport run_study(const StudyConfig& cfg) {
    detail::require<ConfigError>(cfg.reps >= 1, "reps must be at least 1");
    cfg.dgp.validate();
    const DrawnCoefficients coefs = draw_coefficients(cfg.dgp);
    const double truth = true_ate(coefs, cfg.dgp);
    std::vector<RepRow> rows(cfg.reps);
    detail::parallel_for(cfg.reps, cfg.threads, [&](std::size_t k) {
        const std::uint64_t rep_seed = stream_seed(cfg.master_seed, k);
        try {
            const auto data = generate_sample(coefs, cfg.dgp, stream_seed(rep_seed, 0));
            rows[k] = detail::finish_row(k, estimate_replication(data, cfg, coefs, rep_seed), truth);
        } catch (const Error& e) {
            rows[k].rep_index = k;
            rows[k].failure = e.what();
        }
    });
    return summarize(std::move(rows), truth, cfg.level);
}

/// Placebo design: treatment re-assigned at random among untreated rows; the true effect is 0.
struct PlaceboConfig {
    std::vector<std::size_t> widths{20, 15, 5};
    TrainConfig train;
    double placebo_fraction = 0.5;
    std::size_t reps = 500;
    std::uint64_t master_seed = 0;
    OutcomeFit outcome_fit = OutcomeFit::Joint;
    double clip_eps = 0.01;
    double level = 0.95;
    unsigned threads = 0;
};

namespace detail {

/// Controls of `data` with round(fraction * n0) of them marked treated by a seeded shuffle.
inline CausalDataset assign_placebo(const CausalDataset& data, double fraction, std::uint64_t seed) {
    std::vector<std::size_t> controls;
    for (std::size_t i = 0; i < data.n(); ++i)
        if (data.t[i] == 0.0) controls.push_back(i);
    const auto n_treat = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(controls.size())));
    require<DataError>(n_treat >= 1 && n_treat < controls.size(),
                       "placebo assignment leaves an empty arm (" + std::to_string(controls.size()) + " controls)");
    CausalDataset out{data.X.select_rows(controls), std::vector<double>(controls.size()),
                      std::vector<double>(controls.size(), 0.0)};
    for (std::size_t i = 0; i < controls.size(); ++i) out.y[i] = data.y[controls[i]];
    std::vector<std::size_t> order(controls.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < n_treat; ++k) out.t[order[k]] = 1.0;
    return out;
}

inline RepRow placebo_replication(const CausalDataset& placebo, const PlaceboConfig& cfg, std::uint64_t rep_seed,
                                  std::size_t k) {
    TrainConfig tc = cfg.train;
    tc.seed = stream_seed(rep_seed, 1);
    const auto arch = ArchitectureSpec::mlp(placebo.d(), cfg.widths, cfg.outcome_fit == OutcomeFit::Joint ? 2 : 1);
    const auto outcome = fit_outcomes(placebo, arch, cfg.outcome_fit, tc);
    const auto nuis = NuisanceEstimates::from_models(outcome, nullptr, cfg.clip_eps);
    return finish_row(k, ate(placebo, nuis, cfg.level).report, 0.0);
}

inline void check_placebo(const PlaceboConfig& cfg) {
    require<ConfigError>(cfg.reps >= 1, "reps must be at least 1");
    require<ConfigError>(cfg.placebo_fraction > 0.0 && cfg.placebo_fraction < 1.0,
                         "placebo_fraction must lie in (0, 1) so that both arms are non-empty");
}

}  // namespace detail

/// Placebo study on fresh synthetic samples: each replication draws from `dgp` and keeps its controls.
inline McReport run_placebo(const DgpSpec& dgp, const PlaceboConfig& cfg) {
    detail::check_placebo(cfg);
    dgp.validate();
    const DrawnCoefficients coefs = draw_coefficients(dgp);
    std::vector<RepRow> rows(cfg.reps);
    detail::parallel_for(cfg.reps, cfg.threads, [&](std::size_t k) {
        const std::uint64_t rep_seed = stream_seed(cfg.master_seed, k);
        try {
            const auto data = generate_sample(coefs, dgp, stream_seed(rep_seed, 0));
            const auto placebo = detail::assign_placebo(data, cfg.placebo_fraction, stream_seed(rep_seed, 3));
            rows[k] = detail::placebo_replication(placebo, cfg, rep_seed, k);
        } catch (const Error& e) {
            rows[k].rep_index = k;
            rows[k].failure = e.what();
        }
    });
    return summarize(std::move(rows), 0.0, cfg.level);
}

/// Placebo study on observed data: the controls are re-randomized in each replication.
inline McReport run_placebo(const CausalDataset& data, const PlaceboConfig& cfg) {
    detail::check_placebo(cfg);
    data.validate();
    detail::require<DataError>(data.count_arm(0) >= 2, "placebo needs untreated rows");
    std::vector<RepRow> rows(cfg.reps);
    detail::parallel_for(cfg.reps, cfg.threads, [&](std::size_t k) {
        const std::uint64_t rep_seed = stream_seed(cfg.master_seed, k);
        try {
            const auto placebo = detail::assign_placebo(data, cfg.placebo_fraction, stream_seed(rep_seed, 3));
            rows[k] = detail::placebo_replication(placebo, cfg, rep_seed, k);
        } catch (const Error& e) {
            rows[k].rep_index = k;
            rows[k].failure = e.what();
        }
    });
    return summarize(std::move(rows), 0.0, cfg.level);
}

}  // namespace dnnci
