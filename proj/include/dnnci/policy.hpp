#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dnnci/causal.hpp"
#include "dnnci/errors.hpp"

namespace dnnci {

/// Policies s(x) = 1(x[covariate_index] > threshold) for each threshold in an ascending grid.
struct ThresholdPolicyClass {
    std::size_t covariate_index = 0;
    std::vector<double> thresholds;

    void validate(std::size_t d) const {
        detail::require<ConfigError>(covariate_index < d, "policy covariate index out of range");
        detail::require<ConfigError>(!thresholds.empty(), "threshold grid is empty");
        for (std::size_t k = 1; k < thresholds.size(); ++k)
            detail::require<ConfigError>(thresholds[k] > thresholds[k - 1], "threshold grid must be strictly ascending");
    }

    Policy policy(std::size_t k) const {
        const std::size_t j = covariate_index;
        const double cut = thresholds.at(k);
        return [j, cut](std::span<const double> x) { return x[j] > cut ? 1.0 : 0.0; };
    }

    /// Grid start, start + step, ... up to and including stop (within step / 1e6).
    static ThresholdPolicyClass regular(std::size_t covariate, double start, double step, double stop) {
        detail::require<ConfigError>(step > 0.0 && stop >= start, "bad threshold grid");
        ThresholdPolicyClass c;
        c.covariate_index = covariate;
        for (std::size_t k = 0;; ++k) {
            const double v = start + static_cast<double>(k) * step;
            if (v > stop + step * 1e-6) break;
            c.thresholds.push_back(v);
        }
        return c;
    }
};

struct CurvePoint {
    double threshold = 0.0;
    EstimateReport report;
};

/// Profit difference of each grid policy against a baseline, with pointwise intervals.
struct PolicyEvalCurve {
    std::vector<CurvePoint> points;
};

inline PolicyEvalCurve evaluate_grid(const CausalDataset& data, const NuisanceValues& v,
                                     const ThresholdPolicyClass& cls, const Policy& s_base, double margin = 1.0,
                                     double cost = 0.0, double level = 0.95) {
    cls.validate(data.d());
    const auto base = detail::evaluate_policy(data, s_base);
    PolicyEvalCurve curve;
    curve.points.reserve(cls.thresholds.size());
    std::vector<double> s(data.n());
    for (std::size_t k = 0; k < cls.thresholds.size(); ++k) {
        const double cut = cls.thresholds[k];
        for (std::size_t i = 0; i < data.n(); ++i) s[i] = data.X(i, cls.covariate_index) > cut ? 1.0 : 0.0;
        auto est = profit_diff(data, v, s, base, margin, cost, level);
        est.report.estimand_tag = "profit_diff";
        curve.points.push_back({cut, std::move(est.report)});
    }
    return curve;
}

inline PolicyEvalCurve evaluate_grid(const CausalDataset& data, const NuisanceEstimates& nuis,
                                     const ThresholdPolicyClass& cls, const Policy& s_base, double margin = 1.0,
                                     double cost = 0.0, double level = 0.95) {
    return evaluate_grid(data, evaluate_nuisances(data, nuis), cls, s_base, margin, cost, level);
}

/// Grid point with the largest estimated gain; ties go to the smallest threshold.
inline CurvePoint select_optimal(const PolicyEvalCurve& curve) {
    detail::require<DataError>(!curve.points.empty(), "cannot select from an empty curve");
    std::size_t best = 0;
    for (std::size_t k = 1; k < curve.points.size(); ++k)
        if (curve.points[k].report.estimate > curve.points[best].report.estimate) best = k;
    return curve.points[best];
}

}  // namespace dnnci
