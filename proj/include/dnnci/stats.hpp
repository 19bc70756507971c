#pragma once

#include <cmath>
#include <span>

#include <boost/math/distributions/normal.hpp>

#include "dnnci/errors.hpp"

namespace dnnci {

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double v) noexcept {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    CompensatedSum& operator+=(double v) noexcept {
        add(v);
        return *this;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double sum(std::span<const double> v) {
    CompensatedSum s;
    for (double x : v) s += x;
    return s.value();
}

inline double mean(std::span<const double> v) {
    detail::require(!v.empty(), "mean of an empty vector");
    return sum(v) / static_cast<double>(v.size());
}

/// Plug-in second central moment E_n[v^2] - (E_n[v])^2 (divides by n).
inline double plugin_variance(std::span<const double> v) {
    const double m = mean(v);
    CompensatedSum s;
    for (double x : v) s += (x - m) * (x - m);
    return s.value() / static_cast<double>(v.size());
}

/// Two-sided standard normal critical value z with P(|Z| <= z) = level.
inline double normal_critical_value(double level) {
    if (!(level >= 0.0 && level < 1.0))
        throw DomainError("confidence level must lie in [0, 1)");
    if (level == 0.0) return 0.0;
    const boost::math::normal_distribution<double> std_normal;
    return boost::math::quantile(std_normal, 0.5 + level / 2.0);
}

}  // namespace dnnci
