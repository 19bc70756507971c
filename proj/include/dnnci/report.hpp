#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "dnnci/causal.hpp"
#include "dnnci/policy.hpp"
#include "dnnci/serialization.hpp"
#include "dnnci/simulation.hpp"
#include "dnnci/training.hpp"

namespace dnnci {

inline void write_estimate_csv_header(std::ostream& out) {
    out << "estimand_tag,estimate,std_error,ci_low,ci_high,n,level\n";
}

inline void write_estimate_csv_row(std::ostream& out, const EstimateReport& r) {
    out << r.estimand_tag << ',' << format_double(r.estimate) << ',' << format_double(r.std_error) << ','
        << format_double(r.ci_low) << ',' << format_double(r.ci_high) << ',' << r.n << ',' << format_double(r.level)
        << '\n';
}

inline void write_estimate_kv(std::ostream& out, const EstimateReport& r) {
    out << "[" << r.estimand_tag << "]\n"
        << "estimate = " << format_double(r.estimate) << '\n'
        << "std_error = " << format_double(r.std_error) << '\n'
        << "ci_low = " << format_double(r.ci_low) << '\n'
        << "ci_high = " << format_double(r.ci_high) << '\n'
        << "n = " << r.n << '\n'
        << "level = " << format_double(r.level) << '\n';
}

inline void write_fit_kv(std::ostream& out, const FitReport& f) {
    out << "training_loss = " << format_double(f.training_loss) << '\n'
        << "validation_loss = " << format_double(f.validation_loss) << '\n'
        << "epochs_run = " << f.epochs_run << '\n'
        << "training_rows = " << f.training_rows << '\n'
        << "validation_rows = " << f.validation_rows << '\n';
}

/// Policy curve rows: threshold, estimate, se, ci_low, ci_high.
inline void write_curve_csv(std::ostream& out, const PolicyEvalCurve& curve) {
    out << "threshold,estimate,se,ci_low,ci_high\n";
    for (const auto& p : curve.points)
        out << format_double(p.threshold) << ',' << format_double(p.report.estimate) << ','
            << format_double(p.report.std_error) << ',' << format_double(p.report.ci_low) << ','
            << format_double(p.report.ci_high) << '\n';
}

/// One row per replication: rep_index, tau_hat, se, ci_low, ci_high, covered.
inline void write_reps_csv(std::ostream& out, const McReport& r) {
    out << "rep_index,tau_hat,se,ci_low,ci_high,covered\n";
    for (const auto& row : r.per_rep_rows) {
        if (!row.ok) continue;
        out << row.rep_index << ',' << format_double(row.tau_hat) << ',' << format_double(row.se) << ','
            << format_double(row.ci_low) << ',' << format_double(row.ci_high) << ',' << (row.covered ? 1 : 0) << '\n';
    }
}

/// Summary block laid out as Bias / IL / Coverage.
inline void write_mc_summary(std::ostream& out, const McReport& r) {
    char line[160];
    std::snprintf(line, sizeof line, "%12s %10s %10s\n", "Bias", "IL", "Coverage");
    out << line;
    std::snprintf(line, sizeof line, "%12.5f %10.3f %10.3f\n", r.bias, r.avg_interval_length, r.coverage);
    out << line;
    out << "true_value = " << format_double(r.true_value) << '\n'
        << "bias = " << format_double(r.bias) << '\n'
        << "avg_interval_length = " << format_double(r.avg_interval_length) << '\n'
        << "coverage = " << format_double(r.coverage) << '\n'
        << "mean_std_error = " << format_double(r.mean_se) << '\n'
        << "sd_estimate = " << format_double(r.sd_estimate) << '\n'
        << "reps = " << r.reps << '\n'
        << "aborted = " << r.aborted << '\n'
        << "level = " << format_double(r.level) << '\n';
    for (const auto& row : r.per_rep_rows)
        if (!row.ok) out << "aborted_rep " << row.rep_index << " = " << row.failure << '\n';
}

}  // namespace dnnci
