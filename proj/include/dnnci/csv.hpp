#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dnnci/causal.hpp"
#include "dnnci/errors.hpp"
#include "dnnci/serialization.hpp"

namespace dnnci {

/// Which CSV columns play which role. Empty `covariates` means every other column.
struct ColumnRoles {
    std::string outcome;
    std::string treatment;
    std::vector<std::string> covariates;
};

struct LoadedData {
    CausalDataset data;
    std::vector<std::string> covariate_names;
    std::string summary;  ///< row count and per-column means, for echoing
};

namespace detail {

inline std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == name) return c;
    throw DataError("missing column '" + name + "'");
}

}  // namespace detail

/**
 * Reads a comma-separated file whose first line is a header. The treatment column must hold
 * 0/1 values; every used field must be a decimal number. Errors name the offending line.
 */
inline LoadedData load_csv(std::istream& in, const ColumnRoles& roles, const std::string& source = "<stream>") {
    std::string line;
    if (!std::getline(in, line) || detail::trim(line).empty()) throw DataError(source + ": empty file");
    std::vector<std::string> header;
    for (const auto& h : detail::split(line, ',')) header.push_back(detail::trim(h));

    const std::size_t y_col = detail::column_index(header, roles.outcome);
    const std::size_t t_col = detail::column_index(header, roles.treatment);
    std::vector<std::size_t> x_cols;
    LoadedData out;
    if (roles.covariates.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (c != y_col && c != t_col) {
                x_cols.push_back(c);
                out.covariate_names.push_back(header[c]);
            }
    } else {
        for (const auto& name : roles.covariates) {
            x_cols.push_back(detail::column_index(header, name));
            out.covariate_names.push_back(name);
        }
    }
    if (x_cols.empty()) throw DataError(source + ": no covariate columns");

    std::vector<double> xs;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split(line, ',');
        if (fields.size() != header.size())
            throw DataError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(fields.size()));
        auto num = [&](std::size_t c) {
            try {
                const double v = detail::parse_double(detail::trim(fields[c]), header[c]);
                if (!std::isfinite(v)) throw DataError("non-finite value");
                return v;
            } catch (const DataError&) {
                throw DataError(source + ":" + std::to_string(line_no) + ": column '" + header[c] +
                                "' is not numeric ('" + detail::trim(fields[c]) + "')");
            }
        };
        const double t = num(t_col);
        if (t != 0.0 && t != 1.0)
            throw DataError(source + ":" + std::to_string(line_no) + ": treatment column '" + roles.treatment +
                            "' must be 0 or 1, found '" + detail::trim(fields[t_col]) + "'");
        out.data.y.push_back(num(y_col));
        out.data.t.push_back(t);
        for (std::size_t c : x_cols) xs.push_back(num(c));
    }
    if (out.data.y.empty()) throw DataError(source + ": no data rows");
    out.data.X = Matrix(out.data.y.size(), x_cols.size(), std::move(xs));

    std::ostringstream s;
    s << "rows=" << out.data.n() << " covariates=" << out.data.d() << " treated=" << out.data.count_arm(1)
      << " mean_" << roles.outcome << "=" << format_double(mean(out.data.y));
    out.summary = s.str();
    return out;
}

inline LoadedData load_csv(const std::string& path, const ColumnRoles& roles) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file " + path);
    return load_csv(in, roles, path);
}

/// Writes `y,t,<covariates>` with 17 significant digits.
inline void write_csv(std::ostream& out, const CausalDataset& data, const std::vector<std::string>& covariate_names = {}) {
    out << "y,t";
    for (std::size_t c = 0; c < data.d(); ++c)
        out << ',' << (c < covariate_names.size() ? covariate_names[c] : "x" + std::to_string(c + 1));
    out << '\n';
    for (std::size_t i = 0; i < data.n(); ++i) {
        out << format_double(data.y[i]) << ',' << format_double(data.t[i]);
        for (double v : data.X.row(i)) out << ',' << format_double(v);
        out << '\n';
    }
}

inline void write_csv(const std::string& path, const CausalDataset& data,
                      const std::vector<std::string>& covariate_names = {}) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    write_csv(out, data, covariate_names);
}

}  // namespace dnnci
