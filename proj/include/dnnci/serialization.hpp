#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "dnnci/errors.hpp"
#include "dnnci/losses.hpp"
#include "dnnci/network.hpp"
#include "dnnci/training.hpp"

namespace dnnci {

/// 17 significant digits; enough for every double to round-trip.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

template <class T>
std::string join(const std::vector<T>& v, const char* sep = ",") {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        if constexpr (std::is_floating_point_v<T>)
            out += format_double(v[i]);
        else
            out += std::to_string(v[i]);
    }
    return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
    if (s.empty()) throw DataError("empty number for " + what);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw DataError("'" + s + "' is not a number (" + what + ")");
    return v;
}

inline std::size_t parse_size(const std::string& s, const std::string& what) {
    const double v = parse_double(s, what);
    if (v < 0.0 || v != static_cast<double>(static_cast<std::size_t>(v)))
        throw DataError("'" + s + "' is not a non-negative integer (" + what + ")");
    return static_cast<std::size_t>(v);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// key=value tokens of a header line after its leading word(s).
inline std::map<std::string, std::string> parse_fields(std::istringstream& in) {
    std::map<std::string, std::string> f;
    std::string tok;
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw DataError("malformed field '" + tok + "'");
        f[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return f;
}

inline const std::string& field(const std::map<std::string, std::string>& f, const std::string& key) {
    const auto it = f.find(key);
    if (it == f.end()) throw DataError("missing field '" + key + "'");
    return it->second;
}

inline std::string next_line(std::istream& in, const char* what) {
    std::string line;
    if (!std::getline(in, line)) throw DataError(std::string("unexpected end of file reading ") + what);
    return line;
}

}  // namespace detail

/**
 * Network text format, version 1:
 *
 *     dnnci-network 1 input_dim=2 widths=3,3 output_dim=1 dropout=0,0 clamp=none
 *     layer 0 rows=3 cols=2
 *     <rows lines of cols weights>
 *     <one line of rows constant terms>
 *     layer 1 ...
 *
 * Values use 17 significant digits, so a write/read cycle is bit-exact.
 */
inline void write_network(std::ostream& out, const NetworkState& net) {
    const auto& s = net.spec;
    out << "dnnci-network 1 input_dim=" << s.input_dim << " widths=" << detail::join(s.hidden_widths)
        << " output_dim=" << s.output_dim << " dropout=" << detail::join(s.dropout_rates)
        << " clamp=" << (s.clamp_bound ? format_double(*s.clamp_bound) : std::string("none")) << '\n';
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        out << "layer " << l << " rows=" << layer.rows << " cols=" << layer.cols << '\n';
        for (std::size_t r = 0; r < layer.rows; ++r) {
            for (std::size_t c = 0; c < layer.cols; ++c) out << (c ? " " : "") << format_double(layer.weight(r, c));
            out << '\n';
        }
        out << detail::join(layer.constants, " ") << '\n';
    }
}

inline NetworkState read_network(std::istream& in) {
    std::istringstream header(detail::next_line(in, "network header"));
    std::string magic, version;
    header >> magic >> version;
    if (magic != "dnnci-network") throw DataError("not a network file");
    if (version != "1") throw DataError("unsupported network format version " + version);
    const auto f = detail::parse_fields(header);

    ArchitectureSpec spec;
    spec.input_dim = detail::parse_size(detail::field(f, "input_dim"), "input_dim");
    spec.output_dim = detail::parse_size(detail::field(f, "output_dim"), "output_dim");
    for (const auto& w : detail::split(detail::field(f, "widths"), ','))
        if (!w.empty()) spec.hidden_widths.push_back(detail::parse_size(w, "widths"));
    for (const auto& r : detail::split(detail::field(f, "dropout"), ','))
        if (!r.empty()) spec.dropout_rates.push_back(detail::parse_double(r, "dropout"));
    const auto& clamp = detail::field(f, "clamp");
    if (clamp != "none") spec.clamp_bound = detail::parse_double(clamp, "clamp");
    try {
        spec.validate();
    } catch (const Error& e) {
        throw DataError(std::string("invalid network header: ") + e.what());
    }

    NetworkState net = NetworkState::zeros(spec);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        std::istringstream lh(detail::next_line(in, "layer header"));
        std::string word;
        std::size_t index = 0;
        lh >> word >> index;
        const auto lf = detail::parse_fields(lh);
        if (word != "layer" || index != l || detail::parse_size(detail::field(lf, "rows"), "rows") != layer.rows ||
            detail::parse_size(detail::field(lf, "cols"), "cols") != layer.cols)
            throw DataError("layer " + std::to_string(l) + " header does not match the architecture");
        for (std::size_t r = 0; r < layer.rows; ++r) {
            std::istringstream row(detail::next_line(in, "weights"));
            std::string tok;
            std::size_t c = 0;
            for (; row >> tok; ++c) {
                if (c >= layer.cols) throw DataError("too many weights in layer " + std::to_string(l));
                layer.weight(r, c) = detail::parse_double(tok, "weight");
            }
            if (c != layer.cols) throw DataError("too few weights in layer " + std::to_string(l));
        }
        std::istringstream row(detail::next_line(in, "constant terms"));
        std::string tok;
        std::size_t r = 0;
        for (; row >> tok; ++r) {
            if (r >= layer.rows) throw DataError("too many constant terms in layer " + std::to_string(l));
            layer.constants[r] = detail::parse_double(tok, "constant term");
        }
        if (r != layer.rows) throw DataError("too few constant terms in layer " + std::to_string(l));
    }
    return net;
}

/// Model file: `dnnci-model 1 loss=<tag> M=<bound>`, a fit line, then a network block.
inline void write_model(std::ostream& out, const TrainedModel& m) {
    out << "dnnci-model 1 loss=" << to_string(m.kind) << " M=" << format_double(m.kind.bound_M) << '\n';
    out << "fit training_loss=" << format_double(m.fit.training_loss)
        << " validation_loss=" << format_double(m.fit.validation_loss) << " epochs_run=" << m.fit.epochs_run << '\n';
    write_network(out, m.net);
}

inline TrainedModel read_model(std::istream& in) {
    std::istringstream header(detail::next_line(in, "model header"));
    std::string magic, version;
    header >> magic >> version;
    if (magic != "dnnci-model") throw DataError("not a model file");
    if (version != "1") throw DataError("unsupported model format version " + version);
    const auto f = detail::parse_fields(header);
    TrainedModel m;
    try {
        m.kind = parse_loss_kind(detail::field(f, "loss"), detail::parse_double(detail::field(f, "M"), "M"));
    } catch (const ConfigError& e) {
        throw DataError(e.what());
    }
    std::istringstream fit_line(detail::next_line(in, "fit line"));
    std::string word;
    fit_line >> word;
    if (word != "fit") throw DataError("missing fit line in model file");
    const auto ff = detail::parse_fields(fit_line);
    m.fit.training_loss = detail::parse_double(detail::field(ff, "training_loss"), "training_loss");
    m.fit.validation_loss = detail::parse_double(detail::field(ff, "validation_loss"), "validation_loss");
    m.fit.epochs_run = detail::parse_size(detail::field(ff, "epochs_run"), "epochs_run");
    m.net = read_network(in);
    return m;
}

inline void save_model(const std::string& path, const TrainedModel& m) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    write_model(out, m);
}

inline TrainedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file " + path);
    return read_model(in);
}

}  // namespace dnnci
