#pragma once

#include <algorithm>
#include <chrono>
#include <concepts>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dnnci/causal.hpp"
#include "dnnci/csv.hpp"
#include "dnnci/errors.hpp"
#include "dnnci/network.hpp"
#include "dnnci/policy.hpp"
#include "dnnci/report.hpp"
#include "dnnci/serialization.hpp"
#include "dnnci/simulation.hpp"
#include "dnnci/training.hpp"

#ifndef DNNCI_VERSION
#define DNNCI_VERSION "0.0.0"
#endif

namespace dnnci::cli {

namespace detail {
using namespace dnnci::detail;
}

/// section -> key -> raw value, as read from an INI file plus command-line overrides.
using RawConfig = std::map<std::string, std::map<std::string, std::string>>;

inline RawConfig read_ini(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("cannot parse config: ") + e.what());
    }
    RawConfig raw;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("key '" + section + "' must belong to a [section]");
        for (const auto& [key, value] : body) raw[section][key] = detail::trim(value.data());
    }
    return raw;
}

inline RawConfig read_ini_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return read_ini(in);
}

/// Sets `section.key`; a bare key goes to `default_section`.
inline void set_value(RawConfig& raw, const std::string& assignment, const std::string& default_section) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + assignment + "'");
    std::string key = assignment.substr(0, eq);
    std::string section = default_section;
    if (const auto dot = key.find('.'); dot != std::string::npos) {
        section = key.substr(0, dot);
        key = key.substr(dot + 1);
    }
    if (section.empty()) throw ConfigError("'" + assignment + "' needs a section prefix (section.key=value)");
    raw[section][key] = assignment.substr(eq + 1);
}

enum class TrainTarget { Outcome, Joint, PerArm, Propensity };

struct RunConfig {
    std::uint64_t seed = 0;
    std::string out = "out";

    std::string data_path;
    ColumnRoles columns{"y", "t", {}};

    std::string loss = "leastsquares";
    double loss_bound = 1.0;

    std::vector<std::size_t> widths{20, 15, 5};
    double dropout = 0.0;
    std::optional<double> clamp;

    TrainConfig train;
    TrainTarget target = TrainTarget::Outcome;

    bool randomized = false;
    double clip_eps = 0.01;
    double margin = 1.0;
    double cost = 0.0;
    double level = 0.95;
    OutcomeFit outcome_fit = OutcomeFit::Joint;
    std::string mu0_model, mu1_model, joint_model, propensity_model;

    std::string policy = "all";  ///< all | none | threshold
    std::string covariate = "0";  ///< column name or 0-based covariate index
    double threshold = 0.0;
    std::string base = "none";  ///< none | all | a threshold value
    double grid_start = 0.0, grid_step = 0.02, grid_stop = 1.0;

    DgpSpec dgp;
    std::size_t reps = 500;
    NuisanceMode nuisance = NuisanceMode::Trained;
    unsigned threads = 0;
    double placebo_fraction = 0.5;

    double advise_n = 10000.0;
    std::size_t advise_d = 20;
    double advise_beta = 21.0;
    double c_width = 1.0, c_depth = 1.0;

    ArchitectureSpec architecture(std::size_t input_dim, std::size_t output_dim) const {
        auto spec = ArchitectureSpec::mlp(input_dim, widths, output_dim);
        spec.dropout_rates.assign(widths.size(), dropout);
        spec.clamp_bound = clamp;
        return spec;
    }
};

namespace detail {

/// Typed access to a RawConfig that rejects keys nobody asked for.
class Reader {
public:
    explicit Reader(const RawConfig& raw) : raw_(raw) {}

    const std::string* find(const std::string& section, const std::string& key) {
        seen_.insert(section + "." + key);
        const auto s = raw_.find(section);
        if (s == raw_.end()) return nullptr;
        const auto k = s->second.find(key);
        return k == s->second.end() ? nullptr : &k->second;
    }

    void get(const std::string& sec, const std::string& key, std::string& out) {
        if (const auto* v = find(sec, key)) out = *v;
    }
    void get(const std::string& sec, const std::string& key, double& out) {
        if (const auto* v = find(sec, key)) out = number(sec, key, *v);
    }
    template <std::unsigned_integral T>
    void get(const std::string& sec, const std::string& key, T& out) {
        if (const auto* v = find(sec, key)) out = static_cast<T>(integer(sec, key, *v));
    }
    void get(const std::string& sec, const std::string& key, bool& out) {
        if (const auto* v = find(sec, key)) {
            if (*v == "true" || *v == "1" || *v == "yes") out = true;
            else if (*v == "false" || *v == "0" || *v == "no") out = false;
            else throw ConfigError(sec + "." + key + ": expected true or false, got '" + *v + "'");
        }
    }

    template <class E>
    void choice(const std::string& sec, const std::string& key, E& out, const std::map<std::string, E>& options) {
        if (const auto* v = find(sec, key)) {
            const auto it = options.find(*v);
            if (it == options.end()) {
                std::string allowed;
                for (const auto& [name, _] : options) allowed += (allowed.empty() ? "" : "|") + name;
                throw ConfigError(sec + "." + key + ": expected one of " + allowed + ", got '" + *v + "'");
            }
            out = it->second;
        }
    }

    void check_unused() const {
        for (const auto& [sec, body] : raw_)
            for (const auto& [key, _] : body)
                if (!seen_.count(sec + "." + key)) throw ConfigError("unknown config key " + sec + "." + key);
    }

    static double number(const std::string& sec, const std::string& key, const std::string& v) {
        try {
            return dnnci::detail::parse_double(v, key);
        } catch (const DataError&) {
            throw ConfigError(sec + "." + key + ": '" + v + "' is not a number");
        }
    }
    static std::uint64_t integer(const std::string& sec, const std::string& key, const std::string& v) {
        std::size_t pos = 0;
        unsigned long long out = 0;
        try {
            out = std::stoull(v, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (v.empty() || pos != v.size() || v[0] == '-')
            throw ConfigError(sec + "." + key + ": '" + v + "' is not a non-negative integer");
        return out;
    }

private:
    const RawConfig& raw_;
    std::set<std::string> seen_;
};

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    for (const auto& part : dnnci::detail::split(v, ','))
        if (const auto s = dnnci::detail::trim(part); !s.empty()) out.push_back(s);
    return out;
}

}  // namespace detail

inline RunConfig build_config(const RawConfig& raw) {
    RunConfig c;
    detail::Reader r(raw);
    r.get("run", "seed", c.seed);
    r.get("run", "out", c.out);

    r.get("data", "path", c.data_path);
    r.get("data", "outcome", c.columns.outcome);
    r.get("data", "treatment", c.columns.treatment);
    if (const auto* v = r.find("data", "covariates"); v && *v != "all")
        c.columns.covariates = detail::split_list(*v);

    r.get("loss", "kind", c.loss);
    r.get("loss", "bound", c.loss_bound);

    if (const auto* v = r.find("network", "widths")) {
        c.widths.clear();
        for (const auto& w : detail::split_list(*v)) c.widths.push_back(detail::Reader::integer("network", "widths", w));
    }
    r.get("network", "dropout", c.dropout);
    if (const auto* v = r.find("network", "clamp"); v && *v != "none")
        c.clamp = detail::Reader::number("network", "clamp", *v);

    r.get("train", "learning_rate", c.train.learning_rate);
    r.get("train", "batch_size", c.train.batch_size);
    r.get("train", "epochs", c.train.epochs);
    r.choice<OptimizerKind>("train", "optimizer", c.train.optimizer,
                            {{"sgd", OptimizerKind::PlainSgd}, {"adam", OptimizerKind::AdaptiveMoment}});
    r.get("train", "validation_fraction", c.train.validation_fraction);
    r.get("train", "shuffle", c.train.shuffle);
    r.choice<TrainTarget>("train", "target", c.target,
                          {{"outcome", TrainTarget::Outcome},
                           {"joint", TrainTarget::Joint},
                           {"per_arm", TrainTarget::PerArm},
                           {"propensity", TrainTarget::Propensity}});

    r.get("causal", "randomized_treatment", c.randomized);
    r.get("causal", "clip_eps", c.clip_eps);
    r.get("causal", "margin", c.margin);
    r.get("causal", "cost", c.cost);
    r.get("causal", "level", c.level);
    r.choice<OutcomeFit>("causal", "outcome_fit", c.outcome_fit,
                         {{"joint", OutcomeFit::Joint}, {"per_arm", OutcomeFit::PerArm}});
    r.get("causal", "mu0_model", c.mu0_model);
    r.get("causal", "mu1_model", c.mu1_model);
    r.get("causal", "joint_model", c.joint_model);
    r.get("causal", "propensity_model", c.propensity_model);

    r.get("policy", "policy", c.policy);
    r.get("policy", "covariate", c.covariate);
    r.get("policy", "threshold", c.threshold);
    r.get("policy", "base", c.base);
    r.get("policy", "grid_start", c.grid_start);
    r.get("policy", "grid_step", c.grid_step);
    r.get("policy", "grid_stop", c.grid_stop);

    r.get("simulation", "d", c.dgp.d);
    r.choice<PropensityMode>("simulation", "propensity", c.dgp.propensity_mode,
                             {{"constant", PropensityMode::Constant}, {"logistic", PropensityMode::Logistic}});
    r.choice<OutcomeMode>("simulation", "outcome", c.dgp.outcome_mode,
                          {{"linear", OutcomeMode::Linear}, {"nonlinear", OutcomeMode::Nonlinear}});
    r.get("simulation", "n", c.dgp.n);
    r.get("simulation", "coef_seed", c.dgp.coef_seed);
    r.choice<NormalScale>("simulation", "normal_scale", c.dgp.normal_scale,
                          {{"variance", NormalScale::Variance}, {"sd", NormalScale::StdDev}});
    r.get("simulation", "noise_sd", c.dgp.noise_sd);
    r.get("simulation", "reps", c.reps);
    r.choice<NuisanceMode>("simulation", "nuisance", c.nuisance,
                           {{"trained", NuisanceMode::Trained}, {"oracle", NuisanceMode::Oracle}});
    r.get("simulation", "threads", c.threads);
    r.get("simulation", "placebo_fraction", c.placebo_fraction);

    r.get("advise", "n", c.advise_n);
    r.get("advise", "d", c.advise_d);
    r.get("advise", "beta", c.advise_beta);
    r.get("advise", "c_width", c.c_width);
    r.get("advise", "c_depth", c.c_depth);

    r.check_unused();
    c.train.validate();
    detail::require<ConfigError>(!c.widths.empty(), "network.widths must list at least one hidden layer");
    detail::require<ConfigError>(c.dropout >= 0.0 && c.dropout < 1.0, "network.dropout must lie in [0, 1)");
    detail::require<ConfigError>(c.clip_eps > 0.0 && c.clip_eps < 0.5, "causal.clip_eps must lie in (0, 0.5)");
    detail::require<ConfigError>(c.level >= 0.0 && c.level < 1.0, "causal.level must lie in [0, 1)");
    detail::require<ConfigError>(c.placebo_fraction > 0.0 && c.placebo_fraction < 1.0,
                                 "simulation.placebo_fraction must lie in (0, 1)");
    parse_loss_kind(c.loss, c.loss_bound);
    return c;
}

/// Every effective setting as an INI document; feeding it back reproduces the run.
inline std::string to_ini(const RunConfig& c) {
    auto list = [](const auto& v) { return dnnci::detail::join(v); };
    auto names = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
        return s.empty() ? std::string("all") : s;
    };
    auto f = [](double v) { return format_double(v); };
    std::ostringstream o;
    o << "[run]\nseed = " << c.seed << "\nout = " << c.out << "\n\n";
    o << "[data]\npath = " << c.data_path << "\noutcome = " << c.columns.outcome
      << "\ntreatment = " << c.columns.treatment << "\ncovariates = " << names(c.columns.covariates) << "\n\n";
    o << "[loss]\nkind = " << c.loss << "\nbound = " << f(c.loss_bound) << "\n\n";
    o << "[network]\nwidths = " << list(c.widths) << "\ndropout = " << f(c.dropout)
      << "\nclamp = " << (c.clamp ? f(*c.clamp) : std::string("none")) << "\n\n";
    static const char* targets[] = {"outcome", "joint", "per_arm", "propensity"};
    o << "[train]\nlearning_rate = " << f(c.train.learning_rate) << "\nbatch_size = " << c.train.batch_size
      << "\nepochs = " << c.train.epochs
      << "\noptimizer = " << (c.train.optimizer == OptimizerKind::PlainSgd ? "sgd" : "adam")
      << "\nvalidation_fraction = " << f(c.train.validation_fraction)
      << "\nshuffle = " << (c.train.shuffle ? "true" : "false")
      << "\ntarget = " << targets[static_cast<int>(c.target)] << "\n\n";
    o << "[causal]\nrandomized_treatment = " << (c.randomized ? "true" : "false") << "\nclip_eps = " << f(c.clip_eps)
      << "\nmargin = " << f(c.margin) << "\ncost = " << f(c.cost) << "\nlevel = " << f(c.level)
      << "\noutcome_fit = " << (c.outcome_fit == OutcomeFit::Joint ? "joint" : "per_arm")
      << "\nmu0_model = " << c.mu0_model << "\nmu1_model = " << c.mu1_model << "\njoint_model = " << c.joint_model
      << "\npropensity_model = " << c.propensity_model << "\n\n";
    o << "[policy]\npolicy = " << c.policy << "\ncovariate = " << c.covariate << "\nthreshold = " << f(c.threshold)
      << "\nbase = " << c.base << "\ngrid_start = " << f(c.grid_start) << "\ngrid_step = " << f(c.grid_step)
      << "\ngrid_stop = " << f(c.grid_stop) << "\n\n";
    o << "[simulation]\nd = " << c.dgp.d
      << "\npropensity = " << (c.dgp.propensity_mode == PropensityMode::Constant ? "constant" : "logistic")
      << "\noutcome = " << (c.dgp.outcome_mode == OutcomeMode::Linear ? "linear" : "nonlinear") << "\nn = " << c.dgp.n
      << "\ncoef_seed = " << c.dgp.coef_seed
      << "\nnormal_scale = " << (c.dgp.normal_scale == NormalScale::Variance ? "variance" : "sd")
      << "\nnoise_sd = " << f(c.dgp.noise_sd) << "\nreps = " << c.reps
      << "\nnuisance = " << (c.nuisance == NuisanceMode::Trained ? "trained" : "oracle")
      << "\nthreads = " << c.threads << "\nplacebo_fraction = " << f(c.placebo_fraction) << "\n\n";
    o << "[advise]\nn = " << f(c.advise_n) << "\nd = " << c.advise_d << "\nbeta = " << f(c.advise_beta)
      << "\nc_width = " << f(c.c_width) << "\nc_depth = " << f(c.c_depth) << "\n";
    return o.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline int exit_code(const Error& e) {
    const std::string c = e.category();
    if (c == "config") return 2;
    if (c == "numeric") return 4;
    return 3;
}

inline std::string error_line(const std::string& category, const std::string& message) {
    std::string escaped;
    for (char ch : message) {
        if (ch == '"' || ch == '\\') escaped += '\\';
        escaped += ch == '\n' ? ' ' : ch;
    }
    return "error category=" + category + " message=\"" + escaped + "\"";
}

namespace detail {

struct Session {
    const RunConfig& cfg;
    std::filesystem::path dir;
    std::ostream& out;

    std::ofstream open(const std::string& name) const {
        std::ofstream f(dir / name);
        if (!f) throw DataError("cannot write " + (dir / name).string());
        return f;
    }
};

inline LoadedData load(const RunConfig& cfg) {
    require<ConfigError>(!cfg.data_path.empty(), "data.path is required for this command");
    auto loaded = load_csv(cfg.data_path, cfg.columns);
    return loaded;
}

inline std::size_t covariate_index(const RunConfig& cfg, const std::vector<std::string>& names) {
    for (std::size_t j = 0; j < names.size(); ++j)
        if (names[j] == cfg.covariate) return j;
    const auto j = Reader::integer("policy", "covariate", cfg.covariate);
    require<ConfigError>(j < names.size(), "policy.covariate '" + cfg.covariate + "' is not a covariate");
    return j;
}

/// Outcome regressions and propensity, loaded from model files when given, otherwise fit here.
struct Nuisances {
    std::optional<OutcomeRegression> outcome;
    std::optional<PropensityModel> propensity;
    NuisanceEstimates estimates;
};

inline void check_input_dim(const TrainedModel& m, std::size_t d, const std::string& path) {
    require<DataError>(m.net.spec.input_dim == d, "model " + path + " expects " + std::to_string(m.net.spec.input_dim) +
                                                      " covariates, data has " + std::to_string(d));
}

inline std::unique_ptr<Nuisances> nuisances(const RunConfig& cfg, const CausalDataset& data, std::ostream& log) {
    auto n = std::make_unique<Nuisances>();
    const std::size_t d = data.d();
    if (!cfg.joint_model.empty()) {
        auto m = load_model(cfg.joint_model);
        check_input_dim(m, d, cfg.joint_model);
        n->outcome = OutcomeRegression::joint(std::move(m));
    } else if (!cfg.mu0_model.empty() || !cfg.mu1_model.empty()) {
        require<ConfigError>(!cfg.mu0_model.empty() && !cfg.mu1_model.empty(),
                             "causal.mu0_model and causal.mu1_model must be given together");
        auto m0 = load_model(cfg.mu0_model);
        auto m1 = load_model(cfg.mu1_model);
        check_input_dim(m0, d, cfg.mu0_model);
        check_input_dim(m1, d, cfg.mu1_model);
        require<DataError>(m0.net.spec.output_dim == 1 && m1.net.spec.output_dim == 1,
                           "per-arm outcome models must have one output");
        n->outcome = OutcomeRegression::per_arm(std::move(m0), std::move(m1));
    } else {
        TrainConfig tc = cfg.train;
        tc.seed = stream_seed(cfg.seed, 1);
        const auto arch = cfg.architecture(d, cfg.outcome_fit == OutcomeFit::Joint ? 2 : 1);
        n->outcome = cfg.outcome_fit == OutcomeFit::Joint ? fit_joint(data.X, data.y, data.t, arch, tc)
                                                          : fit_regressions_by_arm(data.X, data.y, data.t, arch, tc);
        log << "fitted outcome model(s) in-run\n";
    }
    if (!cfg.randomized) {
        if (!cfg.propensity_model.empty()) {
            auto m = load_model(cfg.propensity_model);
            check_input_dim(m, d, cfg.propensity_model);
            require<DataError>(m.kind.tag == LossKind::Tag::Logistic, "propensity model must use the logistic loss");
            n->propensity = PropensityModel{std::move(m)};
        } else {
            TrainConfig tc = cfg.train;
            tc.seed = stream_seed(cfg.seed, 2);
            n->propensity = fit_propensity(data.X, data.t, cfg.architecture(d, 1), tc);
            log << "fitted propensity model in-run\n";
        }
    }
    n->estimates = NuisanceEstimates::from_models(*n->outcome, n->propensity ? &*n->propensity : nullptr, cfg.clip_eps);
    return n;
}

inline Policy make_policy(const std::string& which, std::size_t j, double threshold) {
    if (which == "all") return [](std::span<const double>) { return 1.0; };
    if (which == "none") return [](std::span<const double>) { return 0.0; };
    if (which == "threshold") return [j, threshold](std::span<const double> x) { return x[j] > threshold ? 1.0 : 0.0; };
    throw ConfigError("policy.policy must be all, none or threshold, got '" + which + "'");
}

inline void write_estimates(const Session& s, const std::vector<EstimateReport>& reports) {
    auto csv = s.open("report.csv");
    write_estimate_csv_header(csv);
    auto kv = s.open("summary.txt");
    for (const auto& r : reports) {
        write_estimate_csv_row(csv, r);
        write_estimate_kv(kv, r);
        s.out << r.estimand_tag << " estimate=" << format_double(r.estimate) << " se=" << format_double(r.std_error)
              << " ci=[" << format_double(r.ci_low) << ", " << format_double(r.ci_high) << "]\n";
    }
}

inline void cmd_train(const Session& s) {
    const auto& cfg = s.cfg;
    const auto loaded = load(cfg);
    s.out << loaded.summary << '\n';
    const auto& data = loaded.data;
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    auto kv = s.open("summary.txt");
    auto save = [&](const std::string& name, const TrainedModel& m) {
        auto f = s.open(name);
        write_model(f, m);
        kv << "[" << name << "]\n";
        write_fit_kv(kv, m.fit);
        s.out << "wrote " << (s.dir / name).string() << " training_loss=" << format_double(m.fit.training_loss) << '\n';
    };
    switch (cfg.target) {
        case TrainTarget::Outcome: {
            const auto kind = parse_loss_kind(cfg.loss, cfg.loss_bound);
            save("model.txt", fit(data.X, data.y, cfg.architecture(data.d(), kind.output_dim()), kind, tc));
            break;
        }
        case TrainTarget::Joint:
            save("joint_model.txt", fit_joint(data.X, data.y, data.t, cfg.architecture(data.d(), 2), tc).models()[0]);
            break;
        case TrainTarget::PerArm: {
            const auto r = fit_regressions_by_arm(data.X, data.y, data.t, cfg.architecture(data.d(), 1), tc);
            save("mu0_model.txt", r.models()[0]);
            save("mu1_model.txt", r.models()[1]);
            break;
        }
        case TrainTarget::Propensity:
            save("propensity_model.txt", fit_propensity(data.X, data.t, cfg.architecture(data.d(), 1), tc).model);
            break;
    }
}

inline void cmd_estimate(const Session& s, const std::string& command) {
    const auto& cfg = s.cfg;
    const auto loaded = load(cfg);
    s.out << loaded.summary << '\n';
    const auto& data = loaded.data;
    const auto nuis = nuisances(cfg, data, s.out);
    const auto v = evaluate_nuisances(data, nuis->estimates);
    std::vector<EstimateReport> reports;
    if (command == "ate") {
        reports.push_back(ate(data, v, cfg.level).report);
    } else if (command == "tot") {
        reports.push_back(tot(data, v, cfg.level).report);
    } else if (command == "decomp") {
        const auto dec = decomposition(data, v, cfg.level);
        reports = {dec.total.report, dec.covariates.report, dec.coefficients.report};
    } else if (command == "profit") {
        const std::size_t j = cfg.policy == "threshold" ? covariate_index(cfg, loaded.covariate_names) : 0;
        reports.push_back(profit(data, v, make_policy(cfg.policy, j, cfg.threshold), cfg.margin, cfg.cost, cfg.level).report);
    } else {
        const std::size_t j = covariate_index(cfg, loaded.covariate_names);
        const auto cls = ThresholdPolicyClass::regular(j, cfg.grid_start, cfg.grid_step, cfg.grid_stop);
        Policy base;
        if (cfg.base == "none" || cfg.base == "all")
            base = make_policy(cfg.base, j, 0.0);
        else
            base = make_policy("threshold", j, Reader::number("policy", "base", cfg.base));
        const auto curve = evaluate_grid(data, v, cls, base, cfg.margin, cfg.cost, cfg.level);
        {
            auto f = s.open("curve.csv");
            write_curve_csv(f, curve);
        }
        const auto best = select_optimal(curve);
        auto kv = s.open("summary.txt");
        kv << "covariate = " << loaded.covariate_names[j] << "\nselected_threshold = " << format_double(best.threshold)
           << '\n';
        write_estimate_kv(kv, best.report);
        auto csv = s.open("report.csv");
        write_estimate_csv_header(csv);
        write_estimate_csv_row(csv, best.report);
        s.out << "selected threshold " << format_double(best.threshold) << " on " << loaded.covariate_names[j]
              << " gain=" << format_double(best.report.estimate) << " se=" << format_double(best.report.std_error)
              << '\n';
        return;
    }
    write_estimates(s, reports);
}

inline void write_mc(const Session& s, const McReport& r) {
    {
        auto f = s.open("reps.csv");
        write_reps_csv(f, r);
    }
    auto kv = s.open("summary.txt");
    write_mc_summary(kv, r);
    write_mc_summary(s.out, r);
}

inline void cmd_simulate(const Session& s) {
    const auto& cfg = s.cfg;
    StudyConfig sc;
    sc.dgp = cfg.dgp;
    sc.widths = cfg.widths;
    sc.train = cfg.train;
    sc.reps = cfg.reps;
    sc.master_seed = cfg.seed;
    sc.nuisance_mode = cfg.nuisance;
    sc.outcome_fit = cfg.outcome_fit;
    sc.clip_eps = cfg.clip_eps;
    sc.level = cfg.level;
    sc.threads = cfg.threads;
    write_mc(s, run_study(sc));
}

inline void cmd_placebo(const Session& s) {
    const auto& cfg = s.cfg;
    PlaceboConfig pc;
    pc.widths = cfg.widths;
    pc.train = cfg.train;
    pc.placebo_fraction = cfg.placebo_fraction;
    pc.reps = cfg.reps;
    pc.master_seed = cfg.seed;
    pc.outcome_fit = cfg.outcome_fit;
    pc.clip_eps = cfg.clip_eps;
    pc.level = cfg.level;
    pc.threads = cfg.threads;
    if (cfg.data_path.empty()) {
        write_mc(s, run_placebo(cfg.dgp, pc));
    } else {
        const auto loaded = load(cfg);
        s.out << loaded.summary << '\n';
        write_mc(s, run_placebo(loaded.data, pc));
    }
}

inline void cmd_advise(const Session& s) {
    const auto& cfg = s.cfg;
    const auto spec = advise_architecture(cfg.advise_n, cfg.advise_d, cfg.advise_beta, cfg.c_width, cfg.c_depth);
    const std::size_t H = spec.hidden_widths.front();
    const std::size_t L = spec.depth();
    s.out << "H=" << H << " L=" << L << " params=" << param_count(spec) << '\n';
    auto kv = s.open("summary.txt");
    kv << "width = " << H << "\ndepth = " << L << "\nparam_count = " << param_count(spec) << '\n';
}

}  // namespace detail

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"train",  "ate",      "profit",  "tot",   "decomp",
                                            "policy", "simulate", "placebo", "advise"};
    return c;
}

/**
 * Runs one command. Artifacts go to cfg.out; `manifest.txt` records version, command, seed,
 * config hash and the effective config (also saved as `config.ini`). Its `timestamp` line is
 * the only content that differs between identical runs.
 */
inline void run(const std::string& command, const RunConfig& cfg, std::ostream& out) {
    if (std::find(commands().begin(), commands().end(), command) == commands().end())
        throw ConfigError("unknown command '" + command + "'");
    std::filesystem::path dir(cfg.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + cfg.out + ": " + ec.message());
    const detail::Session s{cfg, dir, out};
    const std::string ini = to_ini(cfg);
    {
        auto f = s.open("config.ini");
        f << ini;
    }
    if (command == "train") detail::cmd_train(s);
    else if (command == "simulate") detail::cmd_simulate(s);
    else if (command == "placebo") detail::cmd_placebo(s);
    else if (command == "advise") detail::cmd_advise(s);
    else detail::cmd_estimate(s, command);

    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(command + "\n" + ini)));
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    auto m = s.open("manifest.txt");
    m << "dnnci_version = " << DNNCI_VERSION << "\ncommand = " << command << "\nconfig_hash = " << hash
      << "\nseed = " << cfg.seed << "\noutcome_seed = " << stream_seed(cfg.seed, 1)
      << "\npropensity_seed = " << stream_seed(cfg.seed, 2) << "\nconfig_file = config.ini"
      << "\nrerun = dnnci " << command << " --config " << (dir / "config.ini").string() << "\ntimestamp = " << stamp
      << '\n';
}

/// run() with errors mapped to a one-line message on `err` and an exit status.
inline int run_guarded(const std::string& command, const RawConfig& raw, std::ostream& out, std::ostream& err) {
    try {
        run(command, build_config(raw), out);
        return 0;
    } catch (const Error& e) {
        err << error_line(e.category(), e.what()) << '\n';
        return exit_code(e);
    } catch (const std::bad_alloc&) {
        err << error_line("numeric", "out of memory") << '\n';
        return 4;
    }
}

}  // namespace dnnci::cli
